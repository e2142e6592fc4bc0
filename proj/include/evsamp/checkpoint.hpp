#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evsamp/optim.hpp"
#include "evsamp/tape.hpp"

namespace evs {

// Snapshot of a training run: parameters plus optional optimizer and shadow
// state. Payloads are serialised as f32, so a load/save cycle is byte exact.
struct Checkpoint {
    std::uint64_t train_step = 0;
    ParamSet params;
    bool has_adam = false;
    AdamState adam;
    bool has_ema = false;
    std::vector<Tensor> ema;
};

// Binary layout, little endian throughout:
//   "CKPT" | u32 version | u64 train_step | u64 adam_step | u32 section_count
//   section: u16 name_len | name | u32 entry_count
//   entry:   u16 name_len | name | u8 ndim | u32 dims[ndim] | f32 data[prod]
// Sections present: "params", then optionally "adam_m"/"adam_v" and "ema".
// adam_m/adam_v/ema entries mirror params order and names.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace evs
