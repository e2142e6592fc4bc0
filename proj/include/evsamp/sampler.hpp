#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "evsamp/frames.hpp"
#include "evsamp/tape.hpp"

namespace evs {

enum class SamplerMode { snn, rsnn, arsnn };

std::string_view to_string(SamplerMode mode);
SamplerMode sampler_mode_from(std::string_view name);

struct SamplerConfig {
    SamplerMode mode = SamplerMode::arsnn;
    int kernel = 3;
    double theta = 1.0;
    double snn_decay = 0.5;  // constant leak for the non-recurrent mode
    SurrogateSpec surrogate;

    void validate() const;
};

// Fresh sampler parameters. Recurrent modes use w_in_f/w_in_s/b_in for the
// input current and w_gate_f/w_gate_s/b_gate for the decay gate; the
// non-recurrent mode uses w_conv/b_conv only. All kernels are (2,2,k,k).
ParamSet init_sampler_params(const SamplerConfig& cfg, std::uint64_t seed);

// Parameter set registered on one tape, addressed by name.
struct BoundParams {
    std::vector<std::pair<std::string, ValueId>> ids;

    ValueId at(std::string_view name) const;
};

BoundParams bind_params(Tape& tape, const ParamSet& params);

// Per-step (2, H, W) records of one unrolled sampler pass.
struct SamplerTrace {
    SamplerMode mode = SamplerMode::arsnn;
    int width = 0, height = 0;
    int step_count = 0;
    std::uint64_t t_start = 0;
    std::uint64_t slice_us = 0;
    double theta = 1.0;
    std::vector<Tensor> u, v, s, gate;
};

// Tape ids for the per-step potentials and spikes, needed downstream.
struct SamplerTapeRefs {
    std::vector<ValueId> u, s;
};

SamplerTrace sampler_forward(Tape& tape, const BoundParams& params,
                             const FrameSequence& frames, const SamplerConfig& cfg,
                             SamplerTapeRefs* refs = nullptr);

// One spike-delimited sampling interval of one neuron; steps are 1-based,
// the window covers [t_open, t_close] and the closing step fired.
struct SampleWindow {
    std::uint16_t x = 0, y = 0;
    std::uint8_t p = 0;
    std::int32_t index = 0;  // 1-based per neuron
    std::int32_t t_open = 0;
    std::int32_t t_close = 0;
    double potential_sum = 0.0;  // filled by aggregation
};

// Windows per flat neuron index (p*H*W + y*W + x), ordered by index.
std::vector<std::vector<SampleWindow>> extract_windows(const SamplerTrace& trace);

struct EmbeddingSequence {
    int slot_count = 0;
    bool rpd = false;
    bool sat = false;
    int step_count = 0;
    std::uint64_t t_start = 0;
    std::uint64_t slice_us = 0;
    std::vector<Tensor> slots;  // slot_count frames of (2, H, W)
};

// Sums per-window potentials into at most K embedding slots. Windows past
// slot K-1 merge into it; the post-last-spike residual is dropped under rpd
// and otherwise lands in the neuron's last filled slot. With sat each
// window's sum is multiplied by its closing spike, which leaves the forward
// value untouched and only reroutes gradients. Fills potential_sum on the
// windows as a side effect.
EmbeddingSequence aggregate_windows(Tape& tape, const SamplerTrace& trace,
                                    const SamplerTapeRefs& refs,
                                    std::vector<std::vector<SampleWindow>>& windows,
                                    bool rpd, bool sat, int slot_count,
                                    std::vector<ValueId>* slot_ids = nullptr);

// Equal-step partition for the non-sampling modes: slot k sums potentials
// over steps (k*T/K, (k+1)*T/K], ungated.
EmbeddingSequence fixed_partition_embedding(Tape& tape, const SamplerTrace& trace,
                                            const SamplerTapeRefs& refs, int slot_count,
                                            std::vector<ValueId>* slot_ids = nullptr);

// Raw events backing each window: indices of stream events at the window's
// (x, y, p) with t in (t_start + (t_open-1)*slice, t_start + t_close*slice].
std::vector<std::vector<std::size_t>> sample_events(const EventStream& stream,
                                                    const SamplerTrace& trace,
                                                    std::span<const SampleWindow> windows);

}  // namespace evs
