#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evsamp/tape.hpp"

namespace evs {

struct OpCounts {
    std::uint64_t ac = 0;
    std::uint64_t mac = 0;
};

// Synaptic-operation tally of a recorded forward pass, split by scope tag.
struct OpCounter {
    std::uint64_t ac_count = 0;
    std::uint64_t mac_count = 0;
    std::vector<std::pair<std::string, OpCounts>> modules;  // first-seen order

    void add(const std::string& module, std::uint64_t ac, std::uint64_t mac);
    void merge(const OpCounter& other);
    OpCounts module_total(std::string_view prefix) const;
};

// Counts convolution work only (synaptic ops). A dense conv on real input
// costs C_out*C_in*k^2*H*W MACs; a spike-input conv costs nnz*C_out*k^2 ACs,
// so an all-zero spike plane is free.
OpCounter count_ops(const Tape& tape);

// E = mac * 4.6 pJ + ac * 0.9 pJ, reported in mJ.
double energy_mj(double ac, double mac);
double energy_mj(const OpCounter& counter);

// Printed breakdown by module with a grand total; when split_embedding is
// set, rows under the sampler scope are subtotaled separately so the cost
// of the embedding phase is visible both included and excluded.
std::string energy_report(const OpCounter& counter, bool split_embedding);

}  // namespace evs
