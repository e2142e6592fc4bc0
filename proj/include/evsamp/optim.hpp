#pragma once

#include <cstdint>
#include <vector>

#include "evsamp/errors.hpp"
#include "evsamp/tape.hpp"

namespace evs {

// First-moment / second-moment accumulators for one parameter tensor.
struct AdamSlot {
    std::vector<double> m;
    std::vector<double> v;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

// Optimizer state across all parameters. Slots are indexed in lockstep with
// ParamSet::items; step counts completed updates and drives bias correction.
struct AdamState {
    std::vector<AdamSlot> slots;
    std::uint64_t step = 0;

    static AdamState init(const ParamSet& params);
};

// One Adam update over every parameter, in place. grads must hold one
// gradient tensor per parameter, shape-matched; state.step is incremented
// before the bias-corrected update so the first call uses t = 1.
void adam_step(ParamSet& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& cfg);

// shadow <- momentum * shadow + (1 - momentum) * params, elementwise.
void ema_update(std::vector<Tensor>& shadow, const ParamSet& params, double momentum);

// Fresh shadow initialised to a copy of the current parameter values.
std::vector<Tensor> ema_init(const ParamSet& params);

}  // namespace evs
