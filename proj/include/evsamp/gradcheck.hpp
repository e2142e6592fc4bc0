#pragma once

#include <functional>

#include "evsamp/sampler.hpp"

namespace evs {

// Builds one loss on a fresh tape from the current parameter values.
using LossBuilder = std::function<ValueId(Tape& tape, const ParamSet& params)>;

struct FdOptions {
    double eps = 1e-6;
    double rel_floor = 1e-4;      // denominator floor for tiny gradient pairs
    double margin_guard = 1e-3;   // distance every potential must keep from
                                  // the surrogate support edge
    int coords_per_param = 6;
};

struct FdReport {
    int checked = 0;
    int skipped = 0;  // coordinates whose perturbation flipped a spike
    double max_rel_err = 0.0;
    double base_loss = 0.0;
    double min_margin = 0.0;  // min over threshold nodes of |u-theta| - support
    bool margin_ok = false;

    bool all_unstable() const { return checked == 0; }
};

// Central finite differences against the tape gradients, coordinate by
// coordinate. A coordinate only counts when the +-eps forward passes leave
// every spike untouched; the fixture must also keep all potentials outside
// the surrogate support (margin_ok), otherwise the analytic gradient
// legitimately includes surrogate terms that no difference quotient sees and
// nothing is checked.
FdReport finite_diff_check(const ParamSet& params, const LossBuilder& build,
                           const FdOptions& opts = {});

struct SatFactorCase {
    double ratio_measured = 0.0;
    double ratio_expected = 0.0;  // 1 + window_sum * h_alpha(u_close - theta)
    double window_sum = 0.0;
    double u_close = 0.0;
};

// Scalar single-window fixture: the gradient at the closing step with the
// spike factor enabled, divided by the same gradient without it.
SatFactorCase sat_gradient_factor_check(std::uint64_t seed);

// Full-pipeline check on a small random detection fixture with narrow
// surrogates. Random draws can land potentials inside the surrogate support
// where no finite difference matches the analytic gradient; the fixture then
// redraws deterministically (bounded attempts) until the margin holds.
FdReport model_gradcheck(std::string_view arm, bool rpd, std::uint64_t seed,
                         const FdOptions& opts = {});

}  // namespace evs
