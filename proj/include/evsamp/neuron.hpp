#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace evs {

enum class ResetMode { soft, hard };

// Discrete LIF step: u' = (1 - r)*v + r*I with r = dt/tau. Decay and input
// gain always sum to 1, so only the ratio is stored.
struct LIFParams {
    double dt_over_tau = 0.5;
    double theta = 1.0;
    double u_reset = 0.0;
    ResetMode reset = ResetMode::soft;

    double decay() const { return 1.0 - dt_over_tau; }
    void validate() const;
};

struct NeuronState {
    double v = 0.0;  // post-reset potential
    double u = 0.0;  // pre-reset potential at the current step
    int s = 0;
    std::optional<int> last_spike_step;
};

enum class SurrogateKind { triangular, rectangular, atan };

std::string_view to_string(SurrogateKind kind);
SurrogateKind surrogate_kind_from(std::string_view name);

struct SurrogateSpec {
    SurrogateKind kind = SurrogateKind::triangular;
    double alpha = 1.0;

    void validate() const;
};

// Pseudo-derivative of the spike function at u - theta = x.
double surrogate_eval(const SurrogateSpec& spec, double x);

NeuronState lif_step(const NeuronState& state, double input, const LIFParams& params,
                     int step = 0);

struct LIFRun {
    std::vector<int> spikes;
    std::vector<double> potentials;  // pre-reset u per step
    NeuronState final_state;
};

LIFRun lif_run(std::span<const double> inputs, const LIFParams& params);

}  // namespace evs
