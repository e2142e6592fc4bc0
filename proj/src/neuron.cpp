#include "evsamp/neuron.hpp"

#include <cmath>
#include <numbers>

#include "evsamp/errors.hpp"

namespace evs {

void LIFParams::validate() const {
    if (!(dt_over_tau > 0.0 && dt_over_tau <= 1.0))
        throw InvalidConfigError("dt/tau must lie in (0, 1]");
    if (!(theta > 0.0)) throw InvalidConfigError("threshold must be positive");
    if (!std::isfinite(u_reset)) throw InvalidConfigError("reset potential must be finite");
}

std::string_view to_string(SurrogateKind kind) {
    switch (kind) {
        case SurrogateKind::triangular: return "triangular";
        case SurrogateKind::rectangular: return "rectangular";
        case SurrogateKind::atan: return "atan";
    }
    return "?";
}

SurrogateKind surrogate_kind_from(std::string_view name) {
    if (name == "triangular") return SurrogateKind::triangular;
    if (name == "rectangular") return SurrogateKind::rectangular;
    if (name == "atan") return SurrogateKind::atan;
    throw InvalidConfigError("unknown surrogate kind: " + std::string(name));
}

void SurrogateSpec::validate() const {
    if (!(alpha > 0.0)) throw InvalidConfigError("surrogate width must be positive");
}

double surrogate_eval(const SurrogateSpec& spec, double x) {
    const double a = spec.alpha;
    switch (spec.kind) {
        case SurrogateKind::triangular:
            return std::max(0.0, 1.0 - std::abs(x) / a) / a;
        case SurrogateKind::rectangular:
            return std::abs(x) < a ? 1.0 / (2.0 * a) : 0.0;
        case SurrogateKind::atan: {
            // d/dx of arctan(a*pi*x) / pi^2: bell of height a/pi, total mass 1/pi.
            const double pi = std::numbers::pi;
            const double z = a * pi * x;
            return a / (pi * (1.0 + z * z));
        }
    }
    return 0.0;
}

NeuronState lif_step(const NeuronState& state, double input, const LIFParams& params, int step) {
    if (!std::isfinite(input)) throw NonFiniteError("non-finite neuron input");
    NeuronState next;
    next.u = (1.0 - params.dt_over_tau) * state.v + params.dt_over_tau * input;
    next.s = next.u >= params.theta ? 1 : 0;
    if (params.reset == ResetMode::soft) {
        next.v = next.u - params.theta * next.s;
    } else {
        next.v = next.s ? params.u_reset : next.u;
    }
    next.last_spike_step = next.s ? std::optional<int>(step) : state.last_spike_step;
    return next;
}

LIFRun lif_run(std::span<const double> inputs, const LIFParams& params) {
    params.validate();
    LIFRun run;
    run.spikes.reserve(inputs.size());
    run.potentials.reserve(inputs.size());
    NeuronState state;
    int step = 0;
    for (double input : inputs) {
        state = lif_step(state, input, params, ++step);
        run.spikes.push_back(state.s);
        run.potentials.push_back(state.u);
    }
    run.final_state = state;
    return run;
}

}  // namespace evs
