#include "evsamp/optim.hpp"

#include <cmath>
#include <cstddef>
#include <string>

namespace evs {

void AdamConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) {
        throw InvalidConfigError("adam: lr must be positive and finite");
    }
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw InvalidConfigError("adam: betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) {
        throw InvalidConfigError("adam: eps must be positive");
    }
}

AdamState AdamState::init(const ParamSet& params) {
    AdamState state;
    state.slots.resize(params.items.size());
    for (std::size_t i = 0; i < params.items.size(); ++i) {
        const std::size_t n = params.items[i].second.data.size();
        state.slots[i].m.assign(n, 0.0);
        state.slots[i].v.assign(n, 0.0);
    }
    return state;
}

void adam_step(ParamSet& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& cfg) {
    cfg.validate();
    if (grads.size() != params.items.size() || state.slots.size() != params.items.size()) {
        throw ShapeMismatchError("adam: state/gradient count does not match parameter count");
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.items.size(); ++i) {
        Tensor& p = params.items[i].second;
        const Tensor& g = grads[i];
        if (g.data.size() != p.data.size()) {
            throw ShapeMismatchError("adam: gradient shape mismatch for " + params.items[i].first);
        }
        AdamSlot& slot = state.slots[i];
        for (std::size_t j = 0; j < p.data.size(); ++j) {
            const double gj = g.data[j];
            if (!std::isfinite(gj)) {
                throw NonFiniteError("adam: non-finite gradient for " + params.items[i].first);
            }
            slot.m[j] = cfg.beta1 * slot.m[j] + (1.0 - cfg.beta1) * gj;
            slot.v[j] = cfg.beta2 * slot.v[j] + (1.0 - cfg.beta2) * gj * gj;
            const double mhat = slot.m[j] / bc1;
            const double vhat = slot.v[j] / bc2;
            p.data[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

void ema_update(std::vector<Tensor>& shadow, const ParamSet& params, double momentum) {
    if (momentum < 0.0 || momentum >= 1.0) {
        throw InvalidConfigError("ema: momentum must lie in [0, 1)");
    }
    if (shadow.size() != params.items.size()) {
        throw ShapeMismatchError("ema: shadow count does not match parameter count");
    }
    for (std::size_t i = 0; i < params.items.size(); ++i) {
        const Tensor& p = params.items[i].second;
        Tensor& s = shadow[i];
        if (s.data.size() != p.data.size()) {
            throw ShapeMismatchError("ema: shadow shape mismatch for " + params.items[i].first);
        }
        for (std::size_t j = 0; j < p.data.size(); ++j) {
            s.data[j] = momentum * s.data[j] + (1.0 - momentum) * p.data[j];
        }
    }
}

std::vector<Tensor> ema_init(const ParamSet& params) {
    std::vector<Tensor> shadow;
    shadow.reserve(params.items.size());
    for (const auto& item : params.items) {
        shadow.push_back(item.second);
    }
    return shadow;
}

}  // namespace evs
