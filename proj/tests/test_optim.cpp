#include <doctest.h>

#include <cmath>
#include <vector>

#include "evsamp/optim.hpp"

using namespace evs;

namespace {

ParamSet one_scalar(double v) {
    ParamSet p;
    p.add("w", Tensor::scalar(v));
    return p;
}

}  // namespace

TEST_CASE("adam first step moves by roughly minus lr") {
    ParamSet params = one_scalar(0.0);
    AdamState state = AdamState::init(params);
    AdamConfig cfg;
    cfg.lr = 0.1;
    adam_step(params, {Tensor::scalar(1.0)}, state, cfg);
    // mhat = vhat = 1 after bias correction, so the step is -lr/(1 + eps).
    CHECK(params.at("w").data[0] == doctest::Approx(-0.1).epsilon(1e-7));
    CHECK(state.step == 1);
}

TEST_CASE("adam matches an independent scalar reference over many steps") {
    ParamSet params = one_scalar(0.7);
    AdamState state = AdamState::init(params);
    AdamConfig cfg;
    cfg.lr = 0.05;

    double ref = 0.7, m = 0.0, v = 0.0;
    for (int t = 1; t <= 40; ++t) {
        // Gradient of f(w) = w^2/2 plus a deterministic wobble.
        const double g_model = params.at("w").data[0] + 0.3 * std::sin(0.9 * t);
        const double g_ref = ref + 0.3 * std::sin(0.9 * t);
        CHECK(g_model == doctest::Approx(g_ref).epsilon(1e-14));

        adam_step(params, {Tensor::scalar(g_model)}, state, cfg);

        m = 0.9 * m + 0.1 * g_ref;
        v = 0.999 * v + 0.001 * g_ref * g_ref;
        const double mhat = m / (1.0 - std::pow(0.9, t));
        const double vhat = v / (1.0 - std::pow(0.999, t));
        ref -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        REQUIRE(params.at("w").data[0] == doctest::Approx(ref).epsilon(1e-14));
    }
}

TEST_CASE("adam rejects mismatched or non-finite gradients") {
    ParamSet params = one_scalar(0.0);
    AdamState state = AdamState::init(params);
    AdamConfig cfg;
    CHECK_THROWS_AS(adam_step(params, {}, state, cfg), ShapeMismatchError);
    CHECK_THROWS_AS(adam_step(params, {Tensor::zeros({2})}, state, cfg), ShapeMismatchError);
    CHECK_THROWS_AS(adam_step(params, {Tensor::scalar(NAN)}, state, cfg), NonFiniteError);
    AdamConfig bad = cfg;
    bad.lr = 0.0;
    CHECK_THROWS_AS(adam_step(params, {Tensor::scalar(1.0)}, state, bad), InvalidConfigError);
}

TEST_CASE("ema follows the closed form for constant parameters") {
    ParamSet params = one_scalar(2.0);
    std::vector<Tensor> shadow{Tensor::scalar(0.0)};
    const double momentum = 0.9;
    for (int n = 1; n <= 12; ++n) {
        ema_update(shadow, params, momentum);
        // shadow_n = m^n * s0 + (1 - m^n) * p with s0 = 0.
        const double want = (1.0 - std::pow(momentum, n)) * 2.0;
        REQUIRE(shadow[0].data[0] == doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("ema init copies the current parameters") {
    ParamSet params;
    params.add("a", Tensor{{2}, {1.5, -2.5}});
    const std::vector<Tensor> shadow = ema_init(params);
    REQUIRE(shadow.size() == 1);
    CHECK(shadow[0].data == std::vector<double>{1.5, -2.5});
    CHECK_THROWS_AS(
        [&] {
            std::vector<Tensor> bad;
            ema_update(bad, params, 0.9);
        }(),
        ShapeMismatchError);
}
