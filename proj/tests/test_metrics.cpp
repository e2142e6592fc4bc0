#include <doctest.h>

#include "evsamp/metrics.hpp"

using namespace evs;

namespace {

ModelConfig tiny_model() {
    ModelConfig cfg;
    cfg.arm = EmbedArm::count;
    cfg.slot_count = 2;
    cfg.head.channels = 3;
    return cfg;
}

SceneConfig tiny_scene() {
    SceneConfig scene;
    scene.width = 12;
    scene.height = 12;
    scene.shape_size = 4;
    scene.duration_steps = 16;
    scene.noise_rate = 0.001;
    return scene;
}

}  // namespace

TEST_CASE("iou hand geometry") {
    // Unit example: 4x4 boxes centered at x=0 and x=2 overlap on a 2x4 strip.
    const BoxPx a{0.0, 0.0, 4.0, 4.0};
    const BoxPx b{2.0, 0.0, 4.0, 4.0};
    CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(iou(b, a) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(iou(a, BoxPx{10.0, 10.0, 2.0, 2.0}) == 0.0);
    CHECK(iou(a, BoxPx{1.0, 1.0, 0.0, 2.0}) == 0.0);  // empty box
}

TEST_CASE("iou bounded and symmetric on random boxes") {
    for (int i = 0; i < 50; ++i) {
        const double f = static_cast<double>(i);
        const BoxPx a{f * 0.37, f * 0.21, 1.0 + f * 0.1, 2.0 + f * 0.05};
        const BoxPx b{f * 0.15, f * 0.33, 2.0, 1.5};
        const double ab = iou(a, b);
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        CHECK(ab == doctest::Approx(iou(b, a)).epsilon(1e-14));
    }
}

TEST_CASE("dataset scenes derive consecutive seeds") {
    const std::vector<SceneConfig> scenes = dataset_scenes(tiny_scene(), 700, 5);
    REQUIRE(scenes.size() == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(scenes[static_cast<std::size_t>(i)].seed == 700u + static_cast<std::uint64_t>(i));
    }
}

TEST_CASE("evaluate scores bounded metrics and rejects empty sets") {
    const ModelConfig cfg = tiny_model();
    const ParamSet params = init_model_params(cfg, 2);
    const std::vector<SceneConfig> test = dataset_scenes(tiny_scene(), 100, 12);
    const EvalResult r = evaluate(cfg, params, test, 4);
    CHECK(r.count == 12);
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 1.0);
    CHECK(r.mean_iou >= 0.0);
    CHECK(r.mean_iou <= 1.0);
    CHECK_THROWS_AS(evaluate(cfg, params, {}, 4), EmptyTestSetError);
}

TEST_CASE("threaded evaluation equals serial evaluation") {
    const ModelConfig cfg = tiny_model();
    const ParamSet params = init_model_params(cfg, 5);
    const std::vector<SceneConfig> test = dataset_scenes(tiny_scene(), 300, 9);
    const EvalResult serial = evaluate(cfg, params, test, 4, 1);
    const EvalResult threaded = evaluate(cfg, params, test, 4, 3);
    CHECK(serial.accuracy == threaded.accuracy);
    CHECK(serial.mean_iou == threaded.mean_iou);
}

TEST_CASE("robustness probe evaluates each granularity and matches evaluate") {
    const ModelConfig cfg = tiny_model();
    const ParamSet params = init_model_params(cfg, 6);
    const std::vector<SceneConfig> test = dataset_scenes(tiny_scene(), 400, 6);
    const auto table = tm_robustness_probe(cfg, params, test, {4, 8});
    REQUIRE(table.size() == 2);
    CHECK(table[0].first == 4);
    const EvalResult direct = evaluate(cfg, params, test, 4);
    CHECK(table[0].second.accuracy == direct.accuracy);
    CHECK(table[0].second.mean_iou == direct.mean_iou);
}
