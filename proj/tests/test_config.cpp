#include <doctest.h>

#include "evsamp/config.hpp"

using namespace evs;

TEST_CASE("config emit then parse round-trips byte for byte") {
    RunConfig cfg;
    cfg.scene.width = 24;
    cfg.scene.noise_rate = 0.0035;
    cfg.model.arm = EmbedArm::rsnn;
    cfg.model.sampler.mode = SamplerMode::rsnn;
    cfg.train.lr = 2.5e-4;
    cfg.train.seed = 42;
    cfg.out_dir = "runs/demo";

    const std::string text = emit_run_config(cfg);
    const RunConfig back = parse_run_config(text);
    CHECK(emit_run_config(back) == text);
    CHECK(back.scene.width == 24);
    CHECK(back.scene.noise_rate == cfg.scene.noise_rate);
    CHECK(back.model.arm == EmbedArm::rsnn);
    CHECK(back.model.sampler.mode == SamplerMode::rsnn);
    CHECK(back.train.lr == cfg.train.lr);
    CHECK(back.out_dir == "runs/demo");
}

TEST_CASE("config parser handles comments blanks and spacing") {
    const char* text =
        "# experiment\n"
        "[scene]\n"
        "  width = 16   # inline comment\n"
        "\n"
        "height=16\n"
        "[train]\n"
        "steps = 12\n";
    const RunConfig cfg = parse_run_config(text);
    CHECK(cfg.scene.width == 16);
    CHECK(cfg.scene.height == 16);
    CHECK(cfg.train.steps == 12);
    // Untouched fields keep their defaults.
    CHECK(cfg.train.batch == 8);
}

TEST_CASE("arm assignment drives the sampler mode") {
    RunConfig cfg = parse_run_config("[model]\narm = snn\n");
    CHECK(cfg.model.arm == EmbedArm::snn);
    CHECK(cfg.model.sampler.mode == SamplerMode::snn);
    cfg = parse_run_config("[model]\narm = count\n");
    CHECK(cfg.model.arm == EmbedArm::count);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("overrides apply dotted assignments") {
    RunConfig cfg;
    apply_override(cfg, "train.lr=0.01");
    apply_override(cfg, "scene.kind=bar");
    apply_override(cfg, "output.dir=elsewhere");
    CHECK(cfg.train.lr == 0.01);
    CHECK(cfg.scene.kind == ShapeKind::bar);
    CHECK(cfg.out_dir == "elsewhere");
    CHECK_THROWS_AS(apply_override(cfg, "nonsense"), InvalidConfigError);
    CHECK_THROWS_AS(apply_override(cfg, "lr=0.1"), InvalidConfigError);
}

TEST_CASE("config errors name the offending key") {
    CHECK_THROWS_AS(parse_run_config("[scene]\nwobble = 3\n"), InvalidConfigError);
    CHECK_THROWS_AS(parse_run_config("[nowhere]\nx = 1\n"), InvalidConfigError);
    CHECK_THROWS_AS(parse_run_config("width = 3\n"), InvalidConfigError);
    CHECK_THROWS_AS(parse_run_config("[scene]\nwidth == 3\n"), InvalidConfigError);
    CHECK_THROWS_AS(parse_run_config("[train]\nlr = fast\n"), InvalidConfigError);
}

TEST_CASE("validation walks into nested configs") {
    RunConfig cfg;
    cfg.train_count = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfigError);
    cfg = RunConfig{};
    cfg.scene.noise_rate = 2.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfigError);
    cfg = RunConfig{};
    CHECK_NOTHROW(cfg.validate());
}
