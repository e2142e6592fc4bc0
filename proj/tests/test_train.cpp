#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "evsamp/config.hpp"
#include "evsamp/train.hpp"

using namespace evs;

namespace {

RunConfig tiny_run() {
    RunConfig cfg;
    cfg.scene.width = 12;
    cfg.scene.height = 12;
    cfg.scene.shape_size = 4;
    cfg.scene.duration_steps = 16;
    cfg.scene.noise_rate = 0.001;
    cfg.model.arm = EmbedArm::count;
    cfg.model.slot_count = 2;
    cfg.model.head.channels = 3;
    cfg.train.steps = 6;
    cfg.train.batch = 2;
    cfg.train.t_m = 4;
    cfg.train.eval_every = 3;
    cfg.train.eval_subset = 4;
    cfg.train_count = 10;
    cfg.test_count = 6;
    return cfg;
}

std::vector<std::uint8_t> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("training is bitwise deterministic across runs") {
    const RunConfig cfg = tiny_run();
    const auto run = [&] {
        return train_model(cfg.model, cfg.train, cfg.train_scenes(), cfg.test_scenes());
    };
    const TrainResult a = run();
    const TrainResult b = run();

    CHECK(metrics_jsonl(a.log) == metrics_jsonl(b.log));
    CHECK(a.final_eval.accuracy == b.final_eval.accuracy);
    CHECK(a.final_eval.mean_iou == b.final_eval.mean_iou);

    const std::string p1 = "/tmp/evsamp_train_a.ckpt";
    const std::string p2 = "/tmp/evsamp_train_b.ckpt";
    save_checkpoint(p1, a.checkpoint);
    save_checkpoint(p2, b.checkpoint);
    CHECK(slurp(p1) == slurp(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("training produces finite losses and full state") {
    const RunConfig cfg = tiny_run();
    const TrainResult r =
        train_model(cfg.model, cfg.train, cfg.train_scenes(), cfg.test_scenes());
    REQUIRE(r.log.size() == 6);
    for (const TrainLogEntry& e : r.log) {
        CHECK(std::isfinite(e.loss));
        CHECK(e.loss >= 0.0);
    }
    CHECK(r.log[2].has_eval);
    CHECK(!r.log[3].has_eval);
    CHECK(r.checkpoint.train_step == 6);
    CHECK(r.checkpoint.has_adam);
    CHECK(r.checkpoint.adam.step == 6);
    CHECK(r.checkpoint.has_ema);
    CHECK(r.final_eval.count == 6);

    const std::string jsonl = metrics_jsonl(r.log);
    CHECK(jsonl.find("\"step\":1,") != std::string::npos);
    CHECK(jsonl.find("\"eval_accuracy\"") != std::string::npos);
    const std::string summary = summary_table(cfg.model, cfg.train, r);
    CHECK(summary.find("arm=count") != std::string::npos);
}

TEST_CASE("loss trends down on an easy task") {
    RunConfig cfg = tiny_run();
    cfg.train.steps = 40;
    cfg.train.batch = 4;
    cfg.train.lr = 3e-3;
    cfg.train.eval_every = 0;
    const TrainResult r = train_model(cfg.model, cfg.train, cfg.train_scenes(), {});
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 5; ++i) {
        head += r.log[static_cast<std::size_t>(i)].loss;
        tail += r.log[r.log.size() - 1 - static_cast<std::size_t>(i)].loss;
    }
    CHECK(tail < head);
}

TEST_CASE("train rejects empty datasets and bad configs") {
    const RunConfig cfg = tiny_run();
    CHECK_THROWS_AS(train_model(cfg.model, cfg.train, {}, {}), EmptyTestSetError);
    TrainConfig bad = cfg.train;
    bad.steps = 0;
    CHECK_THROWS_AS(train_model(cfg.model, bad, cfg.train_scenes(), {}), InvalidConfigError);
}
