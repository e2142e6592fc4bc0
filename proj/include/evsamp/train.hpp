#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evsamp/checkpoint.hpp"
#include "evsamp/metrics.hpp"

namespace evs {

struct TrainConfig {
    int steps = 300;
    int batch = 8;
    double lr = 1e-3;
    double ema_momentum = 0.9999;
    std::uint64_t seed = 0;  // parameter init and batch order
    int t_m = 8;
    int eval_every = 100;   // 0 disables mid-run evaluation
    int eval_subset = 100;  // streams used for mid-run evaluation
    int threads = 1;

    void validate() const;
};

struct TrainLogEntry {
    int step = 0;
    double loss = 0.0;  // batch mean
    bool has_eval = false;
    double eval_accuracy = 0.0;
    double eval_iou = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<TrainLogEntry> log;
    EvalResult final_eval;
};

// Deterministic training: batch streams are drawn by a seed-fixed order,
// per-stream gradients are summed in draw order and averaged, then one Adam
// step plus an EMA shadow update. Evaluation uses the raw weights.
TrainResult train_model(const ModelConfig& cfg, const TrainConfig& tcfg,
                        const std::vector<SceneConfig>& train_set,
                        const std::vector<SceneConfig>& eval_set);

// One line-delimited record per log entry, stable field order.
std::string metrics_jsonl(const std::vector<TrainLogEntry>& log);

// Human-readable run summary table.
std::string summary_table(const ModelConfig& cfg, const TrainConfig& tcfg,
                          const TrainResult& result);

}  // namespace evs
