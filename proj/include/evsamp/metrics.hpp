#pragma once

#include <cstdint>
#include <vector>

#include "evsamp/model.hpp"

namespace evs {

struct BoxPx {
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
};

// Intersection over union of center-format boxes; 0 when either is empty.
double iou(const BoxPx& a, const BoxPx& b);

struct EvalResult {
    double accuracy = 0.0;  // IoU >= threshold and objectness >= 0.5
    double mean_iou = 0.0;
    std::size_t count = 0;
};

// Derived per-stream scene configs: scenes()[i] is the base with seed
// seed_base + i, so datasets are fully determined by (base, seed_base, n).
std::vector<SceneConfig> dataset_scenes(const SceneConfig& base, std::uint64_t seed_base,
                                        int count);

// Generates each test stream, runs the full pipeline at t_m count frames,
// and scores predictions against the end-of-stream annotation. threads > 1
// splits the streams across workers; results merge in stream order.
EvalResult evaluate(const ModelConfig& cfg, const ParamSet& params,
                    const std::vector<SceneConfig>& test, int t_m, int threads = 1,
                    double iou_threshold = 0.5);

// The same model evaluated at several frame granularities.
std::vector<std::pair<int, EvalResult>> tm_robustness_probe(const ModelConfig& cfg,
                                                            const ParamSet& params,
                                                            const std::vector<SceneConfig>& test,
                                                            const std::vector<int>& t_m_list,
                                                            int threads = 1);

}  // namespace evs
