#include "evsamp/metrics.hpp"

#include <algorithm>
#include <thread>

namespace evs {

double iou(const BoxPx& a, const BoxPx& b) {
    if (a.w <= 0.0 || a.h <= 0.0 || b.w <= 0.0 || b.h <= 0.0) return 0.0;
    const double ax0 = a.cx - a.w / 2, ax1 = a.cx + a.w / 2;
    const double ay0 = a.cy - a.h / 2, ay1 = a.cy + a.h / 2;
    const double bx0 = b.cx - b.w / 2, bx1 = b.cx + b.w / 2;
    const double by0 = b.cy - b.h / 2, by1 = b.cy + b.h / 2;
    const double iw = std::min(ax1, bx1) - std::max(ax0, bx0);
    const double ih = std::min(ay1, by1) - std::max(ay0, by0);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.w * a.h + b.w * b.h - inter;
    return inter / uni;
}

std::vector<SceneConfig> dataset_scenes(const SceneConfig& base, std::uint64_t seed_base,
                                        int count) {
    if (count < 0) throw InvalidConfigError("dataset: count must be >= 0");
    std::vector<SceneConfig> scenes(static_cast<std::size_t>(count), base);
    for (int i = 0; i < count; ++i) {
        scenes[static_cast<std::size_t>(i)].seed = seed_base + static_cast<std::uint64_t>(i);
    }
    return scenes;
}

namespace {

struct StreamScore {
    double iou_val = 0.0;
    bool hit = false;
};

StreamScore score_stream(const ModelConfig& cfg, const ParamSet& params,
                         const SceneConfig& scene, int t_m, double iou_threshold) {
    const auto [stream, ann] = gen_synthetic(scene);
    const FrameSequence frames =
        early_aggregate(stream, scene.duration_us(), scene.duration_us(), t_m);
    Tape tape;
    const BoundParams bound = bind_params(tape, params);
    const ForwardResult fwd = model_forward(tape, bound, cfg, frames);
    const Prediction pred =
        predict_from_logits(tape.value(fwd.logits), scene.width, scene.height);
    StreamScore score;
    score.iou_val = iou(BoxPx{pred.cx, pred.cy, pred.w, pred.h},
                        BoxPx{ann.cx, ann.cy, ann.w, ann.h});
    score.hit = score.iou_val >= iou_threshold && pred.objectness >= 0.5;
    return score;
}

}  // namespace

EvalResult evaluate(const ModelConfig& cfg, const ParamSet& params,
                    const std::vector<SceneConfig>& test, int t_m, int threads,
                    double iou_threshold) {
    if (test.empty()) throw EmptyTestSetError("evaluation needs at least one stream");
    if (t_m < 1) throw InvalidConfigError("evaluate: t_m must be >= 1");
    if (threads < 1) threads = 1;

    std::vector<StreamScore> scores(test.size());
    const int workers = std::min<int>(threads, static_cast<int>(test.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < test.size(); ++i) {
            scores[i] = score_stream(cfg, params, test[i], t_m, iou_threshold);
        }
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = static_cast<std::size_t>(w); i < test.size();
                     i += static_cast<std::size_t>(workers)) {
                    scores[i] = score_stream(cfg, params, test[i], t_m, iou_threshold);
                }
            });
        }
        for (std::thread& th : pool) th.join();
    }

    EvalResult result;
    result.count = test.size();
    for (const StreamScore& s : scores) {
        result.mean_iou += s.iou_val;
        result.accuracy += s.hit ? 1.0 : 0.0;
    }
    result.mean_iou /= static_cast<double>(test.size());
    result.accuracy /= static_cast<double>(test.size());
    return result;
}

std::vector<std::pair<int, EvalResult>> tm_robustness_probe(const ModelConfig& cfg,
                                                            const ParamSet& params,
                                                            const std::vector<SceneConfig>& test,
                                                            const std::vector<int>& t_m_list,
                                                            int threads) {
    std::vector<std::pair<int, EvalResult>> table;
    table.reserve(t_m_list.size());
    for (int t_m : t_m_list) {
        table.emplace_back(t_m, evaluate(cfg, params, test, t_m, threads));
    }
    return table;
}

}  // namespace evs
