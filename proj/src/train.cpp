#include "evsamp/train.hpp"

#include <cmath>
#include <cstdio>

#include "evsamp/rng.hpp"

namespace evs {

void TrainConfig::validate() const {
    if (steps < 1) throw InvalidConfigError("train: steps must be >= 1");
    if (batch < 1) throw InvalidConfigError("train: batch must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidConfigError("train: lr must be positive");
    if (ema_momentum < 0.0 || ema_momentum >= 1.0) {
        throw InvalidConfigError("train: ema_momentum must lie in [0, 1)");
    }
    if (t_m < 1) throw InvalidConfigError("train: t_m must be >= 1");
    if (eval_every < 0 || eval_subset < 0) {
        throw InvalidConfigError("train: eval cadence must be >= 0");
    }
}

namespace {

// Loss and per-parameter gradients for one stream.
GradientSet stream_gradients(const ModelConfig& cfg, const ParamSet& params,
                             const SceneConfig& scene, int t_m) {
    const auto [stream, ann] = gen_synthetic(scene);
    const FrameSequence frames =
        early_aggregate(stream, scene.duration_us(), scene.duration_us(), t_m);
    Tape tape;
    const BoundParams bound = bind_params(tape, params);
    const ForwardResult fwd = model_forward(tape, bound, cfg, frames);
    LossAttrs attrs;
    attrs.target = detection_target(ann, scene.width, scene.height);
    // Objectness converges almost immediately; the box terms carry the real
    // work, so they get the weight.
    attrs.box_weight = 8.0;
    const ValueId loss = tape.detection_loss(fwd.logits, attrs);
    return tape.backward(loss);
}

}  // namespace

TrainResult train_model(const ModelConfig& cfg, const TrainConfig& tcfg,
                        const std::vector<SceneConfig>& train_set,
                        const std::vector<SceneConfig>& eval_set) {
    cfg.validate();
    tcfg.validate();
    if (train_set.empty()) throw EmptyTestSetError("training needs at least one stream");

    ParamSet params = init_model_params(cfg, tcfg.seed);
    AdamState adam = AdamState::init(params);
    AdamConfig adam_cfg;
    adam_cfg.lr = tcfg.lr;
    std::vector<Tensor> ema = ema_init(params);
    Rng order_rng(tcfg.seed ^ 0xda3e39cb94b95bdbull);

    TrainResult result;
    for (int step = 1; step <= tcfg.steps; ++step) {
        std::vector<Tensor> batch_grads;
        for (const auto& [name, value] : params.items) {
            batch_grads.push_back(Tensor::zeros(value.shape));
        }
        double batch_loss = 0.0;
        for (int b = 0; b < tcfg.batch; ++b) {
            const std::size_t idx =
                order_rng.below(static_cast<std::uint32_t>(train_set.size()));
            const GradientSet grads = stream_gradients(cfg, params, train_set[idx], tcfg.t_m);
            batch_loss += grads.loss;
            for (std::size_t i = 0; i < batch_grads.size(); ++i) {
                const Tensor& g = grads.grads[i].second;
                for (std::size_t j = 0; j < g.data.size(); ++j) {
                    batch_grads[i].data[j] += g.data[j];
                }
            }
        }
        const double inv = 1.0 / tcfg.batch;
        for (Tensor& g : batch_grads) {
            for (double& v : g.data) v *= inv;
        }

        // Clipped-norm batch gradient under a cosine-decayed rate; both guard
        // the late phase of small runs against occasional divergence.
        double sq = 0.0;
        for (const Tensor& g : batch_grads) {
            for (double v : g.data) sq += v * v;
        }
        constexpr double kClipNorm = 5.0;
        if (sq > kClipNorm * kClipNorm) {
            const double scale = kClipNorm / std::sqrt(sq);
            for (Tensor& g : batch_grads) {
                for (double& v : g.data) v *= scale;
            }
        }
        const double phase = static_cast<double>(step - 1) / static_cast<double>(tcfg.steps);
        adam_cfg.lr = tcfg.lr * (0.05 + 0.95 * 0.5 * (1.0 + std::cos(3.141592653589793 * phase)));
        adam_step(params, batch_grads, adam, adam_cfg);
        ema_update(ema, params, tcfg.ema_momentum);

        TrainLogEntry entry;
        entry.step = step;
        entry.loss = batch_loss * inv;
        const bool do_eval = tcfg.eval_every > 0 && step % tcfg.eval_every == 0 &&
                             !eval_set.empty() && tcfg.eval_subset > 0;
        if (do_eval) {
            const std::size_t n =
                std::min<std::size_t>(eval_set.size(), static_cast<std::size_t>(tcfg.eval_subset));
            const std::vector<SceneConfig> subset(eval_set.begin(),
                                                  eval_set.begin() + static_cast<std::ptrdiff_t>(n));
            const EvalResult ev = evaluate(cfg, params, subset, tcfg.t_m, tcfg.threads);
            entry.has_eval = true;
            entry.eval_accuracy = ev.accuracy;
            entry.eval_iou = ev.mean_iou;
        }
        result.log.push_back(entry);
    }

    if (!eval_set.empty()) {
        result.final_eval = evaluate(cfg, params, eval_set, tcfg.t_m, tcfg.threads);
    }

    result.checkpoint.train_step = static_cast<std::uint64_t>(tcfg.steps);
    result.checkpoint.params = std::move(params);
    result.checkpoint.has_adam = true;
    result.checkpoint.adam = std::move(adam);
    result.checkpoint.has_ema = true;
    result.checkpoint.ema = std::move(ema);
    return result;
}

std::string metrics_jsonl(const std::vector<TrainLogEntry>& log) {
    std::string out;
    char line[256];
    for (const TrainLogEntry& e : log) {
        if (e.has_eval) {
            std::snprintf(line, sizeof(line),
                          "{\"step\":%d,\"loss\":%.17g,\"eval_accuracy\":%.17g,"
                          "\"eval_iou\":%.17g}\n",
                          e.step, e.loss, e.eval_accuracy, e.eval_iou);
        } else {
            std::snprintf(line, sizeof(line), "{\"step\":%d,\"loss\":%.17g}\n", e.step, e.loss);
        }
        out += line;
    }
    return out;
}

std::string summary_table(const ModelConfig& cfg, const TrainConfig& tcfg,
                          const TrainResult& result) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "arm=%s rpd=%d sat=%d K=%d\n",
                  std::string(to_string(cfg.arm)).c_str(), cfg.arm == EmbedArm::arsnn && cfg.rpd,
                  cfg.arm == EmbedArm::arsnn && cfg.sat, cfg.slot_count);
    out += line;
    std::snprintf(line, sizeof(line), "steps=%d batch=%d lr=%g seed=%llu t_m=%d\n", tcfg.steps,
                  tcfg.batch, tcfg.lr, static_cast<unsigned long long>(tcfg.seed), tcfg.t_m);
    out += line;
    const double last_loss = result.log.empty() ? 0.0 : result.log.back().loss;
    std::snprintf(line, sizeof(line), "final_loss=%.6f\n", last_loss);
    out += line;
    std::snprintf(line, sizeof(line), "eval_accuracy=%.4f eval_mean_iou=%.4f eval_count=%zu\n",
                  result.final_eval.accuracy, result.final_eval.mean_iou,
                  result.final_eval.count);
    out += line;
    return out;
}

}  // namespace evs
