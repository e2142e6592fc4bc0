#include "evsamp/model.hpp"

#include <algorithm>
#include <cmath>

#include "evsamp/rng.hpp"

namespace evs {

std::string_view to_string(EmbedArm arm) {
    switch (arm) {
        case EmbedArm::arsnn: return "arsnn";
        case EmbedArm::rsnn: return "rsnn";
        case EmbedArm::snn: return "snn";
        case EmbedArm::count: return "count";
    }
    return "?";
}

EmbedArm embed_arm_from(std::string_view name) {
    if (name == "arsnn") return EmbedArm::arsnn;
    if (name == "rsnn") return EmbedArm::rsnn;
    if (name == "snn") return EmbedArm::snn;
    if (name == "count") return EmbedArm::count;
    throw InvalidConfigError("unknown embedding arm: " + std::string(name));
}

void HeadConfig::validate() const {
    if (channels < 1) throw InvalidConfigError("head: channels must be >= 1");
    if (kernel < 1 || kernel % 2 == 0) throw InvalidConfigError("head: kernel must be odd");
    if (!(theta > 0.0)) throw InvalidConfigError("head: threshold must be positive");
    if (!(dt_over_tau > 0.0 && dt_over_tau <= 1.0)) {
        throw InvalidConfigError("head: dt_over_tau must lie in (0, 1]");
    }
    surrogate.validate();
}

void ModelConfig::validate() const {
    if (slot_count < 1) throw InvalidConfigError("model: slot_count must be >= 1");
    head.validate();
    if (uses_sampler()) {
        sampler.validate();
        const SamplerMode want = arm == EmbedArm::snn ? SamplerMode::snn
                                 : arm == EmbedArm::rsnn ? SamplerMode::rsnn
                                                         : SamplerMode::arsnn;
        if (sampler.mode != want) {
            throw InvalidConfigError("model: sampler mode does not match the embedding arm");
        }
    }
}

namespace {

Tensor uniform_tensor(Rng& rng, std::vector<int> shape, double bound) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

// Two constant channels holding normalized x and y coordinates in [-1, 1].
Tensor coord_channels(int h, int w) {
    Tensor t = Tensor::zeros({2, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            t.data[static_cast<std::size_t>(y) * w + x] =
                w > 1 ? 2.0 * x / (w - 1) - 1.0 : 0.0;
            t.data[static_cast<std::size_t>(h) * w + static_cast<std::size_t>(y) * w + x] =
                h > 1 ? 2.0 * y / (h - 1) - 1.0 : 0.0;
        }
    }
    return t;
}

double sigmoid_scalar(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Count-arm slot k sums raw frames over steps (k*T/K, (k+1)*T/K].
std::vector<Tensor> count_partition(const FrameSequence& frames, int slot_count) {
    const int t_steps = frames.step_count;
    const int h = frames.frames[0].height;
    const int w = frames.frames[0].width;
    std::vector<Tensor> slots;
    for (int k = 0; k < slot_count; ++k) {
        const int lo = k * t_steps / slot_count + 1;
        const int hi = (k + 1) * t_steps / slot_count;
        Tensor slot = Tensor::zeros({2, h, w});
        for (int t = lo; t <= hi; ++t) {
            const std::vector<double>& src = frames.frames[static_cast<std::size_t>(t - 1)].data;
            for (std::size_t i = 0; i < slot.data.size(); ++i) slot.data[i] += src[i];
        }
        slots.push_back(std::move(slot));
    }
    return slots;
}

}  // namespace

ParamSet init_model_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ParamSet params;
    if (cfg.uses_sampler()) {
        params = init_sampler_params(cfg.sampler, seed);
    }
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    const int k = cfg.head.kernel;
    const int c1 = cfg.head.channels;
    const double bound1 = 1.0 / std::sqrt(4.0 * k * k);
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(c1) * k * k);
    params.add("head.w1", uniform_tensor(rng, {c1, 4, k, k}, bound1));
    params.add("head.b1", Tensor::zeros({c1}));
    params.add("head.w2", uniform_tensor(rng, {5, c1, k, k}, bound2));
    params.add("head.b2", Tensor::zeros({5}));
    return params;
}

ForwardResult model_forward(Tape& tape, const BoundParams& bound, const ModelConfig& cfg,
                            const FrameSequence& frames) {
    cfg.validate();
    if (frames.frames.empty()) throw InvalidWindowError("model needs at least one frame");
    const int h = frames.frames[0].height;
    const int w = frames.frames[0].width;

    ForwardResult result;
    std::vector<ValueId> slot_ids;
    if (cfg.uses_sampler()) {
        SamplerTapeRefs refs;
        result.trace = sampler_forward(tape, bound, frames, cfg.sampler, &refs);
        if (cfg.arm == EmbedArm::arsnn) {
            result.windows = extract_windows(result.trace);
            result.embedding = aggregate_windows(tape, result.trace, refs, result.windows,
                                                 cfg.rpd, cfg.sat, cfg.slot_count, &slot_ids);
        } else {
            result.embedding =
                fixed_partition_embedding(tape, result.trace, refs, cfg.slot_count, &slot_ids);
        }
    } else {
        std::vector<Tensor> slots = count_partition(frames, cfg.slot_count);
        result.embedding.slot_count = cfg.slot_count;
        result.embedding.step_count = frames.step_count;
        result.embedding.t_start = frames.t_start;
        result.embedding.slice_us = frames.slice_us;
        for (Tensor& slot : slots) {
            result.embedding.slots.push_back(slot);
            slot_ids.push_back(tape.input(std::move(slot)));
        }
    }

    tape.set_scope("head");
    const ValueId coords = tape.input(coord_channels(h, w));
    const ValueId w1 = bound.at("head.w1");
    const ValueId b1 = bound.at("head.b1");
    const ValueId w2 = bound.at("head.w2");
    const ValueId b2 = bound.at("head.b2");

    // Sampler slots hold potential sums, which grow with the number of
    // contributing steps; rescaling to the reference step count keeps the
    // head input scale stable when the same model runs at another frame
    // granularity. Count slots already hold granularity-invariant totals.
    constexpr double kReferenceSteps = 8.0;
    const double slot_scale =
        cfg.uses_sampler() ? kReferenceSteps / static_cast<double>(frames.step_count) : 1.0;

    const double r = cfg.head.dt_over_tau;
    const int c1 = cfg.head.channels;
    ValueId v_prev = -1;
    ValueId acc = -1;
    for (ValueId raw_slot : slot_ids) {
        const ValueId slot = tape.lincomb(slot_scale, raw_slot, 0.0, raw_slot);
        tape.set_scope("head.conv1");
        const ValueId pre = tape.conv2d(tape.concat2(slot, coords), w1, b1);
        tape.set_scope("head");
        ValueId feat;
        if (cfg.head.spiking) {
            if (v_prev < 0) v_prev = tape.input(Tensor::zeros({c1, h, w}));
            const ValueId u = tape.lincomb(1.0 - r, v_prev, r, pre);
            const ValueId s = tape.threshold(u, cfg.head.theta, cfg.head.surrogate);
            v_prev = tape.lincomb(1.0, u, -cfg.head.theta, s);  // soft reset
            feat = s;
        } else {
            feat = tape.relu(pre);
        }
        tape.set_scope("head.conv2");
        const ValueId out = tape.conv2d(feat, w2, b2, cfg.head.spiking);
        tape.set_scope("head");
        acc = acc < 0 ? out : tape.add(acc, out);
    }
    result.logits = tape.global_avg_pool(acc);
    tape.set_scope("");
    return result;
}

Prediction predict_from_logits(const Tensor& logits, int width, int height) {
    if (logits.data.size() != 5) throw ShapeMismatchError("expected 5 logits");
    Prediction p;
    p.objectness = sigmoid_scalar(logits.data[0]);
    p.cx = sigmoid_scalar(logits.data[1]) * width;
    p.cy = sigmoid_scalar(logits.data[2]) * height;
    p.w = sigmoid_scalar(logits.data[3]) * width;
    p.h = sigmoid_scalar(logits.data[4]) * height;
    return p;
}

std::array<double, 5> detection_target(const ToyAnnotation& ann, int width, int height) {
    if (ann.label < 0) return {0.0, 0.5, 0.5, 0.0, 0.0};
    return {1.0, ann.cx / width, ann.cy / height, ann.w / width, ann.h / height};
}

}  // namespace evs
