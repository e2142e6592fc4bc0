#include "evsamp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evsamp/model.hpp"
#include "evsamp/rng.hpp"

namespace evs {

namespace {

double support_radius(const SurrogateSpec& spec) {
    switch (spec.kind) {
        case SurrogateKind::triangular:
        case SurrogateKind::rectangular:
            return spec.alpha;
        case SurrogateKind::atan:
            return std::numeric_limits<double>::infinity();
    }
    return std::numeric_limits<double>::infinity();
}

struct Probe {
    double loss = 0.0;
    std::uint64_t spike_sig = 0;
    double min_margin = std::numeric_limits<double>::infinity();
};

// Runs the builder and fingerprints every threshold op: FNV-1a over the
// output bits plus the tightest distance to the surrogate support edge.
Probe probe_forward(const ParamSet& params, const LossBuilder& build) {
    Tape tape;
    const ValueId loss_id = build(tape, params);
    Probe probe;
    probe.loss = tape.value(loss_id).data[0];
    std::uint64_t h = 1469598103934665603ull;
    for (const TapeOp& op : tape.ops()) {
        if (op.kind != OpKind::threshold) continue;
        const auto& at = std::get<ThresholdAttrs>(op.attrs);
        const double support = support_radius(at.surrogate);
        const Tensor& u = tape.value(op.inputs[0]);
        const Tensor& s = tape.value(op.out);
        for (std::size_t i = 0; i < s.size(); ++i) {
            h ^= static_cast<std::uint64_t>(s.data[i] != 0.0) + 0x100;
            h *= 1099511628211ull;
            probe.min_margin = std::min(probe.min_margin,
                                        std::abs(u.data[i] - at.theta) - support);
        }
    }
    probe.spike_sig = h;
    return probe;
}

}  // namespace

FdReport finite_diff_check(const ParamSet& params, const LossBuilder& build,
                           const FdOptions& opts) {
    if (!(opts.eps > 0.0)) throw InvalidConfigError("gradcheck: eps must be positive");
    ParamSet work = params;

    GradientSet analytic;
    {
        Tape tape;
        const ValueId loss_id = build(tape, work);
        analytic = tape.backward(loss_id);
    }
    const Probe base = probe_forward(work, build);

    FdReport report;
    report.base_loss = base.loss;
    report.min_margin = base.min_margin;
    report.margin_ok = base.min_margin > opts.margin_guard;
    if (!report.margin_ok) return report;

    for (std::size_t pi = 0; pi < work.items.size(); ++pi) {
        Tensor& p = work.items[pi].second;
        const Tensor& g = analytic.grads[pi].second;
        const std::size_t size = p.data.size();
        const int n_coords =
            opts.coords_per_param < 0
                ? static_cast<int>(size)
                : std::min<int>(opts.coords_per_param, static_cast<int>(size));
        for (int ci = 0; ci < n_coords; ++ci) {
            const std::size_t j = size * static_cast<std::size_t>(ci) /
                                  static_cast<std::size_t>(n_coords);
            const double saved = p.data[j];
            p.data[j] = saved + opts.eps;
            const Probe plus = probe_forward(work, build);
            p.data[j] = saved - opts.eps;
            const Probe minus = probe_forward(work, build);
            p.data[j] = saved;

            if (plus.spike_sig != base.spike_sig || minus.spike_sig != base.spike_sig) {
                ++report.skipped;
                continue;
            }
            const double fd = (plus.loss - minus.loss) / (2.0 * opts.eps);
            const double an = g.data[j];
            const double denom = std::max({std::abs(fd), std::abs(an), opts.rel_floor});
            report.max_rel_err = std::max(report.max_rel_err, std::abs(fd - an) / denom);
            ++report.checked;
        }
    }
    return report;
}

FdReport model_gradcheck(std::string_view arm, bool rpd, std::uint64_t seed,
                         const FdOptions& opts) {
    ModelConfig cfg;
    cfg.arm = embed_arm_from(arm);
    cfg.rpd = rpd;
    cfg.sat = true;
    cfg.slot_count = 2;
    cfg.sampler.mode = cfg.arm == EmbedArm::snn    ? SamplerMode::snn
                       : cfg.arm == EmbedArm::rsnn ? SamplerMode::rsnn
                                                   : SamplerMode::arsnn;
    cfg.sampler.surrogate = {SurrogateKind::triangular, 0.05};
    cfg.head.channels = 4;
    cfg.head.surrogate = {SurrogateKind::triangular, 0.05};

    constexpr int kSide = 3, kSteps = 4, kAttempts = 200;
    FdReport report;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        const std::uint64_t sub = seed * 0x100000001b3ull + static_cast<std::uint64_t>(attempt);
        Rng rng(sub);
        FrameSequence frames;
        frames.step_count = kSteps;
        frames.slice_us = 1000;
        for (int t = 0; t < kSteps; ++t) {
            FrameTensor f = FrameTensor::zeros(2, kSide, kSide);
            f.t_start = static_cast<std::uint64_t>(t) * 1000;
            f.t_end = f.t_start + 1000;
            for (double& v : f.data) v = static_cast<double>(rng.below(4));
            frames.frames.push_back(std::move(f));
        }
        const ParamSet params = init_model_params(cfg, sub ^ 0x2545f4914f6cdd1dull);
        LossAttrs loss_attrs;
        loss_attrs.target = {1.0, rng.uniform01(), rng.uniform01(), rng.uniform01(),
                             rng.uniform01()};
        const LossBuilder build = [&](Tape& tape, const ParamSet& p) {
            const BoundParams bound = bind_params(tape, p);
            const ForwardResult fwd = model_forward(tape, bound, cfg, frames);
            return tape.detection_loss(fwd.logits, loss_attrs);
        };
        report = finite_diff_check(params, build, opts);
        if (report.margin_ok && !report.all_unstable()) return report;
    }
    return report;
}

SatFactorCase sat_gradient_factor_check(std::uint64_t seed) {
    Rng rng(seed);
    const int steps = 3 + static_cast<int>(rng.below(4));
    const double theta = 1.0;
    const SurrogateSpec surrogate{SurrogateKind::triangular, 0.5 + rng.uniform01()};

    // Sub-threshold filler potentials, then a closing value that fires; some
    // draws land past the surrogate support so the factor collapses to 1.
    std::vector<double> u(static_cast<std::size_t>(steps));
    for (int t = 0; t + 1 < steps; ++t) u[static_cast<std::size_t>(t)] = rng.uniform(-0.5, 0.9);
    u[static_cast<std::size_t>(steps - 1)] = theta + rng.uniform01() * 1.2 * surrogate.alpha;

    const auto run = [&](bool sat) {
        Tape tape;
        std::vector<ValueId> pots, spikes;
        for (int t = 0; t < steps; ++t) {
            const ValueId uid = tape.param("u" + std::to_string(t),
                                           Tensor{{1, 1, 1}, {u[static_cast<std::size_t>(t)]}});
            pots.push_back(uid);
            spikes.push_back(tape.threshold(uid, theta, surrogate));
        }
        const ValueId slot = tape.slot_aggregate(
            pots, spikes, sat,
            {AggSpan{0, 1, static_cast<std::int16_t>(steps), static_cast<std::int16_t>(steps)}});
        GradientSet grads = tape.backward(tape.reduce_sum(slot));
        return grads.grads.back().second.data[0];  // d loss / d u_close
    };

    SatFactorCase result;
    result.u_close = u.back();
    for (double v : u) result.window_sum += v;
    const double g_plain = run(false);
    const double g_sat = run(true);
    result.ratio_measured = g_sat / g_plain;
    result.ratio_expected =
        1.0 + result.window_sum * surrogate_eval(surrogate, result.u_close - theta);
    return result;
}

}  // namespace evs
