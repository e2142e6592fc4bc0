#include "evsamp/sampler.hpp"

#include <algorithm>
#include <ranges>

#include "evsamp/errors.hpp"
#include "evsamp/rng.hpp"

namespace evs {

namespace {

Tensor frame_to_tensor(const FrameTensor& f) {
    Tensor t;
    t.shape = {f.channels, f.height, f.width};
    t.data = f.data;
    return t;
}

Tensor conv_kernel(Rng& rng, int k) {
    Tensor w = Tensor::zeros({2, 2, k, k});
    const double bound = 1.0 / std::sqrt(2.0 * k * k);
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    return w;
}

}  // namespace

std::string_view to_string(SamplerMode mode) {
    switch (mode) {
        case SamplerMode::snn: return "snn";
        case SamplerMode::rsnn: return "rsnn";
        case SamplerMode::arsnn: return "arsnn";
    }
    return "?";
}

SamplerMode sampler_mode_from(std::string_view name) {
    if (name == "snn") return SamplerMode::snn;
    if (name == "rsnn") return SamplerMode::rsnn;
    if (name == "arsnn") return SamplerMode::arsnn;
    throw InvalidConfigError("unknown sampler mode: " + std::string(name));
}

void SamplerConfig::validate() const {
    if (kernel < 1 || kernel % 2 == 0) throw InvalidConfigError("sampler kernel must be odd");
    if (!(theta > 0.0)) throw InvalidConfigError("sampler threshold must be positive");
    if (!(snn_decay >= 0.0 && snn_decay < 1.0)) throw InvalidConfigError("snn decay must lie in [0, 1)");
    surrogate.validate();
}

ParamSet init_sampler_params(const SamplerConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    ParamSet params;
    if (cfg.mode == SamplerMode::snn) {
        params.add("sampler.w_conv", conv_kernel(rng, cfg.kernel));
        params.add("sampler.b_conv", Tensor::zeros({2}));
    } else {
        // The recurrent and gate convolutions start silent with the retention
        // gate biased near one, so early spiking is driven by accumulated
        // event mass rather than per-step drive. Solutions found from this
        // point keep their spike timing when the same stream is sliced into a
        // different number of steps.
        const int k = cfg.kernel;
        params.add("sampler.w_in_f", conv_kernel(rng, cfg.kernel));
        params.add("sampler.w_in_s", Tensor::zeros({2, 2, k, k}));
        params.add("sampler.b_in", Tensor::zeros({2}));
        params.add("sampler.w_gate_f", Tensor::zeros({2, 2, k, k}));
        params.add("sampler.w_gate_s", Tensor::zeros({2, 2, k, k}));
        Tensor b_gate = Tensor::zeros({2});
        for (double& v : b_gate.data) v = 6.0;
        params.add("sampler.b_gate", b_gate);
    }
    return params;
}

ValueId BoundParams::at(std::string_view name) const {
    for (const auto& [n, id] : ids)
        if (n == name) return id;
    throw InvalidConfigError("parameter not bound on tape: " + std::string(name));
}

BoundParams bind_params(Tape& tape, const ParamSet& params) {
    BoundParams bound;
    for (const auto& [name, value] : params.items)
        bound.ids.emplace_back(name, tape.param(name, value));
    return bound;
}

SamplerTrace sampler_forward(Tape& tape, const BoundParams& params,
                             const FrameSequence& frames, const SamplerConfig& cfg,
                             SamplerTapeRefs* refs) {
    cfg.validate();
    if (frames.frames.empty()) throw InvalidWindowError("sampler needs at least one step");
    const int h = frames.frames[0].height;
    const int w = frames.frames[0].width;
    for (const FrameTensor& f : frames.frames)
        if (f.channels != 2 || f.height != h || f.width != w)
            throw ShapeMismatchError("sampler expects a uniform two-channel frame sequence");

    SamplerTrace trace;
    trace.mode = cfg.mode;
    trace.width = w;
    trace.height = h;
    trace.step_count = frames.step_count;
    trace.t_start = frames.t_start;
    trace.slice_us = frames.slice_us;
    trace.theta = cfg.theta;

    tape.set_scope("sampler");
    const ValueId zeros = tape.input(Tensor::zeros({2, h, w}));
    Tensor ones_t = Tensor::zeros({2, h, w});
    std::fill(ones_t.data.begin(), ones_t.data.end(), 1.0);
    const ValueId ones = tape.input(std::move(ones_t));

    const bool recurrent = cfg.mode != SamplerMode::snn;
    ValueId v_prev = zeros;
    ValueId s_prev = zeros;
    for (const FrameTensor& frame : frames.frames) {
        const ValueId f = tape.input(frame_to_tensor(frame));
        ValueId u;
        if (recurrent) {
            const ValueId current =
                tape.add(tape.conv2d(f, params.at("sampler.w_in_f"), params.at("sampler.b_in")),
                         tape.conv2d(s_prev, params.at("sampler.w_in_s"), std::nullopt, true));
            const ValueId gate = tape.sigmoid(
                tape.add(tape.conv2d(f, params.at("sampler.w_gate_f"), params.at("sampler.b_gate")),
                         tape.conv2d(s_prev, params.at("sampler.w_gate_s"), std::nullopt, true)));
            u = tape.add(tape.mul(gate, v_prev), current);
            trace.gate.push_back(tape.value(gate));
        } else {
            const ValueId current =
                tape.conv2d(f, params.at("sampler.w_conv"), params.at("sampler.b_conv"));
            u = tape.lincomb(cfg.snn_decay, v_prev, 1.0, current);
            Tensor flat_gate = Tensor::zeros({2, h, w});
            std::fill(flat_gate.data.begin(), flat_gate.data.end(), cfg.snn_decay);
            trace.gate.push_back(std::move(flat_gate));
        }
        const ValueId s = tape.threshold(u, cfg.theta, cfg.surrogate);
        // Hard reset to zero: v = u * (1 - s).
        const ValueId v = tape.mul(u, tape.lincomb(1.0, ones, -1.0, s));

        trace.u.push_back(tape.value(u));
        trace.v.push_back(tape.value(v));
        trace.s.push_back(tape.value(s));
        if (refs) {
            refs->u.push_back(u);
            refs->s.push_back(s);
        }
        v_prev = v;
        s_prev = s;
    }
    tape.set_scope("");
    return trace;
}

std::vector<std::vector<SampleWindow>> extract_windows(const SamplerTrace& trace) {
    if (trace.mode != SamplerMode::arsnn)
        throw InvalidConfigError("window extraction applies to the adaptive mode only");
    const std::size_t n_neurons = static_cast<std::size_t>(2) * trace.height * trace.width;
    const std::size_t plane = static_cast<std::size_t>(trace.height) * trace.width;
    std::vector<std::vector<SampleWindow>> windows(n_neurons);
    for (std::size_t n = 0; n < n_neurons; ++n) {
        const std::uint8_t p = static_cast<std::uint8_t>(n / plane);
        const std::uint16_t y = static_cast<std::uint16_t>((n % plane) / trace.width);
        const std::uint16_t x = static_cast<std::uint16_t>(n % trace.width);
        int prev_close = 0;
        for (int t = 1; t <= trace.step_count; ++t) {
            if (trace.s[static_cast<std::size_t>(t - 1)].data[n] == 0.0) continue;
            SampleWindow win;
            win.x = x;
            win.y = y;
            win.p = p;
            win.index = static_cast<std::int32_t>(windows[n].size()) + 1;
            win.t_open = prev_close + 1;
            win.t_close = t;
            windows[n].push_back(win);
            prev_close = t;
        }
    }
    return windows;
}

EmbeddingSequence aggregate_windows(Tape& tape, const SamplerTrace& trace,
                                    const SamplerTapeRefs& refs,
                                    std::vector<std::vector<SampleWindow>>& windows,
                                    bool rpd, bool sat, int slot_count,
                                    std::vector<ValueId>* slot_ids) {
    if (slot_count < 1) throw InvalidConfigError("need at least one embedding slot");
    if (refs.u.size() != static_cast<std::size_t>(trace.step_count) || refs.u.size() != refs.s.size())
        throw ShapeMismatchError("tape refs do not match the trace");

    const int t_steps = trace.step_count;
    std::vector<std::vector<AggSpan>> spans(static_cast<std::size_t>(slot_count));
    for (std::size_t n = 0; n < windows.size(); ++n) {
        auto& wins = windows[n];
        for (auto& win : wins) {
            const int slot = std::min(win.index - 1, slot_count - 1);
            spans[static_cast<std::size_t>(slot)].push_back(
                AggSpan{static_cast<std::int32_t>(n), static_cast<std::int16_t>(win.t_open),
                        static_cast<std::int16_t>(win.t_close), static_cast<std::int16_t>(win.t_close)});
            double sum = 0.0;
            for (int t = win.t_open; t <= win.t_close; ++t)
                sum += trace.u[static_cast<std::size_t>(t - 1)].data[n];
            win.potential_sum = sum;
        }
        const int last_close = wins.empty() ? 0 : wins.back().t_close;
        if (!rpd && last_close < t_steps) {
            const int slot = wins.empty() ? 0 : std::min(static_cast<int>(wins.size()) - 1, slot_count - 1);
            spans[static_cast<std::size_t>(slot)].push_back(
                AggSpan{static_cast<std::int32_t>(n), static_cast<std::int16_t>(last_close + 1),
                        static_cast<std::int16_t>(t_steps), -1});
        }
    }

    EmbeddingSequence seq;
    seq.slot_count = slot_count;
    seq.rpd = rpd;
    seq.sat = sat;
    seq.step_count = t_steps;
    seq.t_start = trace.t_start;
    seq.slice_us = trace.slice_us;
    for (int k = 0; k < slot_count; ++k) {
        const ValueId id = tape.slot_aggregate(refs.u, refs.s, sat, std::move(spans[static_cast<std::size_t>(k)]));
        seq.slots.push_back(tape.value(id));
        if (slot_ids) slot_ids->push_back(id);
    }
    return seq;
}

EmbeddingSequence fixed_partition_embedding(Tape& tape, const SamplerTrace& trace,
                                            const SamplerTapeRefs& refs, int slot_count,
                                            std::vector<ValueId>* slot_ids) {
    if (slot_count < 1) throw InvalidConfigError("need at least one embedding slot");
    const int t_steps = trace.step_count;
    const std::size_t n_neurons = static_cast<std::size_t>(2) * trace.height * trace.width;

    EmbeddingSequence seq;
    seq.slot_count = slot_count;
    seq.step_count = t_steps;
    seq.t_start = trace.t_start;
    seq.slice_us = trace.slice_us;
    for (int k = 0; k < slot_count; ++k) {
        // Slot k covers steps (k*T/K, (k+1)*T/K], rounded down, ungated.
        const int lo = k * t_steps / slot_count + 1;
        const int hi = (k + 1) * t_steps / slot_count;
        std::vector<AggSpan> spans;
        if (hi >= lo) {
            spans.reserve(n_neurons);
            for (std::size_t n = 0; n < n_neurons; ++n)
                spans.push_back(AggSpan{static_cast<std::int32_t>(n), static_cast<std::int16_t>(lo),
                                        static_cast<std::int16_t>(hi), -1});
        }
        const ValueId id = tape.slot_aggregate(refs.u, refs.s, false, std::move(spans));
        seq.slots.push_back(tape.value(id));
        if (slot_ids) slot_ids->push_back(id);
    }
    return seq;
}

std::vector<std::vector<std::size_t>> sample_events(const EventStream& stream,
                                                    const SamplerTrace& trace,
                                                    std::span<const SampleWindow> windows) {
    if (stream.width() != trace.width || stream.height() != trace.height)
        throw ShapeMismatchError("stream and trace describe different sensors");
    std::span<const Event> events = stream.span();
    std::vector<std::vector<std::size_t>> out(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const SampleWindow& win = windows[i];
        const std::uint64_t lo = trace.t_start + static_cast<std::uint64_t>(win.t_open - 1) * trace.slice_us;
        const std::uint64_t hi = trace.t_start + static_cast<std::uint64_t>(win.t_close) * trace.slice_us;
        const auto first = std::ranges::upper_bound(events, lo, {}, &Event::t);
        const auto past = std::ranges::upper_bound(events, hi, {}, &Event::t);
        for (auto it = first; it != past; ++it)
            if (it->x == win.x && it->y == win.y && it->p == win.p)
                out[i].push_back(static_cast<std::size_t>(it - events.begin()));
    }
    return out;
}

}  // namespace evs
