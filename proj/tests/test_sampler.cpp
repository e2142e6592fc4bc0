#include <doctest.h>

#include <cmath>
#include <vector>

#include "evsamp/errors.hpp"
#include "evsamp/rng.hpp"
#include "evsamp/sampler.hpp"

using namespace evs;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

FrameSequence make_frames(std::vector<Tensor> tensors, std::uint64_t slice_us = 1000) {
    FrameSequence seq;
    seq.step_count = static_cast<int>(tensors.size());
    seq.slice_us = slice_us;
    seq.t_start = 0;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        FrameTensor f;
        f.channels = tensors[i].shape[0];
        f.height = tensors[i].shape[1];
        f.width = tensors[i].shape[2];
        f.t_start = i * slice_us;
        f.t_end = (i + 1) * slice_us;
        f.data = tensors[i].data;
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

FrameSequence random_frames(std::uint64_t seed, int steps, int h, int w, double max_count = 3.0) {
    Rng rng(seed);
    std::vector<Tensor> tensors;
    for (int t = 0; t < steps; ++t) {
        Tensor f = Tensor::zeros({2, h, w});
        for (double& v : f.data) v = std::floor(rng.uniform(0.0, max_count + 1.0));
        tensors.push_back(std::move(f));
    }
    return make_frames(std::move(tensors));
}

void zero_params(ParamSet& params) {
    for (auto& [name, t] : params.items) std::fill(t.data.begin(), t.data.end(), 0.0);
}

// 1x1-sensor trace whose polarity-0 neuron follows the given potentials;
// spikes derive from theta, everything else stays silent.
struct LineHarness {
    Tape tape;
    SamplerTrace trace;
    SamplerTapeRefs refs;
};

LineHarness make_line_trace(const std::vector<double>& u_line, double theta = 1.0) {
    LineHarness h;
    h.trace.mode = SamplerMode::arsnn;
    h.trace.width = 1;
    h.trace.height = 1;
    h.trace.step_count = static_cast<int>(u_line.size());
    h.trace.theta = theta;
    h.trace.t_start = 0;
    h.trace.slice_us = 1000;
    for (double uv : u_line) {
        Tensor u = Tensor::zeros({2, 1, 1});
        u.data[0] = uv;
        Tensor s = Tensor::zeros({2, 1, 1});
        s.data[0] = uv >= theta ? 1.0 : 0.0;
        h.trace.u.push_back(u);
        h.trace.s.push_back(s);
        h.refs.u.push_back(h.tape.input(u));
        h.refs.s.push_back(h.tape.input(s));
    }
    return h;
}

}  // namespace

TEST_CASE("zero frames and zero weights give a silent trace") {
    SamplerConfig cfg;
    ParamSet params = init_sampler_params(cfg, 1);
    zero_params(params);

    std::vector<Tensor> frames(5, Tensor::zeros({2, 4, 4}));
    Tape tape;
    const BoundParams bound = bind_params(tape, params);
    const SamplerTrace trace = sampler_forward(tape, bound, make_frames(frames), cfg);

    REQUIRE(trace.step_count == 5);
    for (int t = 0; t < 5; ++t) {
        for (double v : trace.u[static_cast<std::size_t>(t)].data) CHECK(v == 0.0);
        for (double v : trace.s[static_cast<std::size_t>(t)].data) CHECK(v == 0.0);
        for (double v : trace.gate[static_cast<std::size_t>(t)].data) CHECK(v == 0.5);
    }
}

TEST_CASE("1x1 identity kernels reduce to a scalar recurrence with sigmoid gate") {
    SamplerConfig cfg;
    cfg.kernel = 1;
    cfg.theta = 1.0;
    ParamSet params = init_sampler_params(cfg, 2);
    zero_params(params);
    // identity input kernel per polarity; constant gate bias per channel
    params.at("sampler.w_in_f").data[0] = 1.0;  // (0,0,0,0)
    params.at("sampler.w_in_f").data[3] = 1.0;  // (1,1,0,0)
    params.at("sampler.b_gate").data = {0.4, -0.3};

    Rng rng(8);
    std::vector<Tensor> frames;
    for (int t = 0; t < 12; ++t) {
        Tensor f = Tensor::zeros({2, 1, 1});
        f.data[0] = std::floor(rng.uniform(0.0, 3.0));
        f.data[1] = std::floor(rng.uniform(0.0, 3.0));
        frames.push_back(std::move(f));
    }

    Tape tape;
    const BoundParams bound = bind_params(tape, params);
    const SamplerTrace trace = sampler_forward(tape, bound, make_frames(frames), cfg);

    for (int c = 0; c < 2; ++c) {
        const double gate = sigmoid(c == 0 ? 0.4 : -0.3);
        double v = 0.0;
        for (int t = 0; t < 12; ++t) {
            const double u = gate * v + frames[static_cast<std::size_t>(t)].data[static_cast<std::size_t>(c)];
            const int s = u >= 1.0 ? 1 : 0;
            v = s ? 0.0 : u;
            CHECK(trace.u[static_cast<std::size_t>(t)].data[static_cast<std::size_t>(c)] ==
                  doctest::Approx(u).epsilon(1e-12));
            CHECK(trace.s[static_cast<std::size_t>(t)].data[static_cast<std::size_t>(c)] == s);
            CHECK(trace.gate[static_cast<std::size_t>(t)].data[static_cast<std::size_t>(c)] ==
                  doctest::Approx(gate).epsilon(1e-12));
        }
    }
}

TEST_CASE("recurrent trace equals a naive per-pixel re-implementation") {
    const int h = 4, w = 4, steps = 6, k = 3;
    for (const std::uint64_t seed : {100u, 101u, 102u}) {
        SamplerConfig cfg;
        cfg.theta = 0.8;
        ParamSet params = init_sampler_params(cfg, seed);
        const FrameSequence frames = random_frames(seed + 50, steps, h, w);

        Tape tape;
        const BoundParams bound = bind_params(tape, params);
        const SamplerTrace trace = sampler_forward(tape, bound, frames, cfg);

        // independent dense recurrence, one pixel at a time
        const auto conv_at = [&](const Tensor& weight, const std::vector<double>& bias,
                                 const std::vector<double>& img, int oc, int y, int x) {
            double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(oc)];
            for (int ic = 0; ic < 2; ++ic)
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        const int iy = y + ky - 1, ix = x + kx - 1;
                        if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                        acc += weight.data[((static_cast<std::size_t>(oc) * 2 + ic) * k + ky) * k + kx] *
                               img[(static_cast<std::size_t>(ic) * h + iy) * w + ix];
                    }
            return acc;
        };

        std::vector<double> v(2 * h * w, 0.0), s_prev(2 * h * w, 0.0);
        for (int t = 0; t < steps; ++t) {
            std::vector<double> u(2 * h * w), s_now(2 * h * w);
            for (int oc = 0; oc < 2; ++oc)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        const std::size_t n = (static_cast<std::size_t>(oc) * h + y) * w + x;
                        const double cur =
                            conv_at(params.at("sampler.w_in_f"), params.at("sampler.b_in").data,
                                    frames.frames[static_cast<std::size_t>(t)].data, oc, y, x) +
                            conv_at(params.at("sampler.w_in_s"), {}, s_prev, oc, y, x);
                        const double gate = sigmoid(
                            conv_at(params.at("sampler.w_gate_f"), params.at("sampler.b_gate").data,
                                    frames.frames[static_cast<std::size_t>(t)].data, oc, y, x) +
                            conv_at(params.at("sampler.w_gate_s"), {}, s_prev, oc, y, x));
                        u[n] = gate * v[n] + cur;
                        s_now[n] = u[n] >= cfg.theta ? 1.0 : 0.0;
                        v[n] = s_now[n] == 1.0 ? 0.0 : u[n];
                        CHECK(trace.u[static_cast<std::size_t>(t)].data[n] ==
                              doctest::Approx(u[n]).epsilon(1e-12).scale(1.0));
                        CHECK(trace.gate[static_cast<std::size_t>(t)].data[n] ==
                              doctest::Approx(gate).epsilon(1e-12).scale(1.0));
                        CHECK(trace.s[static_cast<std::size_t>(t)].data[n] == s_now[n]);
                    }
            s_prev = s_now;
        }
    }
}

TEST_CASE("non-recurrent mode applies a constant leak") {
    SamplerConfig cfg;
    cfg.mode = SamplerMode::snn;
    cfg.kernel = 1;
    cfg.snn_decay = 0.6;
    cfg.theta = 2.0;
    ParamSet params = init_sampler_params(cfg, 3);
    zero_params(params);
    params.at("sampler.w_conv").data[0] = 1.0;
    params.at("sampler.w_conv").data[3] = 1.0;

    Rng rng(9);
    std::vector<Tensor> frames;
    for (int t = 0; t < 10; ++t) {
        Tensor f = Tensor::zeros({2, 1, 1});
        f.data[0] = std::floor(rng.uniform(0.0, 2.0));
        f.data[1] = std::floor(rng.uniform(0.0, 2.0));
        frames.push_back(std::move(f));
    }
    Tape tape;
    const BoundParams bound = bind_params(tape, params);
    const SamplerTrace trace = sampler_forward(tape, bound, make_frames(frames), cfg);

    for (int c = 0; c < 2; ++c) {
        double v = 0.0;
        for (int t = 0; t < 10; ++t) {
            const double u = 0.6 * v + frames[static_cast<std::size_t>(t)].data[static_cast<std::size_t>(c)];
            const int s = u >= 2.0 ? 1 : 0;
            v = s ? 0.0 : u;
            CHECK(trace.u[static_cast<std::size_t>(t)].data[static_cast<std::size_t>(c)] ==
                  doctest::Approx(u).epsilon(1e-12));
            CHECK(trace.s[static_cast<std::size_t>(t)].data[static_cast<std::size_t>(c)] == s);
        }
    }
}

TEST_CASE("window extraction follows spike pairs") {
    // theta 1: spikes at steps 3 and 7
    const LineHarness h = make_line_trace({0.2, 0.5, 1.1, 0.3, 0.4, 0.6, 1.4, 0.2});
    const auto windows = extract_windows(h.trace);
    REQUIRE(windows.size() == 2);
    REQUIRE(windows[0].size() == 2);
    CHECK(windows[0][0].t_open == 1);
    CHECK(windows[0][0].t_close == 3);
    CHECK(windows[0][0].index == 1);
    CHECK(windows[0][1].t_open == 4);
    CHECK(windows[0][1].t_close == 7);
    CHECK(windows[0][1].index == 2);
    CHECK(windows[0][0].p == 0);
    CHECK(windows[1].empty());  // silent polarity-1 neuron
}

TEST_CASE("window extraction of a silent trace is empty") {
    const LineHarness h = make_line_trace({0.1, 0.2, 0.3});
    const auto windows = extract_windows(h.trace);
    for (const auto& per_neuron : windows) CHECK(per_neuron.empty());
}

TEST_CASE("window extraction equals a brute-force spike scan") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(900 + seed);
        std::vector<double> u_line(10);
        for (double& v : u_line) v = rng.uniform(0.0, 2.0);
        const LineHarness h = make_line_trace(u_line);
        const auto windows = extract_windows(h.trace);

        std::vector<int> spike_steps;
        for (int t = 1; t <= 10; ++t)
            if (u_line[static_cast<std::size_t>(t - 1)] >= 1.0) spike_steps.push_back(t);
        REQUIRE(windows[0].size() == spike_steps.size());
        int prev = 0;
        for (std::size_t i = 0; i < spike_steps.size(); ++i) {
            CHECK(windows[0][i].t_open == prev + 1);
            CHECK(windows[0][i].t_close == spike_steps[i]);
            prev = spike_steps[i];
        }
    }
}

TEST_CASE("aggregation sums potentials up to the closing spike") {
    LineHarness h = make_line_trace({0.2, 0.5, 1.1});
    auto windows = extract_windows(h.trace);
    const EmbeddingSequence seq = aggregate_windows(h.tape, h.trace, h.refs, windows, true, false, 1);
    CHECK(seq.slots[0].data[0] == doctest::Approx(1.8).epsilon(1e-15));
    CHECK(windows[0][0].potential_sum == doctest::Approx(1.8).epsilon(1e-15));
}

TEST_CASE("a neuron that never spikes is dropped entirely under residual dropout") {
    LineHarness h = make_line_trace({0.3, 0.4, 0.2});
    auto windows = extract_windows(h.trace);
    const EmbeddingSequence with_rpd =
        aggregate_windows(h.tape, h.trace, h.refs, windows, true, false, 3);
    for (const Tensor& slot : with_rpd.slots)
        for (double v : slot.data) CHECK(v == 0.0);

    LineHarness h2 = make_line_trace({0.3, 0.4, 0.2});
    auto windows2 = extract_windows(h2.trace);
    const EmbeddingSequence without =
        aggregate_windows(h2.tape, h2.trace, h2.refs, windows2, false, false, 3);
    CHECK(without.slots[0].data[0] == doctest::Approx(0.9).epsilon(1e-15));  // residual in slot 0
    CHECK(without.slots[1].data[0] == 0.0);
}

TEST_CASE("residual dropout removes exactly the post-last-spike sum") {
    const std::vector<double> u_line = {0.4, 1.2, 0.1, 0.2, 1.5, 0.3, 0.6, 0.2};  // spikes at 2, 5
    double residual = 0.3 + 0.6 + 0.2;

    LineHarness on = make_line_trace(u_line);
    auto wins_on = extract_windows(on.trace);
    const EmbeddingSequence with_rpd =
        aggregate_windows(on.tape, on.trace, on.refs, wins_on, true, false, 3);

    LineHarness off = make_line_trace(u_line);
    auto wins_off = extract_windows(off.trace);
    const EmbeddingSequence without =
        aggregate_windows(off.tape, off.trace, off.refs, wins_off, false, false, 3);

    CHECK(with_rpd.slots[0].data[0] == without.slots[0].data[0]);
    CHECK(without.slots[1].data[0] - with_rpd.slots[1].data[0] ==
          doctest::Approx(residual).epsilon(1e-12));
    CHECK(with_rpd.slots[2].data[0] == 0.0);  // only two windows, third slot zero-filled
    CHECK(without.slots[2].data[0] == 0.0);
}

TEST_CASE("windows past the last slot merge into it") {
    // spikes at 2, 4, 6, 8 -> four windows, slots for two
    LineHarness h = make_line_trace({0.4, 1.2, 0.1, 1.1, 0.5, 1.3, 0.2, 1.6});
    auto windows = extract_windows(h.trace);
    REQUIRE(windows[0].size() == 4);
    const EmbeddingSequence seq = aggregate_windows(h.tape, h.trace, h.refs, windows, true, false, 2);
    CHECK(seq.slots[0].data[0] == doctest::Approx(0.4 + 1.2).epsilon(1e-12));
    const double merged = (0.1 + 1.1) + (0.5 + 1.3) + (0.2 + 1.6);
    CHECK(seq.slots[1].data[0] == doctest::Approx(merged).epsilon(1e-12));
}

TEST_CASE("aggregation forward bits do not depend on the sat flag") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(7000 + seed);
        std::vector<double> u_line(8);
        for (double& v : u_line) v = rng.uniform(0.0, 2.0);
        std::vector<std::vector<double>> outs;
        for (const bool sat : {false, true}) {
            LineHarness h = make_line_trace(u_line);
            auto windows = extract_windows(h.trace);
            const EmbeddingSequence seq =
                aggregate_windows(h.tape, h.trace, h.refs, windows, false, sat, 3);
            std::vector<double> flat;
            for (const Tensor& slot : seq.slots)
                flat.insert(flat.end(), slot.data.begin(), slot.data.end());
            outs.push_back(std::move(flat));
        }
        CHECK(outs[0] == outs[1]);
    }
}

TEST_CASE("equal-partition embedding covers the steps in order") {
    LineHarness h = make_line_trace({1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0}, 100.0);
    h.trace.mode = SamplerMode::rsnn;
    const EmbeddingSequence seq = fixed_partition_embedding(h.tape, h.trace, h.refs, 3);
    CHECK(seq.slots[0].data[0] == doctest::Approx(1.0 + 2.0));          // steps 1..2
    CHECK(seq.slots[1].data[0] == doctest::Approx(3.0 + 4.0 + 5.0));    // steps 3..5
    CHECK(seq.slots[2].data[0] == doctest::Approx(6.0 + 7.0 + 8.0));    // steps 6..8
}

TEST_CASE("event lookup honors window bounds and polarity") {
    LineHarness h = make_line_trace({1.2, 0.3, 0.4, 1.1});
    auto windows = extract_windows(h.trace);
    REQUIRE(windows[0].size() == 2);
    std::vector<SampleWindow> flat = windows[0];

    // slice_us = 1000; window 2 covers (1000, 4000]
    const EventStream stream({Event{0, 0, 0, 1000}, Event{0, 0, 0, 1001}, Event{0, 0, 1, 2000},
                              Event{0, 0, 0, 4000}},
                             1, 1);
    const auto picked = sample_events(stream, h.trace, flat);
    REQUIRE(picked.size() == 2);
    CHECK(picked[0] == std::vector<std::size_t>{0});      // (0, 1000] keeps the boundary event
    CHECK(picked[1] == std::vector<std::size_t>{1, 3});   // polarity-1 event excluded
}

TEST_CASE("event lookup equals a brute-force membership test") {
    Rng rng(404);
    std::vector<Event> events;
    std::uint64_t t = 0;
    for (int i = 0; i < 300; ++i) {
        t += rng.below(40);
        events.push_back(Event{static_cast<std::uint16_t>(rng.below(2)),
                               static_cast<std::uint16_t>(rng.below(2)),
                               static_cast<std::uint8_t>(rng.below(2)), t});
    }
    const EventStream stream(std::move(events), 2, 2);

    SamplerTrace trace;
    trace.mode = SamplerMode::arsnn;
    trace.width = 2;
    trace.height = 2;
    trace.step_count = 8;
    trace.t_start = 0;
    trace.slice_us = (stream.duration_us() + 8) / 8;

    std::vector<SampleWindow> flat;
    for (int p = 0; p < 2; ++p)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x) {
                SampleWindow w;
                w.x = static_cast<std::uint16_t>(x);
                w.y = static_cast<std::uint16_t>(y);
                w.p = static_cast<std::uint8_t>(p);
                w.t_open = 1 + static_cast<int>(rng.below(3));
                w.t_close = w.t_open + static_cast<int>(rng.below(4));
                flat.push_back(w);
            }

    const auto picked = sample_events(stream, trace, flat);
    for (std::size_t i = 0; i < flat.size(); ++i) {
        std::vector<std::size_t> expect;
        const std::uint64_t lo = trace.t_start + static_cast<std::uint64_t>(flat[i].t_open - 1) * trace.slice_us;
        const std::uint64_t hi = trace.t_start + static_cast<std::uint64_t>(flat[i].t_close) * trace.slice_us;
        for (std::size_t e = 0; e < stream.size(); ++e) {
            const Event& ev = stream.events()[e];
            if (ev.x == flat[i].x && ev.y == flat[i].y && ev.p == flat[i].p && ev.t > lo && ev.t <= hi)
                expect.push_back(e);
        }
        CHECK(picked[i] == expect);
    }
}

TEST_CASE("mode plumbing round-trips and rejects junk") {
    CHECK(sampler_mode_from("arsnn") == SamplerMode::arsnn);
    CHECK(to_string(SamplerMode::snn) == "snn");
    CHECK_THROWS_AS(sampler_mode_from("mlp"), InvalidConfigError);
    SamplerConfig cfg;
    cfg.kernel = 2;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfigError);

    const LineHarness h = make_line_trace({0.1});
    SamplerTrace copy = h.trace;
    copy.mode = SamplerMode::rsnn;
    CHECK_THROWS_AS(extract_windows(copy), InvalidConfigError);
}
