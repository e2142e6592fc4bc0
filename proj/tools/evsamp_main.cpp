// Command-line front end covering the full pipeline: stream generation,
// frame aggregation, sampling, training, evaluation, gradient checking,
// energy estimation, and stream statistics. Exit codes: 0 success, 1 usage,
// 2 validation, 3 runtime failure; diagnostics go to standard error.

#include <CLI11.hpp>

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include "evsamp/checkpoint.hpp"
#include "evsamp/config.hpp"
#include "evsamp/energy.hpp"
#include "evsamp/gradcheck.hpp"
#include "evsamp/plot.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> slurp_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw evs::Error("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw evs::Error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw evs::Error("short write to " + path);
}

void spit_text(const std::string& path, std::string_view text) {
    spit_bytes(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

// EVS1 payloads carry their own geometry; text input needs one supplied.
evs::EventStream load_stream(const std::string& path, std::uint16_t width,
                             std::uint16_t height) {
    const std::vector<std::uint8_t> bytes = slurp_bytes(path);
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "EVS1", 4) == 0)
        return evs::read_binary_stream(bytes);
    if (width == 0 || height == 0)
        throw evs::ValidationError("text stream input needs --width and --height");
    return evs::parse_text_stream(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), width,
        height);
}

struct ConfigArgs {
    std::string path;
    std::vector<std::string> sets;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("-c,--config", args.path, "run configuration file");
    cmd->add_option("--set", args.sets, "override one field, section.key=value")
        ->type_size(1);
}

evs::RunConfig resolve_config(const ConfigArgs& args) {
    evs::RunConfig cfg;
    if (!args.path.empty()) cfg = evs::load_run_config(args.path);
    for (const std::string& s : args.sets) evs::apply_override(cfg, s);
    return cfg;
}

// Events of one slice, bounds [lo, hi) plus hi itself for the final slice.
evs::SliceRef slice_ref(const evs::EventStream& stream, std::uint64_t lo, std::uint64_t hi,
                        bool take_hi) {
    const std::vector<evs::Event>& ev = stream.events();
    const auto first = std::partition_point(ev.begin(), ev.end(),
                                            [&](const evs::Event& e) { return e.t < lo; });
    const auto last = std::partition_point(
        first, ev.end(), [&](const evs::Event& e) { return take_hi ? e.t <= hi : e.t < hi; });
    return {std::span<const evs::Event>(first, last), lo, hi};
}

struct GenArgs {
    ConfigArgs config;
    std::string out;
    int count = 1;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void run_gen(const GenArgs& a) {
    evs::RunConfig cfg = resolve_config(a.config);
    evs::SceneConfig scene = cfg.scene;
    if (a.seed_set) scene.seed = a.seed;
    scene.validate();
    if (a.count < 1) throw evs::InvalidConfigError("--count must be positive");
    fs::create_directories(a.out);

    std::string csv = "index,seed,cx,cy,w,h,label,t_us\n";
    for (int i = 0; i < a.count; ++i) {
        evs::SceneConfig sc = scene;
        sc.seed = scene.seed + static_cast<std::uint64_t>(i);
        const auto [stream, ann] = evs::gen_synthetic(sc);
        char name[32];
        std::snprintf(name, sizeof name, "stream_%05d.evs", i);
        spit_bytes((fs::path(a.out) / name).string(), evs::write_binary_stream(stream));
        char line[256];
        std::snprintf(line, sizeof line,
                      "%d,%" PRIu64 ",%.17g,%.17g,%.17g,%.17g,%d,%" PRIu64 "\n", i,
                      static_cast<std::uint64_t>(sc.seed), ann.cx, ann.cy, ann.w, ann.h,
                      ann.label, static_cast<std::uint64_t>(ann.t));
        csv += line;
    }
    spit_text((fs::path(a.out) / "annotations.csv").string(), csv);
    std::printf("wrote %d stream(s) to %s\n", a.count, a.out.c_str());
}

struct StatsArgs {
    std::string in;
    std::uint16_t width = 0, height = 0;
};

void run_stats(const StatsArgs& a) {
    const evs::EventStream stream = load_stream(a.in, a.width, a.height);
    const evs::StatsReport r = evs::stream_stats(stream);
    std::printf("sensor         %ux%u\n", stream.width(), stream.height());
    std::printf("events         %" PRIu64 "\n", r.event_count);
    std::printf("duration_us    %" PRIu64 "\n", r.duration_us);
    std::printf("polarity_off   %" PRIu64 "\n", r.polarity_counts[0]);
    std::printf("polarity_on    %" PRIu64 "\n", r.polarity_counts[1]);
    std::printf("zero_bin_frac  %.6f\n", r.zero_bin_fraction);
}

struct AggregateArgs {
    std::string in, out;
    std::string repr = "count";
    int t_m = 8;
    int bins = 5;
    std::uint64_t tau_us = 10000;
    std::uint64_t t = 0;       // 0: stream duration
    std::uint64_t window = 0;  // 0: everything up to t
    std::uint16_t width = 0, height = 0;
};

void run_aggregate(const AggregateArgs& a) {
    const evs::EventStream stream = load_stream(a.in, a.width, a.height);
    const std::uint64_t t = a.t ? a.t : stream.duration_us();
    const std::uint64_t window = a.window ? a.window : t;
    if (a.t_m < 1) throw evs::InvalidConfigError("--t-m must be positive");
    fs::create_directories(a.out);

    std::vector<evs::FrameTensor> frames;
    if (a.repr == "count") {
        frames = evs::early_aggregate(stream, t, window, a.t_m).frames;
    } else {
        if (window == 0 || window > t)
            throw evs::InvalidWindowError("window must satisfy 0 < window <= t");
        if (window % static_cast<std::uint64_t>(a.t_m) != 0)
            throw evs::InvalidWindowError("window must divide evenly into --t-m slices");
        const std::uint64_t slice = window / static_cast<std::uint64_t>(a.t_m);
        for (int j = 0; j < a.t_m; ++j) {
            const std::uint64_t lo = t - window + slice * static_cast<std::uint64_t>(j);
            const evs::SliceRef ref = slice_ref(stream, lo, lo + slice, j + 1 == a.t_m);
            evs::FrameTensor f;
            if (a.repr == "voxel")
                f = evs::voxel_grid(ref, stream.width(), stream.height(), a.bins);
            else if (a.repr == "surface")
                f = evs::time_surface(ref, stream.width(), stream.height(), a.tau_us);
            else
                f = evs::voxel_cube(ref, stream.width(), stream.height(), a.bins);
            frames.push_back(std::move(f));
        }
    }

    for (std::size_t j = 0; j < frames.size(); ++j) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%03zu.frm", j);
        spit_bytes((fs::path(a.out) / name).string(), evs::write_frame(frames[j]));
    }
    char manifest[256];
    std::snprintf(manifest, sizeof manifest,
                  "repr %s\nframes %zu\nchannels %d\nt %" PRIu64 "\nwindow %" PRIu64 "\n",
                  a.repr.c_str(), frames.size(), frames.empty() ? 0 : frames[0].channels,
                  t, window);
    spit_text((fs::path(a.out) / "manifest.txt").string(), manifest);
    std::printf("wrote %zu frame(s) to %s\n", frames.size(), a.out.c_str());
}

struct SampleArgs {
    ConfigArgs config;
    std::string in;    // stream file; empty generates one from the scene
    std::string ckpt;  // parameter source; empty draws fresh ones
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int t_m = 0;  // 0: training granularity
};

void run_sample(const SampleArgs& a) {
    evs::RunConfig cfg = resolve_config(a.config);
    cfg.validate();
    if (!cfg.model.uses_sampler())
        throw evs::InvalidConfigError("sample needs a sampler arm (arsnn, rsnn, snn)");
    const int t_m = a.t_m > 0 ? a.t_m : cfg.train.t_m;

    // Generated scenes window on the nominal scene duration, matching the
    // training pipeline; loaded files only know their own extent.
    evs::EventStream stream;
    std::uint64_t t_end = 0;
    if (!a.in.empty()) {
        stream = load_stream(a.in, cfg.scene.width, cfg.scene.height);
        t_end = stream.duration_us();
    } else {
        evs::SceneConfig sc = cfg.scene;
        if (a.seed_set) sc.seed = a.seed;
        stream = evs::gen_synthetic(sc).first;
        t_end = sc.duration_us();
    }
    if (stream.empty()) throw evs::ValidationError("input stream has no events");

    const evs::ParamSet params = a.ckpt.empty()
                                     ? evs::init_model_params(cfg.model, cfg.train.seed)
                                     : evs::load_checkpoint(a.ckpt).params;

    const evs::FrameSequence frames = evs::early_aggregate(stream, t_end, t_end, t_m);
    evs::Tape tape;
    const evs::BoundParams bound = evs::bind_params(tape, params);
    evs::SamplerTapeRefs refs;
    const evs::SamplerTrace trace =
        evs::sampler_forward(tape, bound, frames, cfg.model.sampler, &refs);

    std::vector<std::vector<evs::SampleWindow>> windows;
    evs::EmbeddingSequence emb;
    if (cfg.model.arm == evs::EmbedArm::arsnn) {
        windows = evs::extract_windows(trace);
        emb = evs::aggregate_windows(tape, trace, refs, windows, cfg.model.rpd, cfg.model.sat,
                                     cfg.model.slot_count);
    } else {
        emb = evs::fixed_partition_embedding(tape, trace, refs, cfg.model.slot_count);
    }

    fs::create_directories(a.out);
    for (int k = 0; k < emb.slot_count; ++k) {
        evs::FrameTensor f = evs::FrameTensor::zeros(2, trace.height, trace.width);
        f.t_start = emb.t_start;
        f.t_end = t_end;
        f.data = emb.slots[static_cast<std::size_t>(k)].data;
        char name[32];
        std::snprintf(name, sizeof name, "slot_%02d.frm", k);
        spit_bytes((fs::path(a.out) / name).string(), evs::write_frame(f));
    }

    std::size_t window_total = 0;
    for (const std::vector<evs::SampleWindow>& per : windows) window_total += per.size();
    double spike_total = 0.0;
    for (const evs::Tensor& s : trace.s) spike_total += [&] {
        double acc = 0.0;
        for (double v : s.data) acc += v;
        return acc;
    }();
    char manifest[320];
    std::snprintf(manifest, sizeof manifest,
                  "mode %s\nslots %d\nrpd %d\nsat %d\nt_m %d\nslice_us %" PRIu64
                  "\nspikes %.0f\nwindows %zu\n",
                  std::string(evs::to_string(trace.mode)).c_str(), emb.slot_count,
                  emb.rpd ? 1 : 0, emb.sat ? 1 : 0, emb.step_count,
                  static_cast<std::uint64_t>(emb.slice_us), spike_total, window_total);
    spit_text((fs::path(a.out) / "manifest.txt").string(), manifest);

    if (cfg.model.arm == evs::EmbedArm::arsnn) {
        std::string csv = "x,y,p,index,t_open,t_close,potential_sum\n";
        for (const std::vector<evs::SampleWindow>& per : windows) {
            for (const evs::SampleWindow& w : per) {
                char line[160];
                std::snprintf(line, sizeof line, "%u,%u,%u,%d,%d,%d,%.17g\n", w.x, w.y, w.p,
                              w.index, w.t_open, w.t_close, w.potential_sum);
                csv += line;
            }
        }
        spit_text((fs::path(a.out) / "windows.csv").string(), csv);
    }
    std::printf("wrote %d slot(s), %zu window(s) to %s\n", emb.slot_count, window_total,
                a.out.c_str());
}

struct TrainArgs {
    ConfigArgs config;
    std::string out;  // overrides the configured output directory
    int threads = 0;
};

void run_train(const TrainArgs& a) {
    evs::RunConfig cfg = resolve_config(a.config);
    if (!a.out.empty()) cfg.out_dir = a.out;
    if (a.threads > 0) cfg.train.threads = a.threads;
    cfg.validate();

    fs::create_directories(cfg.out_dir);
    const evs::TrainResult result =
        evs::train_model(cfg.model, cfg.train, cfg.train_scenes(), cfg.test_scenes());

    const fs::path out(cfg.out_dir);
    spit_text((out / "resolved.cfg").string(), evs::emit_run_config(cfg));
    evs::save_checkpoint((out / "checkpoint.ckpt").string(), result.checkpoint);
    spit_text((out / "metrics.jsonl").string(), evs::metrics_jsonl(result.log));
    const std::string summary = evs::summary_table(cfg.model, cfg.train, result);
    spit_text((out / "summary.txt").string(), summary);

    evs::PlotSeries loss{"loss", {}, {200, 60, 40}};
    for (const evs::TrainLogEntry& e : result.log) loss.values.push_back(e.loss);
    evs::write_plot_bmp((out / "loss.bmp").string(), {loss}, 640, 400);
    evs::PlotSeries acc{"accuracy", {}, {40, 90, 200}};
    for (const evs::TrainLogEntry& e : result.log)
        if (e.has_eval) acc.values.push_back(e.eval_accuracy);
    if (!acc.values.empty())
        evs::write_plot_bmp((out / "accuracy.bmp").string(), {acc}, 640, 400);

    std::fputs(summary.c_str(), stdout);
}

struct EvalArgs {
    ConfigArgs config;
    std::string ckpt;
    std::vector<int> t_m;
    int threads = 0;
};

void run_eval(const EvalArgs& a) {
    evs::RunConfig cfg = resolve_config(a.config);
    if (a.threads > 0) cfg.train.threads = a.threads;
    cfg.validate();
    const evs::Checkpoint ckpt = evs::load_checkpoint(a.ckpt);
    const std::vector<int> grid = a.t_m.empty() ? std::vector<int>{cfg.train.t_m} : a.t_m;
    const std::vector<std::pair<int, evs::EvalResult>> rows = evs::tm_robustness_probe(
        cfg.model, ckpt.params, cfg.test_scenes(), grid, cfg.train.threads);
    std::printf("%6s %10s %10s %8s\n", "t_m", "accuracy", "mean_iou", "streams");
    for (const auto& [tm, r] : rows)
        std::printf("%6d %10.4f %10.4f %8zu\n", tm, r.accuracy, r.mean_iou, r.count);
}

struct GradcheckArgs {
    std::string arm = "arsnn";
    bool rpd = true;
    std::uint64_t seed = 1;
    int count = 1;
    double tol = 1e-5;
    double eps = 1e-6;
};

int run_gradcheck(const GradcheckArgs& a) {
    if (a.count < 1) throw evs::InvalidConfigError("--count must be positive");
    evs::FdOptions opts;
    opts.eps = a.eps;
    double worst = 0.0;
    bool ok = true;
    for (int i = 0; i < a.count; ++i) {
        const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(i);
        const evs::FdReport r = evs::model_gradcheck(a.arm, a.rpd, seed, opts);
        const bool seed_ok = r.margin_ok && !r.all_unstable() && r.max_rel_err <= a.tol;
        std::printf("seed %" PRIu64 ": checked %d, skipped %d, max rel err %.3e%s\n", seed,
                    r.checked, r.skipped, r.max_rel_err, seed_ok ? "" : "  [FAIL]");
        worst = std::max(worst, r.max_rel_err);
        ok = ok && seed_ok;
    }
    std::printf("max relative error %.3e over %d seed(s), tolerance %.1e: %s\n", worst,
                a.count, a.tol, ok ? "pass" : "FAIL");
    return ok ? 0 : 3;
}

struct EnergyArgs {
    ConfigArgs config;
    double ac = 0.0, mac = 0.0;
    bool direct = false;  // set when --ac or --mac was given
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void run_energy(const EnergyArgs& a) {
    if (a.direct) {
        if (a.ac < 0.0 || a.mac < 0.0)
            throw evs::InvalidConfigError("operation counts must be non-negative");
        std::printf("AC ops   %.6g\n", a.ac);
        std::printf("MAC ops  %.6g\n", a.mac);
        std::printf("energy: %.2f mJ\n", evs::energy_mj(a.ac, a.mac));
        return;
    }

    // No explicit counts: run the configured model once and tally its convs.
    evs::RunConfig cfg = resolve_config(a.config);
    cfg.validate();
    evs::SceneConfig sc = cfg.scene;
    if (a.seed_set) sc.seed = a.seed;
    const evs::EventStream stream = evs::gen_synthetic(sc).first;
    if (stream.empty()) throw evs::ValidationError("scene produced no events");
    const evs::FrameSequence frames =
        evs::early_aggregate(stream, sc.duration_us(), sc.duration_us(), cfg.train.t_m);
    const evs::ParamSet params = evs::init_model_params(cfg.model, cfg.train.seed);
    evs::Tape tape;
    const evs::BoundParams bound = evs::bind_params(tape, params);
    evs::model_forward(tape, bound, cfg.model, frames);
    const evs::OpCounter counter = evs::count_ops(tape);
    std::fputs(evs::energy_report(counter, cfg.model.uses_sampler()).c_str(), stdout);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive event sampling toolkit"};
    app.require_subcommand(1);
    int rc = 0;

    GenArgs gen;
    CLI::App* cmd_gen = app.add_subcommand("gen", "generate synthetic event streams");
    add_config_options(cmd_gen, gen.config);
    cmd_gen->add_option("-o,--out", gen.out, "output directory")->required();
    cmd_gen->add_option("-n,--count", gen.count, "number of streams");
    CLI::Option* gen_seed = cmd_gen->add_option("--seed", gen.seed, "base scene seed");
    cmd_gen->callback([&] {
        gen.seed_set = gen_seed->count() > 0;
        run_gen(gen);
    });

    StatsArgs stats;
    CLI::App* cmd_stats = app.add_subcommand("stats", "print stream statistics");
    cmd_stats->add_option("-i,--in", stats.in, "stream file (EVS1 or t,x,y,p text)")
        ->required();
    cmd_stats->add_option("--width", stats.width, "sensor width for text input");
    cmd_stats->add_option("--height", stats.height, "sensor height for text input");
    cmd_stats->callback([&] { run_stats(stats); });

    AggregateArgs agg;
    CLI::App* cmd_agg = app.add_subcommand("aggregate", "bin a stream into frame files");
    cmd_agg->add_option("-i,--in", agg.in, "stream file")->required();
    cmd_agg->add_option("-o,--out", agg.out, "output directory")->required();
    cmd_agg->add_option("--repr", agg.repr, "count, voxel, surface, or cube")
        ->check(CLI::IsMember({"count", "voxel", "surface", "cube"}));
    cmd_agg->add_option("--t-m", agg.t_m, "number of slices");
    cmd_agg->add_option("--bins", agg.bins, "bins per polarity (voxel, cube)");
    cmd_agg->add_option("--tau-us", agg.tau_us, "decay constant (surface)");
    cmd_agg->add_option("--t", agg.t, "window end, microseconds (default stream end)");
    cmd_agg->add_option("--window", agg.window, "window length, microseconds (default t)");
    cmd_agg->add_option("--width", agg.width, "sensor width for text input");
    cmd_agg->add_option("--height", agg.height, "sensor height for text input");
    cmd_agg->callback([&] { run_aggregate(agg); });

    SampleArgs sample;
    CLI::App* cmd_sample =
        app.add_subcommand("sample", "run the sampler and dump embeddings plus windows");
    add_config_options(cmd_sample, sample.config);
    cmd_sample->add_option("-i,--in", sample.in, "stream file (default: generated scene)");
    cmd_sample->add_option("--ckpt", sample.ckpt, "checkpoint for the parameters");
    cmd_sample->add_option("-o,--out", sample.out, "output directory")->required();
    CLI::Option* sample_seed = cmd_sample->add_option("--seed", sample.seed, "scene seed");
    cmd_sample->add_option("--t-m", sample.t_m, "count frames (default train.t_m)");
    cmd_sample->callback([&] {
        sample.seed_set = sample_seed->count() > 0;
        run_sample(sample);
    });

    TrainArgs train;
    CLI::App* cmd_train = app.add_subcommand("train", "train a detection model");
    add_config_options(cmd_train, train.config);
    cmd_train->add_option("-o,--out", train.out, "output directory (overrides config)");
    cmd_train->add_option("-j,--threads", train.threads, "evaluation worker cap");
    cmd_train->callback([&] { run_train(train); });

    EvalArgs eval;
    CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_config_options(cmd_eval, eval.config);
    cmd_eval->add_option("--ckpt", eval.ckpt, "checkpoint file")->required();
    cmd_eval->add_option("--t-m", eval.t_m, "frame granularities to score")->type_size(1);
    cmd_eval->add_option("-j,--threads", eval.threads, "evaluation worker cap");
    cmd_eval->callback([&] { run_eval(eval); });

    GradcheckArgs grad;
    CLI::App* cmd_grad =
        app.add_subcommand("gradcheck", "finite-difference check on a small fixture");
    cmd_grad->add_option("--arm", grad.arm, "embedding arm")
        ->check(CLI::IsMember({"arsnn", "rsnn", "snn", "count"}));
    cmd_grad->add_flag("--rpd,!--no-rpd", grad.rpd, "drop residual potential");
    cmd_grad->add_option("--seed", grad.seed, "first fixture seed");
    cmd_grad->add_option("-n,--count", grad.count, "number of seeds");
    cmd_grad->add_option("--tol", grad.tol, "relative error tolerance");
    cmd_grad->add_option("--eps", grad.eps, "finite-difference step");
    cmd_grad->callback([&] { rc = run_gradcheck(grad); });

    EnergyArgs energy;
    CLI::App* cmd_energy =
        app.add_subcommand("energy", "energy estimate from operation counts or a model");
    add_config_options(cmd_energy, energy.config);
    CLI::Option* opt_ac = cmd_energy->add_option("--ac", energy.ac, "accumulate count");
    CLI::Option* opt_mac =
        cmd_energy->add_option("--mac", energy.mac, "multiply-accumulate count");
    CLI::Option* energy_seed = cmd_energy->add_option("--seed", energy.seed, "scene seed");
    cmd_energy->callback([&] {
        energy.direct = opt_ac->count() > 0 || opt_mac->count() > 0;
        energy.seed_set = energy_seed->count() > 0;
        run_energy(energy);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const evs::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const evs::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return rc;
}
