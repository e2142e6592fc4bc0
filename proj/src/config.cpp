#include "evsamp/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace evs {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_double(std::string_view key, std::string_view v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(std::string(v), &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw InvalidConfigError("config: bad number for " + std::string(key) + ": \"" +
                                 std::string(v) + "\"");
    }
}

std::int64_t parse_int(std::string_view key, std::string_view v) {
    std::int64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        throw InvalidConfigError("config: bad integer for " + std::string(key) + ": \"" +
                                 std::string(v) + "\"");
    }
    return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        throw InvalidConfigError("config: bad unsigned integer for " + std::string(key) + ": \"" +
                                 std::string(v) + "\"");
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw InvalidConfigError("config: bad boolean for " + std::string(key) + ": \"" +
                             std::string(v) + "\"");
}

void set_field(RunConfig& cfg, std::string_view section, std::string_view key,
               std::string_view value) {
    const std::string full = std::string(section) + "." + std::string(key);
    if (section == "scene") {
        if (key == "width") cfg.scene.width = static_cast<std::uint16_t>(parse_int(full, value));
        else if (key == "height") cfg.scene.height = static_cast<std::uint16_t>(parse_int(full, value));
        else if (key == "kind") cfg.scene.kind = shape_kind_from(value);
        else if (key == "shape_size") cfg.scene.shape_size = static_cast<int>(parse_int(full, value));
        else if (key == "speed") cfg.scene.speed = parse_double(full, value);
        else if (key == "contrast_rate") cfg.scene.contrast_rate = parse_double(full, value);
        else if (key == "noise_rate") cfg.scene.noise_rate = parse_double(full, value);
        else if (key == "duration_steps") cfg.scene.duration_steps = static_cast<int>(parse_int(full, value));
        else if (key == "step_us") cfg.scene.step_us = parse_u64(full, value);
        else throw InvalidConfigError("config: unknown key " + full);
    } else if (section == "data") {
        if (key == "train_count") cfg.train_count = static_cast<int>(parse_int(full, value));
        else if (key == "test_count") cfg.test_count = static_cast<int>(parse_int(full, value));
        else if (key == "train_seed_base") cfg.train_seed_base = parse_u64(full, value);
        else if (key == "test_seed_base") cfg.test_seed_base = parse_u64(full, value);
        else throw InvalidConfigError("config: unknown key " + full);
    } else if (section == "model") {
        if (key == "arm") {
            cfg.model.arm = embed_arm_from(value);
            switch (cfg.model.arm) {
                case EmbedArm::snn: cfg.model.sampler.mode = SamplerMode::snn; break;
                case EmbedArm::rsnn: cfg.model.sampler.mode = SamplerMode::rsnn; break;
                default: cfg.model.sampler.mode = SamplerMode::arsnn; break;
            }
        } else if (key == "rpd") cfg.model.rpd = parse_bool(full, value);
        else if (key == "sat") cfg.model.sat = parse_bool(full, value);
        else if (key == "slot_count") cfg.model.slot_count = static_cast<int>(parse_int(full, value));
        else throw InvalidConfigError("config: unknown key " + full);
    } else if (section == "sampler") {
        if (key == "kernel") cfg.model.sampler.kernel = static_cast<int>(parse_int(full, value));
        else if (key == "theta") cfg.model.sampler.theta = parse_double(full, value);
        else if (key == "snn_decay") cfg.model.sampler.snn_decay = parse_double(full, value);
        else if (key == "surrogate") cfg.model.sampler.surrogate.kind = surrogate_kind_from(value);
        else if (key == "alpha") cfg.model.sampler.surrogate.alpha = parse_double(full, value);
        else throw InvalidConfigError("config: unknown key " + full);
    } else if (section == "head") {
        if (key == "channels") cfg.model.head.channels = static_cast<int>(parse_int(full, value));
        else if (key == "kernel") cfg.model.head.kernel = static_cast<int>(parse_int(full, value));
        else if (key == "spiking") cfg.model.head.spiking = parse_bool(full, value);
        else if (key == "theta") cfg.model.head.theta = parse_double(full, value);
        else if (key == "dt_over_tau") cfg.model.head.dt_over_tau = parse_double(full, value);
        else if (key == "surrogate") cfg.model.head.surrogate.kind = surrogate_kind_from(value);
        else if (key == "alpha") cfg.model.head.surrogate.alpha = parse_double(full, value);
        else throw InvalidConfigError("config: unknown key " + full);
    } else if (section == "train") {
        if (key == "steps") cfg.train.steps = static_cast<int>(parse_int(full, value));
        else if (key == "batch") cfg.train.batch = static_cast<int>(parse_int(full, value));
        else if (key == "lr") cfg.train.lr = parse_double(full, value);
        else if (key == "ema_momentum") cfg.train.ema_momentum = parse_double(full, value);
        else if (key == "seed") cfg.train.seed = parse_u64(full, value);
        else if (key == "t_m") cfg.train.t_m = static_cast<int>(parse_int(full, value));
        else if (key == "eval_every") cfg.train.eval_every = static_cast<int>(parse_int(full, value));
        else if (key == "eval_subset") cfg.train.eval_subset = static_cast<int>(parse_int(full, value));
        else if (key == "threads") cfg.train.threads = static_cast<int>(parse_int(full, value));
        else throw InvalidConfigError("config: unknown key " + full);
    } else if (section == "output") {
        if (key == "dir") cfg.out_dir = std::string(value);
        else throw InvalidConfigError("config: unknown key " + full);
    } else {
        throw InvalidConfigError("config: unknown section [" + std::string(section) + "]");
    }
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void RunConfig::validate() const {
    scene.validate();
    model.validate();
    train.validate();
    if (train_count < 1 || test_count < 1) {
        throw InvalidConfigError("config: dataset sizes must be >= 1");
    }
    if (out_dir.empty()) throw InvalidConfigError("config: output dir must not be empty");
}

std::vector<SceneConfig> RunConfig::train_scenes() const {
    return dataset_scenes(scene, train_seed_base, train_count);
}

std::vector<SceneConfig> RunConfig::test_scenes() const {
    return dataset_scenes(scene, test_seed_base, test_count);
}

RunConfig parse_run_config(std::string_view text) {
    RunConfig cfg;
    std::string section;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        ++line_no;
        const std::size_t eol = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() : eol + 1;
        const std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw InvalidConfigError("config line " + std::to_string(line_no) +
                                         ": malformed section header");
            }
            section = std::string(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw InvalidConfigError("config line " + std::to_string(line_no) +
                                     ": expected key = value");
        }
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        if (section.empty()) {
            throw InvalidConfigError("config line " + std::to_string(line_no) +
                                     ": key outside any section");
        }
        set_field(cfg, section, key, value);
    }
    return cfg;
}

std::string emit_run_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "[scene]\n";
    out << "width = " << cfg.scene.width << "\n";
    out << "height = " << cfg.scene.height << "\n";
    out << "kind = " << to_string(cfg.scene.kind) << "\n";
    out << "shape_size = " << cfg.scene.shape_size << "\n";
    out << "speed = " << fmt_double(cfg.scene.speed) << "\n";
    out << "contrast_rate = " << fmt_double(cfg.scene.contrast_rate) << "\n";
    out << "noise_rate = " << fmt_double(cfg.scene.noise_rate) << "\n";
    out << "duration_steps = " << cfg.scene.duration_steps << "\n";
    out << "step_us = " << cfg.scene.step_us << "\n";
    out << "\n[data]\n";
    out << "train_count = " << cfg.train_count << "\n";
    out << "test_count = " << cfg.test_count << "\n";
    out << "train_seed_base = " << cfg.train_seed_base << "\n";
    out << "test_seed_base = " << cfg.test_seed_base << "\n";
    out << "\n[model]\n";
    out << "arm = " << to_string(cfg.model.arm) << "\n";
    out << "rpd = " << (cfg.model.rpd ? "true" : "false") << "\n";
    out << "sat = " << (cfg.model.sat ? "true" : "false") << "\n";
    out << "slot_count = " << cfg.model.slot_count << "\n";
    out << "\n[sampler]\n";
    out << "kernel = " << cfg.model.sampler.kernel << "\n";
    out << "theta = " << fmt_double(cfg.model.sampler.theta) << "\n";
    out << "snn_decay = " << fmt_double(cfg.model.sampler.snn_decay) << "\n";
    out << "surrogate = " << to_string(cfg.model.sampler.surrogate.kind) << "\n";
    out << "alpha = " << fmt_double(cfg.model.sampler.surrogate.alpha) << "\n";
    out << "\n[head]\n";
    out << "channels = " << cfg.model.head.channels << "\n";
    out << "kernel = " << cfg.model.head.kernel << "\n";
    out << "spiking = " << (cfg.model.head.spiking ? "true" : "false") << "\n";
    out << "theta = " << fmt_double(cfg.model.head.theta) << "\n";
    out << "dt_over_tau = " << fmt_double(cfg.model.head.dt_over_tau) << "\n";
    out << "surrogate = " << to_string(cfg.model.head.surrogate.kind) << "\n";
    out << "alpha = " << fmt_double(cfg.model.head.surrogate.alpha) << "\n";
    out << "\n[train]\n";
    out << "steps = " << cfg.train.steps << "\n";
    out << "batch = " << cfg.train.batch << "\n";
    out << "lr = " << fmt_double(cfg.train.lr) << "\n";
    out << "ema_momentum = " << fmt_double(cfg.train.ema_momentum) << "\n";
    out << "seed = " << cfg.train.seed << "\n";
    out << "t_m = " << cfg.train.t_m << "\n";
    out << "eval_every = " << cfg.train.eval_every << "\n";
    out << "eval_subset = " << cfg.train.eval_subset << "\n";
    out << "threads = " << cfg.train.threads << "\n";
    out << "\n[output]\n";
    out << "dir = " << cfg.out_dir << "\n";
    return out.str();
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw InvalidConfigError("override must look like section.key=value: \"" +
                                 std::string(assignment) + "\"");
    }
    const std::string_view path = trim(assignment.substr(0, eq));
    const std::string_view value = trim(assignment.substr(eq + 1));
    const std::size_t dot = path.find('.');
    if (dot == std::string_view::npos) {
        throw InvalidConfigError("override key needs a section prefix: \"" + std::string(path) +
                                 "\"");
    }
    set_field(cfg, path.substr(0, dot), path.substr(dot + 1), value);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open config " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_run_config(buf.str());
}

}  // namespace evs
