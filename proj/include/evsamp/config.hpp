#pragma once

#include <string>
#include <string_view>

#include "evsamp/train.hpp"

namespace evs {

// Everything one experiment needs, loadable from a sectioned key-value file.
struct RunConfig {
    SceneConfig scene;
    ModelConfig model;
    TrainConfig train;
    int train_count = 2000;
    int test_count = 500;
    std::uint64_t train_seed_base = 1000000;
    std::uint64_t test_seed_base = 9000000;
    std::string out_dir = "out";

    void validate() const;
    std::vector<SceneConfig> train_scenes() const;
    std::vector<SceneConfig> test_scenes() const;
};

// "[section]" headers with "key = value" lines; '#' starts a comment. The
// emitter writes every field in a fixed order, so emit(parse(emit(c))) is
// byte-identical to emit(c). The embedding arm drives the sampler mode.
RunConfig parse_run_config(std::string_view text);
std::string emit_run_config(const RunConfig& cfg);

// One "section.key=value" assignment, as given by a command-line override.
void apply_override(RunConfig& cfg, std::string_view assignment);

RunConfig load_run_config(const std::string& path);

}  // namespace evs
