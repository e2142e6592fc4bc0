#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "evsamp/sampler.hpp"
#include "evsamp/synthetic.hpp"

namespace evs {

// Embedding source feeding the shared detection head. The first three run
// the sampler; count skips it and feeds equal-partition event-count sums.
enum class EmbedArm { arsnn, rsnn, snn, count };

std::string_view to_string(EmbedArm arm);
EmbedArm embed_arm_from(std::string_view name);

struct HeadConfig {
    int channels = 8;
    int kernel = 3;
    bool spiking = true;
    double theta = 0.5;        // slot LIF threshold
    double dt_over_tau = 0.5;  // slot LIF leak
    SurrogateSpec surrogate{SurrogateKind::atan, 2.0};

    void validate() const;
};

struct ModelConfig {
    EmbedArm arm = EmbedArm::arsnn;
    bool rpd = true;
    bool sat = true;
    int slot_count = 3;  // K
    SamplerConfig sampler;
    HeadConfig head;

    void validate() const;
    bool uses_sampler() const { return arm != EmbedArm::count; }
};

// Sampler parameters (when the arm uses them) plus head.w1/b1/w2/b2.
// Weight init is uniform +-1/sqrt(fan_in); biases start at zero.
ParamSet init_model_params(const ModelConfig& cfg, std::uint64_t seed);

struct ForwardResult {
    ValueId logits = -1;  // shape (5)
    EmbeddingSequence embedding;
    SamplerTrace trace;                              // empty for the count arm
    std::vector<std::vector<SampleWindow>> windows;  // arsnn only
};

// Full pipeline on one stream's count frames: embedding source per cfg.arm,
// then two convs with coordinate channels, slot-sequential LIF (or ReLU),
// accumulation, and global pooling down to 5 logits.
ForwardResult model_forward(Tape& tape, const BoundParams& bound, const ModelConfig& cfg,
                            const FrameSequence& frames);

struct Prediction {
    double objectness = 0.0;
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;  // pixels
};

// Sigmoid scaling map: objectness = sigma(z0); box = sigma(z1..z4) * (W,H,W,H).
Prediction predict_from_logits(const Tensor& logits, int width, int height);

// Loss target in normalized coordinates; an object-free annotation (label < 0)
// maps to objectness 0 with the box term switched off.
std::array<double, 5> detection_target(const ToyAnnotation& ann, int width, int height);

}  // namespace evs
