#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "evsamp/events.hpp"

namespace evs {

// Ground-truth box for a single-object stream, pixel units, annotated at t.
struct ToyAnnotation {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
    int label = 0;
    std::uint64_t t = 0;
};

enum class ShapeKind { square, bar };

std::string to_string(ShapeKind kind);
ShapeKind shape_kind_from(std::string_view name);

// One moving-shape scene. The shape drifts with per-stream jittered speed and
// heading, bounces off the borders, and halts at a seed-drawn fraction of the
// stream; edges emit contrast events while it moves, noise runs throughout.
struct SceneConfig {
    std::uint16_t width = 32;
    std::uint16_t height = 32;
    ShapeKind kind = ShapeKind::square;
    int shape_size = 8;
    double speed = 1.0;           // px per step before jitter
    double contrast_rate = 1.2;   // mean events per edge-transition pixel
    double noise_rate = 0.0;      // per pixel, per step, per polarity
    int duration_steps = 64;
    std::uint64_t step_us = 1000;
    std::uint64_t seed = 0;

    void validate() const;
    std::uint64_t duration_us() const {
        return static_cast<std::uint64_t>(duration_steps) * step_us;
    }
};

// Deterministic per cfg.seed. ON events where the shape newly covers a pixel,
// OFF where it uncovers one; annotation is the shape box at stream end.
std::pair<EventStream, ToyAnnotation> gen_synthetic(const SceneConfig& cfg);

}  // namespace evs
