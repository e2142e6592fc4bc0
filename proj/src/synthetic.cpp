#include "evsamp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "evsamp/rng.hpp"

namespace evs {

std::string to_string(ShapeKind kind) {
    return kind == ShapeKind::square ? "square" : "bar";
}

ShapeKind shape_kind_from(std::string_view name) {
    if (name == "square") return ShapeKind::square;
    if (name == "bar") return ShapeKind::bar;
    throw InvalidConfigError("unknown shape kind \"" + std::string(name) + "\"");
}

namespace {

struct Extent {
    int w = 0;
    int h = 0;
};

Extent shape_extent(const SceneConfig& cfg) {
    if (cfg.shape_size == 0) return {0, 0};
    if (cfg.kind == ShapeKind::square) return {cfg.shape_size, cfg.shape_size};
    return {cfg.shape_size * 2, std::max(1, cfg.shape_size / 2)};
}

// Integer occupancy box for a top-left corner position.
struct Box {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open [x0,x1) x [y0,y1)

    bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
    bool empty() const { return x1 <= x0 || y1 <= y0; }
};

Box box_at(double ox, double oy, Extent ext) {
    const int x0 = static_cast<int>(std::llround(ox));
    const int y0 = static_cast<int>(std::llround(oy));
    return {x0, y0, x0 + ext.w, y0 + ext.h};
}

// Reflect pos into [0, limit]; velocity flips with each boundary hit.
void bounce(double& pos, double& vel, double limit) {
    if (limit <= 0.0) {
        pos = 0.0;
        return;
    }
    while (pos < 0.0 || pos > limit) {
        if (pos < 0.0) {
            pos = -pos;
            vel = -vel;
        } else {
            pos = 2.0 * limit - pos;
            vel = -vel;
        }
    }
}

}  // namespace

void SceneConfig::validate() const {
    if (width == 0 || height == 0) throw InvalidConfigError("scene: sensor must be non-empty");
    if (shape_size < 0) throw InvalidConfigError("scene: shape_size must be >= 0");
    if (speed < 0.0 || !std::isfinite(speed)) {
        throw InvalidConfigError("scene: speed must be finite and >= 0");
    }
    if (contrast_rate < 0.0 || noise_rate < 0.0) {
        throw InvalidConfigError("scene: event rates must be >= 0");
    }
    if (noise_rate > 1.0) throw InvalidConfigError("scene: noise_rate is a per-cell probability");
    if (duration_steps < 1) throw InvalidConfigError("scene: duration_steps must be >= 1");
    if (step_us == 0 || step_us > 0xffffffffull) {
        throw InvalidConfigError("scene: step_us must be in [1, 2^32)");
    }
    const Extent ext = shape_extent(*this);
    if (ext.w > width || ext.h > height) {
        throw InvalidConfigError("scene: shape does not fit the sensor");
    }
}

std::pair<EventStream, ToyAnnotation> gen_synthetic(const SceneConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const Extent ext = shape_extent(cfg);
    const double lim_x = static_cast<double>(cfg.width - ext.w);
    const double lim_y = static_cast<double>(cfg.height - ext.h);

    double ox = rng.uniform(0.0, lim_x);
    double oy = rng.uniform(0.0, lim_y);
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double v = cfg.speed * rng.uniform(0.7, 1.3);
    // Per-stream rate spread; fixed windows see a wide input-scale range
    // while spike-triggered windows renormalise it away.
    const double contrast = cfg.contrast_rate * rng.uniform(0.5, 2.0);
    const double noise = cfg.noise_rate;
    double vx = v * std::cos(angle);
    double vy = v * std::sin(angle);
    // The shape enters the scene partway through and halts before the end, so
    // the span that carries the box signal sits at a different position in
    // every stream.
    const int on_step =
        static_cast<int>(std::floor(rng.uniform(0.1, 0.5) * cfg.duration_steps));
    const int halt_step =
        static_cast<int>(std::floor(rng.uniform(0.6, 0.9) * cfg.duration_steps));

    struct Pending {
        std::uint64_t t;
        std::uint16_t x, y;
        std::uint8_t p;
    };
    std::vector<Event> events;
    std::vector<Pending> step_events;
    Box prev{};  // empty until the shape enters

    for (int step = 0; step < cfg.duration_steps; ++step) {
        const std::uint64_t base_t = static_cast<std::uint64_t>(step) * cfg.step_us;
        step_events.clear();

        if (step > on_step && step <= halt_step) {
            ox += vx;
            oy += vy;
            bounce(ox, vx, lim_x);
            bounce(oy, vy, lim_y);
        }
        const Box cur = step >= on_step ? box_at(ox, oy, ext) : Box{};

        const bool moved = cur.x0 != prev.x0 || cur.y0 != prev.y0 ||
                           cur.x1 != prev.x1 || cur.y1 != prev.y1;
        if (moved) {
            // Scan the union of both boxes; covered pixels emit ON, uncovered OFF.
            const int ux0 = std::min(prev.x0, cur.x0), ux1 = std::max(prev.x1, cur.x1);
            const int uy0 = std::min(prev.y0, cur.y0), uy1 = std::max(prev.y1, cur.y1);
            for (int y = uy0; y < uy1; ++y) {
                for (int x = ux0; x < ux1; ++x) {
                    const bool was = prev.contains(x, y);
                    const bool now = cur.contains(x, y);
                    if (was == now) continue;
                    const int n = rng.poisson(contrast);
                    for (int i = 0; i < n; ++i) {
                        step_events.push_back({base_t + rng.below(static_cast<std::uint32_t>(
                                                           cfg.step_us)),
                                               static_cast<std::uint16_t>(x),
                                               static_cast<std::uint16_t>(y),
                                               static_cast<std::uint8_t>(now ? 1 : 0)});
                    }
                }
            }
        }
        prev = cur;

        if (noise > 0.0) {
            for (std::uint16_t y = 0; y < cfg.height; ++y) {
                for (std::uint16_t x = 0; x < cfg.width; ++x) {
                    for (std::uint8_t p = 0; p < 2; ++p) {
                        if (!rng.bernoulli(noise)) continue;
                        step_events.push_back(
                            {base_t + rng.below(static_cast<std::uint32_t>(cfg.step_us)), x, y,
                             p});
                    }
                }
            }
        }

        std::stable_sort(step_events.begin(), step_events.end(),
                         [](const Pending& a, const Pending& b) { return a.t < b.t; });
        for (const Pending& pe : step_events) {
            events.push_back(Event{pe.x, pe.y, pe.p, pe.t});
        }
    }

    ToyAnnotation ann;
    if (prev.empty()) {
        ann.label = -1;  // object-free stream (zero-size shape)
    } else {
        ann.cx = 0.5 * (prev.x0 + prev.x1);
        ann.cy = 0.5 * (prev.y0 + prev.y1);
        ann.w = static_cast<double>(prev.x1 - prev.x0);
        ann.h = static_cast<double>(prev.y1 - prev.y0);
    }
    ann.t = cfg.duration_us();
    return {EventStream(std::move(events), cfg.width, cfg.height), ann};
}

}  // namespace evs
