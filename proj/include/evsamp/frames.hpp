#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evsamp/events.hpp"

namespace evs {

// Dense (C, H, W) tensor over one time slice, row-major. Count frames keep
// non-negative integers stored as doubles.
struct FrameTensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::uint64_t t_start = 0;
    std::uint64_t t_end = 0;
    std::vector<double> data;  // size channels*height*width

    static FrameTensor zeros(int c, int h, int w);
    double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    double sum() const;
};

// Contiguous non-overlapping slices covering (t-T, t], oldest first.
struct FrameSequence {
    std::vector<FrameTensor> frames;
    int step_count = 0;          // T_m
    std::uint64_t slice_us = 0;  // delta t_m
    std::uint64_t t_start = 0;   // global window start (t - T)
};

// A set of events with the slice bounds they were drawn from.
struct SliceRef {
    std::span<const Event> events;
    std::uint64_t t_start = 0;
    std::uint64_t t_end = 0;
};

// Fixed-window sampling: slice j holds indices of events with
// t-(j+1)*slice_us <= t_i < t-j*slice_us, j=0 newest. Requires slice_us | window_us
// and t >= window_us.
std::vector<std::vector<std::size_t>> fixed_window_sample(const EventStream& stream,
                                                          std::uint64_t t,
                                                          std::uint64_t window_us,
                                                          std::uint64_t slice_us);

// Per-(x, y, p) event count histogram.
FrameTensor event_count(const SliceRef& slice, int width, int height);

// Event-count frames over T_m equal slices of the window ending at t,
// oldest first. Slices bin as [lo, hi); the final slice also takes events
// at exactly t.
FrameSequence early_aggregate(const EventStream& stream, std::uint64_t t,
                              std::uint64_t window_us, int step_count);

// Bilinear-kernel voxel grid with bin_count bins per polarity; channel
// layout is polarity-major (c = p*bin_count + b).
FrameTensor voxel_grid(const SliceRef& slice, int width, int height, int bin_count);

// Exponential-decay time surface: exp(-(t_end - t_last)/tau) per (x, y, p).
FrameTensor time_surface(const SliceRef& slice, int width, int height, std::uint64_t tau_us);

// Stacked per-micro-interval count frames; channel c = p*cube_bins + b.
FrameTensor voxel_cube(const SliceRef& slice, int width, int height, int cube_bins);

// FRM1 container: magic "FRM1", u16 C/H/W, u64 t_start/t_end, then
// row-major little-endian f32 payload.
std::vector<std::uint8_t> write_frame(const FrameTensor& frame);
FrameTensor read_frame(std::span<const std::uint8_t> bytes);

}  // namespace evs
