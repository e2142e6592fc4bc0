#include "evsamp/frames.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <ranges>

#include "evsamp/errors.hpp"

namespace evs {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(std::span<const std::uint8_t> in, std::size_t off) {
    return static_cast<std::uint16_t>(in[off] | (in[off + 1] << 8));
}

std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t off) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[off + i]) << (8 * i);
    return v;
}

// First index with t_i >= t.
std::size_t lower_index(std::span<const Event> events, std::uint64_t t) {
    return static_cast<std::size_t>(std::ranges::lower_bound(events, t, {}, &Event::t) - events.begin());
}

// First index with t_i > t.
std::size_t upper_index(std::span<const Event> events, std::uint64_t t) {
    return static_cast<std::size_t>(std::ranges::upper_bound(events, t, {}, &Event::t) - events.begin());
}

void check_slice_bounds(const SliceRef& slice, int width, int height) {
    for (const Event& e : slice.events) {
        if (e.x >= width || e.y >= height)
            throw OutOfBoundsError("slice event outside declared sensor size");
        if (e.p > 1) throw OutOfBoundsError("slice event polarity out of range");
    }
}

}  // namespace

FrameTensor FrameTensor::zeros(int c, int h, int w) {
    FrameTensor f;
    f.channels = c;
    f.height = h;
    f.width = w;
    f.data.assign(static_cast<std::size_t>(c) * h * w, 0.0);
    return f;
}

double FrameTensor::sum() const {
    return std::accumulate(data.begin(), data.end(), 0.0);
}

std::vector<std::vector<std::size_t>> fixed_window_sample(const EventStream& stream,
                                                          std::uint64_t t,
                                                          std::uint64_t window_us,
                                                          std::uint64_t slice_us) {
    if (slice_us == 0) throw InvalidWindowError("slice duration must be positive");
    if (window_us % slice_us != 0) throw InvalidWindowError("slice duration must divide the window");
    if (t < window_us) throw InvalidWindowError("window extends before time zero");

    const std::size_t n_slices = window_us / slice_us;
    std::vector<std::vector<std::size_t>> slices(n_slices);
    std::span<const Event> events = stream.span();
    for (std::size_t j = 0; j < n_slices; ++j) {
        // Slice j, newest first: t - (j+1)*slice <= t_i < t - j*slice.
        const std::uint64_t lo = t - (j + 1) * slice_us;
        const std::uint64_t hi = t - j * slice_us;
        const std::size_t first = lower_index(events, lo);
        const std::size_t last = lower_index(events, hi);
        slices[j].resize(last - first);
        std::iota(slices[j].begin(), slices[j].end(), first);
    }
    return slices;
}

FrameTensor event_count(const SliceRef& slice, int width, int height) {
    check_slice_bounds(slice, width, height);
    FrameTensor f = FrameTensor::zeros(2, height, width);
    f.t_start = slice.t_start;
    f.t_end = slice.t_end;
    for (const Event& e : slice.events) f.at(e.p, e.y, e.x) += 1.0;
    return f;
}

FrameSequence early_aggregate(const EventStream& stream, std::uint64_t t,
                              std::uint64_t window_us, int step_count) {
    if (step_count < 1) throw InvalidWindowError("step count must be positive");
    if (window_us % static_cast<std::uint64_t>(step_count) != 0)
        throw InvalidWindowError("step count must divide the window");
    if (t < window_us) throw InvalidWindowError("window extends before time zero");

    const std::uint64_t slice_us = window_us / static_cast<std::uint64_t>(step_count);
    if (slice_us == 0) throw InvalidWindowError("slice duration must be positive");

    FrameSequence seq;
    seq.step_count = step_count;
    seq.slice_us = slice_us;
    seq.t_start = t - window_us;
    seq.frames.reserve(static_cast<std::size_t>(step_count));
    std::span<const Event> events = stream.span();
    for (int k = 0; k < step_count; ++k) {
        const std::uint64_t lo = seq.t_start + static_cast<std::uint64_t>(k) * slice_us;
        const std::uint64_t hi = lo + slice_us;
        const bool last = k == step_count - 1;
        const std::size_t first = lower_index(events, lo);
        const std::size_t past = last ? upper_index(events, hi) : lower_index(events, hi);
        SliceRef slice{events.subspan(first, past - first), lo, hi};
        seq.frames.push_back(event_count(slice, stream.width(), stream.height()));
    }
    return seq;
}

FrameTensor voxel_grid(const SliceRef& slice, int width, int height, int bin_count) {
    if (bin_count < 1) throw InvalidConfigError("voxel grid needs at least one bin");
    check_slice_bounds(slice, width, height);
    FrameTensor f = FrameTensor::zeros(2 * bin_count, height, width);
    f.t_start = slice.t_start;
    f.t_end = slice.t_end;
    if (slice.events.empty()) return f;
    if (slice.t_end == slice.t_start)
        throw DegenerateWindowError("zero-duration slice with events");

    const double span = static_cast<double>(slice.t_end - slice.t_start);
    for (const Event& e : slice.events) {
        const double tstar = static_cast<double>(e.t - slice.t_start) / span * (bin_count - 1);
        const int b0 = static_cast<int>(std::floor(tstar));
        for (int b : {b0, b0 + 1}) {
            if (b < 0 || b >= bin_count) continue;
            const double w = 1.0 - std::abs(b - tstar);
            if (w <= 0.0) continue;
            f.at(e.p * bin_count + b, e.y, e.x) += w;
        }
    }
    return f;
}

FrameTensor time_surface(const SliceRef& slice, int width, int height, std::uint64_t tau_us) {
    if (tau_us == 0) throw InvalidConfigError("time surface decay must be positive");
    check_slice_bounds(slice, width, height);
    FrameTensor f = FrameTensor::zeros(2, height, width);
    f.t_start = slice.t_start;
    f.t_end = slice.t_end;
    // Events arrive sorted, so the last write per bin is the latest timestamp.
    for (const Event& e : slice.events) {
        const std::uint64_t age = slice.t_end > e.t ? slice.t_end - e.t : 0;
        f.at(e.p, e.y, e.x) = std::exp(-static_cast<double>(age) / static_cast<double>(tau_us));
    }
    return f;
}

FrameTensor voxel_cube(const SliceRef& slice, int width, int height, int cube_bins) {
    if (cube_bins < 1) throw InvalidConfigError("voxel cube needs at least one bin");
    check_slice_bounds(slice, width, height);
    FrameTensor f = FrameTensor::zeros(2 * cube_bins, height, width);
    f.t_start = slice.t_start;
    f.t_end = slice.t_end;
    if (slice.events.empty()) return f;
    if (slice.t_end == slice.t_start)
        throw DegenerateWindowError("zero-duration slice with events");

    const std::uint64_t span = slice.t_end - slice.t_start;
    for (const Event& e : slice.events) {
        std::uint64_t b = (e.t - slice.t_start) * static_cast<std::uint64_t>(cube_bins) / span;
        if (b >= static_cast<std::uint64_t>(cube_bins)) b = cube_bins - 1;  // t == t_end
        f.at(e.p * cube_bins + static_cast<int>(b), e.y, e.x) += 1.0;
    }
    return f;
}

std::vector<std::uint8_t> write_frame(const FrameTensor& frame) {
    std::vector<std::uint8_t> out;
    out.reserve(26 + frame.data.size() * 4);
    out.insert(out.end(), {'F', 'R', 'M', '1'});
    put_u16(out, static_cast<std::uint16_t>(frame.channels));
    put_u16(out, static_cast<std::uint16_t>(frame.height));
    put_u16(out, static_cast<std::uint16_t>(frame.width));
    put_u64(out, frame.t_start);
    put_u64(out, frame.t_end);
    for (double v : frame.data) {
        const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
    }
    return out;
}

FrameTensor read_frame(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 26) throw TruncatedPayloadError("frame shorter than its header");
    if (!(bytes[0] == 'F' && bytes[1] == 'R' && bytes[2] == 'M' && bytes[3] == '1'))
        throw BadMagicError("not a FRM1 frame");

    FrameTensor f;
    f.channels = get_u16(bytes, 4);
    f.height = get_u16(bytes, 6);
    f.width = get_u16(bytes, 8);
    f.t_start = get_u64(bytes, 10);
    f.t_end = get_u64(bytes, 18);
    const std::size_t n = static_cast<std::size_t>(f.channels) * f.height * f.width;
    if (bytes.size() != 26 + n * 4) throw TruncatedPayloadError("frame payload size mismatch");
    f.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = 0;
        for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(bytes[26 + i * 4 + k]) << (8 * k);
        f.data[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return f;
}

}  // namespace evs
