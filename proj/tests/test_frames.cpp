#include <doctest.h>

#include <cmath>
#include <vector>

#include "evsamp/errors.hpp"
#include "evsamp/frames.hpp"
#include "evsamp/rng.hpp"

using namespace evs;

namespace {

EventStream random_stream(std::uint64_t seed, std::size_t n, int w, int h, std::uint32_t max_gap) {
    Rng rng(seed);
    std::vector<Event> events;
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < n; ++i) {
        t += rng.below(max_gap);
        events.push_back(Event{static_cast<std::uint16_t>(rng.below(static_cast<std::uint32_t>(w))),
                               static_cast<std::uint16_t>(rng.below(static_cast<std::uint32_t>(h))),
                               static_cast<std::uint8_t>(rng.below(2)), t});
    }
    return EventStream(std::move(events), w, h);
}

SliceRef whole_stream_slice(const EventStream& s, std::uint64_t t_start, std::uint64_t t_end) {
    return SliceRef{s.span(), t_start, t_end};
}

}  // namespace

TEST_CASE("fixed window slicing matches the worked example") {
    const EventStream s({Event{0, 0, 0, 10}, Event{1, 1, 1, 25}, Event{2, 2, 0, 40}}, 8, 8);
    const auto slices = fixed_window_sample(s, 50, 40, 20);
    REQUIRE(slices.size() == 2);
    CHECK(slices[0] == std::vector<std::size_t>{2});
    CHECK(slices[1] == std::vector<std::size_t>{0, 1});
}

TEST_CASE("fixed window slicing of an empty stream yields empty slices") {
    const auto slices = fixed_window_sample(EventStream({}, 4, 4), 100, 60, 20);
    REQUIRE(slices.size() == 3);
    for (const auto& slice : slices) CHECK(slice.empty());
}

TEST_CASE("fixed window slicing validates its window") {
    const EventStream s({}, 4, 4);
    CHECK_THROWS_AS(fixed_window_sample(s, 100, 60, 0), InvalidWindowError);
    CHECK_THROWS_AS(fixed_window_sample(s, 100, 50, 20), InvalidWindowError);
    CHECK_THROWS_AS(fixed_window_sample(s, 40, 60, 20), InvalidWindowError);
}

TEST_CASE("fixed window slicing equals per-event brute-force binning") {
    const EventStream s = random_stream(42, 1000, 16, 16, 50);
    const std::uint64_t t = s.duration_us() + 10;
    const std::uint64_t window = (t / 8) * 8;
    const std::uint64_t slice = window / 8;
    const auto slices = fixed_window_sample(s, t, window, slice);

    for (std::size_t j = 0; j < slices.size(); ++j) {
        std::vector<std::size_t> expected;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const std::uint64_t ti = s.events()[i].t;
            if (t - (j + 1) * slice <= ti && ti < t - j * slice) expected.push_back(i);
        }
        CHECK(slices[j] == expected);
    }
    std::size_t covered = 0;
    for (const auto& sl : slices) covered += sl.size();
    std::size_t in_window = 0;
    for (const Event& e : s.events())
        if (e.t >= t - window && e.t < t) ++in_window;
    CHECK(covered == in_window);
}

TEST_CASE("event count tallies per bin") {
    const EventStream s({Event{1, 2, 0, 5}, Event{1, 2, 0, 9}, Event{0, 0, 1, 9}}, 4, 4);
    const FrameTensor f = event_count(whole_stream_slice(s, 0, 10), 4, 4);
    CHECK(f.at(0, 2, 1) == 2.0);
    CHECK(f.at(1, 0, 0) == 1.0);
    CHECK(f.sum() == 3.0);

    const FrameTensor empty = event_count(SliceRef{{}, 0, 10}, 4, 4);
    CHECK(empty.sum() == 0.0);
}

TEST_CASE("event count equals brute-force tally on random slices") {
    const EventStream s = random_stream(9, 500, 12, 10, 30);
    const FrameTensor f = event_count(whole_stream_slice(s, 0, s.duration_us()), 12, 10);
    std::vector<double> tally(2 * 10 * 12, 0.0);
    for (const Event& e : s.events()) tally[(e.p * 10 + e.y) * 12 + e.x] += 1.0;
    CHECK(f.data == tally);
}

TEST_CASE("early aggregation splits the window into equal count frames") {
    std::vector<Event> events;
    for (int i = 0; i < 10; ++i)
        events.push_back(Event{1, 1, 1, 7200 + static_cast<std::uint64_t>(i) * 10});
    const EventStream s(std::move(events), 4, 4);

    const FrameSequence seq = early_aggregate(s, 8000, 8000, 8);
    REQUIRE(seq.frames.size() == 8);
    CHECK(seq.slice_us == 1000);
    CHECK(seq.t_start == 0);
    for (int k = 0; k < 7; ++k) CHECK(seq.frames[static_cast<std::size_t>(k)].sum() == 0.0);
    CHECK(seq.frames[7].sum() == 10.0);
    CHECK(seq.frames[7].t_start == 7000);
    CHECK(seq.frames[7].t_end == 8000);
}

TEST_CASE("early aggregation conserves event counts") {
    const EventStream s = random_stream(13, 800, 8, 8, 25);
    const std::uint64_t window = ((s.duration_us() + 8) / 8) * 8;
    const FrameSequence seq = early_aggregate(s, window, window, 8);
    double total = 0.0;
    for (const FrameTensor& f : seq.frames) total += f.sum();
    std::size_t in_window = 0;
    for (const Event& e : s.events())
        if (e.t <= window) ++in_window;  // window starts at 0 here
    CHECK(total == static_cast<double>(in_window));

    CHECK_THROWS_AS(early_aggregate(s, window, window, 0), InvalidWindowError);
    CHECK_THROWS_AS(early_aggregate(s, 100, 30, 7), InvalidWindowError);
}

TEST_CASE("voxel grid puts unit mass at bin centers and splits between bins") {
    // span 0..400 with 5 bins: bin centers every 100 us
    const EventStream center({Event{1, 1, 0, 200}}, 4, 4);
    FrameTensor f = voxel_grid(whole_stream_slice(center, 0, 400), 4, 4, 5);
    CHECK(f.at(2, 1, 1) == doctest::Approx(1.0));
    CHECK(f.sum() == doctest::Approx(1.0));

    const EventStream mid({Event{1, 1, 0, 250}}, 4, 4);
    f = voxel_grid(whole_stream_slice(mid, 0, 400), 4, 4, 5);
    CHECK(f.at(2, 1, 1) == doctest::Approx(0.5));
    CHECK(f.at(3, 1, 1) == doctest::Approx(0.5));
}

TEST_CASE("voxel grid equals a direct kernel evaluation") {
    const EventStream s = random_stream(21, 300, 6, 6, 40);
    const std::uint64_t t_end = s.duration_us() + 3;
    const int bins = 5;
    const FrameTensor f = voxel_grid(whole_stream_slice(s, 0, t_end), 6, 6, bins);

    std::vector<double> expect(static_cast<std::size_t>(2 * bins) * 6 * 6, 0.0);
    for (const Event& e : s.events()) {
        const double tstar = static_cast<double>(e.t) / static_cast<double>(t_end) * (bins - 1);
        for (int b = 0; b < bins; ++b) {
            const double w = 1.0 - std::abs(b - tstar);
            if (w > 0.0)
                expect[((static_cast<std::size_t>(e.p) * bins + b) * 6 + e.y) * 6 + e.x] += w;
        }
    }
    REQUIRE(f.data.size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i)
        CHECK(f.data[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    CHECK(f.sum() <= static_cast<double>(s.size()) + 1e-9);

    CHECK_THROWS_AS(voxel_grid(whole_stream_slice(s, 5, 5), 6, 6, bins), DegenerateWindowError);
}

TEST_CASE("time surface decays from the latest event per bin") {
    const EventStream s({Event{0, 0, 1, 100}, Event{0, 0, 1, 300}, Event{2, 2, 0, 400}}, 4, 4);
    const FrameTensor f = time_surface(whole_stream_slice(s, 0, 400), 4, 4, 200);
    CHECK(f.at(0, 2, 2) == doctest::Approx(1.0));  // zero age
    CHECK(f.at(1, 0, 0) == doctest::Approx(std::exp(-0.5)));  // latest at 300, age 100
    CHECK(f.at(1, 1, 1) == 0.0);
    for (double v : f.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("time surface equals a brute-force latest-timestamp scan") {
    const EventStream s = random_stream(31, 400, 8, 8, 20);
    const std::uint64_t t_end = s.duration_us();
    const FrameTensor f = time_surface(whole_stream_slice(s, 0, t_end), 8, 8, 150);

    for (int p = 0; p < 2; ++p)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                bool any = false;
                std::uint64_t latest = 0;
                for (const Event& e : s.events())
                    if (e.p == p && e.y == y && e.x == x && (!any || e.t >= latest)) {
                        any = true;
                        latest = e.t;
                    }
                const double expect =
                    any ? std::exp(-static_cast<double>(t_end - latest) / 150.0) : 0.0;
                CHECK(f.at(p, y, x) == doctest::Approx(expect).epsilon(1e-12));
            }
}

TEST_CASE("voxel cube with one bin degenerates to the event count") {
    const EventStream s = random_stream(17, 200, 6, 6, 30);
    const SliceRef slice = whole_stream_slice(s, 0, s.duration_us() + 1);
    CHECK(voxel_cube(slice, 6, 6, 1).data == event_count(slice, 6, 6).data);
}

TEST_CASE("voxel cube channel layout and channel-sum conservation") {
    const EventStream one({Event{1, 1, 1, 10}}, 4, 4);
    const FrameTensor f = voxel_cube(whole_stream_slice(one, 0, 300), 4, 4, 3);
    CHECK(f.at(1 * 3 + 0, 1, 1) == 1.0);  // first micro-interval of polarity 1
    CHECK(f.sum() == 1.0);

    const EventStream s = random_stream(23, 600, 8, 8, 15);
    const SliceRef slice = whole_stream_slice(s, 0, s.duration_us());
    const FrameTensor cube = voxel_cube(slice, 8, 8, 4);
    const FrameTensor count = event_count(slice, 8, 8);
    for (int p = 0; p < 2; ++p)
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                double acc = 0.0;
                for (int b = 0; b < 4; ++b) acc += cube.at(p * 4 + b, y, x);
                CHECK(acc == count.at(p, y, x));
            }
}

TEST_CASE("frame bytes round-trip and reject corruption") {
    const EventStream s = random_stream(5, 120, 10, 6, 25);
    FrameTensor f = event_count(whole_stream_slice(s, 0, s.duration_us()), 10, 6);
    f.t_start = 40;
    f.t_end = 90;

    const auto bytes = write_frame(f);
    const FrameTensor back = read_frame(bytes);
    CHECK(back.channels == f.channels);
    CHECK(back.height == f.height);
    CHECK(back.width == f.width);
    CHECK(back.t_start == 40);
    CHECK(back.t_end == 90);
    CHECK(back.data == f.data);  // counts survive the f32 payload exactly

    auto bad = bytes;
    bad[0] = 'Z';
    CHECK_THROWS_AS(read_frame(bad), BadMagicError);
    auto cut = bytes;
    cut.resize(cut.size() - 1);
    CHECK_THROWS_AS(read_frame(cut), TruncatedPayloadError);
    CHECK_THROWS_AS(read_frame(std::vector<std::uint8_t>{'F', 'R'}), TruncatedPayloadError);
}
