#include <doctest.h>

#include <fstream>
#include <numeric>
#include <sstream>

#include "evsamp/errors.hpp"
#include "evsamp/events.hpp"
#include "evsamp/rng.hpp"

using namespace evs;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

EventStream random_stream(std::uint64_t seed, std::size_t n, int w, int h) {
    Rng rng(seed);
    std::vector<Event> events;
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < n; ++i) {
        t += rng.below(500);
        events.push_back(Event{static_cast<std::uint16_t>(rng.below(static_cast<std::uint32_t>(w))),
                               static_cast<std::uint16_t>(rng.below(static_cast<std::uint32_t>(h))),
                               static_cast<std::uint8_t>(rng.below(2)), t});
    }
    return EventStream(std::move(events), w, h);
}

}  // namespace

TEST_CASE("single text record parses to one event") {
    const EventStream s = parse_text_stream("1000,3,2,1\n", 8, 8);
    REQUIRE(s.size() == 1);
    CHECK(s.events()[0] == Event{3, 2, 1, 1000});
    CHECK(s.duration_us() == 1000);
}

TEST_CASE("empty input parses to empty stream") {
    const EventStream s = parse_text_stream("", 8, 8);
    CHECK(s.empty());
    CHECK(s.duration_us() == 0);
}

TEST_CASE("comments, blank lines and CRLF are accepted") {
    const EventStream s = parse_text_stream("# header\r\n\n10,0,0,0\r\n20,1,1,1\n# trailing\n", 4, 4);
    REQUIRE(s.size() == 2);
    CHECK(s.events()[1] == Event{1, 1, 1, 20});
}

TEST_CASE("malformed lines report their line number") {
    for (const char* bad : {"10,0,0\n", "10,0,0,0,0\n", "ten,0,0,0\n", "10,0,0,7\n", "10,0,0,0 junk\n"}) {
        const std::string text = std::string("# c\n5,0,0,0\n") + bad;
        CHECK_THROWS_AS(parse_text_stream(text, 4, 4), MalformedLineError);
        try {
            parse_text_stream(text, 4, 4);
        } catch (const MalformedLineError& e) {
            CHECK(e.line_no == 3);
        }
    }
}

TEST_CASE("bounds and ordering violations are rejected") {
    CHECK_THROWS_AS(parse_text_stream("10,4,0,0\n", 4, 4), OutOfBoundsError);
    CHECK_THROWS_AS(parse_text_stream("10,0,4,0\n", 4, 4), OutOfBoundsError);
    CHECK_THROWS_AS(parse_text_stream("10,0,0,0\n5,0,0,0\n", 4, 4), NonMonotonicTimestampError);
    CHECK_NOTHROW(parse_text_stream("10,0,0,0\n10,1,1,1\n", 4, 4));  // ties allowed
}

TEST_CASE("text round-trip preserves the stream") {
    const EventStream s = random_stream(11, 200, 32, 24);
    const EventStream back = parse_text_stream(write_text_stream(s), 32, 24);
    CHECK(back == s);
}

TEST_CASE("fixture file matches the independent reference parse") {
    const std::string text = read_file(std::string(TEST_DATA_DIR) + "/capture_64x48.txt");
    const EventStream s = parse_text_stream(text, 64, 48);

    REQUIRE(s.size() == 100);
    CHECK(s.events().front() == Event{13, 8, 0, 540});
    CHECK(s.events().back() == Event{25, 30, 0, 45222});
    CHECK(s.duration_us() == 45222);

    std::uint64_t sum_t = 0, sum_x = 0, sum_y = 0;
    for (const Event& e : s.events()) {
        sum_t += e.t;
        sum_x += e.x;
        sum_y += e.y;
    }
    CHECK(sum_t == 2350401);
    CHECK(sum_x == 3065);
    CHECK(sum_y == 2251);

    const StatsReport stats = stream_stats(s);
    CHECK(stats.event_count == 100);
    CHECK(stats.polarity_counts[0] == 42);
    CHECK(stats.polarity_counts[1] == 58);
    CHECK(stats.zero_bin_fraction == doctest::Approx(0.98388671875).epsilon(1e-12));
}

TEST_CASE("empty stream serializes to the 16-byte header") {
    const EventStream s(std::vector<Event>{}, 8, 8);
    const auto bytes = write_binary_stream(s);
    REQUIRE(bytes.size() == 16);
    CHECK(read_binary_stream(bytes) == s);
}

TEST_CASE("one-event stream round-trips through the binary format") {
    const EventStream s(std::vector<Event>{Event{3, 2, 1, 1000}}, 8, 8);
    const auto bytes = write_binary_stream(s);
    CHECK(bytes.size() == 16 + 16 + 4);
    CHECK(read_binary_stream(bytes) == s);
}

TEST_CASE("10k random events round-trip bit-exactly") {
    const EventStream s = random_stream(7, 10000, 640, 480);
    const auto bytes = write_binary_stream(s);
    const EventStream back = read_binary_stream(bytes);
    REQUIRE(back.size() == s.size());
    CHECK(back == s);
    CHECK(write_binary_stream(back) == bytes);
}

TEST_CASE("corrupt binary input is rejected by kind") {
    const EventStream s = random_stream(3, 50, 16, 16);
    auto bytes = write_binary_stream(s);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(read_binary_stream(bad_magic), BadMagicError);

    auto truncated = bytes;
    truncated.resize(truncated.size() - 5);
    CHECK_THROWS_AS(read_binary_stream(truncated), TruncatedPayloadError);

    auto flipped = bytes;
    flipped[16 + 3] ^= 0x40;  // inside the first record
    CHECK_THROWS_AS(read_binary_stream(flipped), ChecksumMismatchError);

    CHECK_THROWS_AS(read_binary_stream(std::vector<std::uint8_t>{'E', 'V'}), TruncatedPayloadError);
}

TEST_CASE("stats of an empty stream") {
    const StatsReport r = stream_stats(EventStream({}, 2, 2));
    CHECK(r.event_count == 0);
    CHECK(r.duration_us == 0);
    CHECK(r.zero_bin_fraction == 1.0);
}

TEST_CASE("stats of a single event on a 2x2 sensor") {
    const StatsReport r = stream_stats(EventStream({Event{0, 0, 1, 5}}, 2, 2));
    CHECK(r.event_count == 1);
    CHECK(r.polarity_counts[0] == 0);
    CHECK(r.polarity_counts[1] == 1);
    CHECK(r.zero_bin_fraction == doctest::Approx(7.0 / 8.0).epsilon(1e-12));
}

TEST_CASE("stats equal a brute-force tally on random streams") {
    for (std::uint64_t seed : {101u, 102u, 103u}) {
        const EventStream s = random_stream(seed, 400, 20, 10);
        const StatsReport r = stream_stats(s);

        std::uint64_t pol[2] = {0, 0};
        std::vector<int> touched(2 * 20 * 10, 0);
        for (const Event& e : s.events()) {
            ++pol[e.p];
            touched[(e.p * 10 + e.y) * 20 + e.x] = 1;
        }
        const int nonzero = std::accumulate(touched.begin(), touched.end(), 0);
        CHECK(r.event_count == 400);
        CHECK(r.polarity_counts[0] == pol[0]);
        CHECK(r.polarity_counts[1] == pol[1]);
        CHECK(r.zero_bin_fraction ==
              doctest::Approx(1.0 - nonzero / 400.0).epsilon(1e-12));
    }
}
