#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "evsamp/errors.hpp"

namespace evs {

// One camera event. Polarity is stored as a channel index {0,1}
// (0 = intensity decrease, 1 = increase); timestamps are integer
// microseconds.
struct Event {
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::uint8_t p = 0;
    std::uint64_t t = 0;

    friend bool operator==(const Event&, const Event&) = default;
};

// Immutable, time-sorted event container tied to a sensor geometry.
// Construction validates bounds and sortedness; ties keep input order.
class EventStream {
public:
    EventStream() = default;
    EventStream(std::vector<Event> events, std::uint16_t width, std::uint16_t height);

    const std::vector<Event>& events() const { return events_; }
    std::span<const Event> span() const { return events_; }
    std::uint16_t width() const { return width_; }
    std::uint16_t height() const { return height_; }
    std::size_t size() const { return events_.size(); }
    bool empty() const { return events_.empty(); }
    std::uint64_t duration_us() const { return duration_us_; }

    friend bool operator==(const EventStream& a, const EventStream& b) {
        return a.width_ == b.width_ && a.height_ == b.height_ && a.events_ == b.events_;
    }

private:
    std::vector<Event> events_;
    std::uint16_t width_ = 0;
    std::uint16_t height_ = 0;
    std::uint64_t duration_us_ = 0;
};

// Parses line-delimited "t,x,y,p" records. Lines starting with '#' are
// comments; blank lines and CRLF endings are accepted. Throws
// MalformedLineError (with line number), OutOfBoundsError, or
// NonMonotonicTimestampError.
EventStream parse_text_stream(std::string_view text, std::uint16_t width, std::uint16_t height);

// Renders the stream back to the text format (one "t,x,y,p" line per event).
std::string write_text_stream(const EventStream& stream);

// EVS1 binary container:
//   16-byte header: magic "EVS1", u16 width, u16 height, u64 event count (LE)
//   per event: u64 t, u16 x, u16 y, u8 p, u8 pad(0), u16 reserved(0)  (16 bytes)
//   trailing u32 CRC32 of the record payload; omitted when the stream is empty.
std::vector<std::uint8_t> write_binary_stream(const EventStream& stream);
EventStream read_binary_stream(std::span<const std::uint8_t> bytes);

struct StatsReport {
    std::uint64_t event_count = 0;
    std::uint64_t duration_us = 0;
    std::uint64_t polarity_counts[2] = {0, 0};
    // Fraction of (x, y, p) bins that received no events.
    double zero_bin_fraction = 1.0;
};

StatsReport stream_stats(const EventStream& stream);

}  // namespace evs
