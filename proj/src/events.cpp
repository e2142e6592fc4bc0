#include "evsamp/events.hpp"

#include <zlib.h>

#include <charconv>
#include <cstring>
#include <sstream>

namespace evs {

namespace {

void validate_event(const Event& e, std::uint16_t w, std::uint16_t h) {
    if (e.x >= w || e.y >= h) {
        throw OutOfBoundsError("event at (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                               ") outside " + std::to_string(w) + "x" + std::to_string(h) +
                               " sensor");
    }
    if (e.p > 1) {
        throw OutOfBoundsError("polarity " + std::to_string(e.p) + " not in {0,1}");
    }
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

}  // namespace

EventStream::EventStream(std::vector<Event> events, std::uint16_t width, std::uint16_t height)
    : events_(std::move(events)), width_(width), height_(height) {
    std::uint64_t prev_t = 0;
    for (std::size_t i = 0; i < events_.size(); ++i) {
        validate_event(events_[i], width_, height_);
        if (i > 0 && events_[i].t < prev_t) {
            throw NonMonotonicTimestampError("event " + std::to_string(i) + " at t=" +
                                             std::to_string(events_[i].t) + " precedes t=" +
                                             std::to_string(prev_t));
        }
        prev_t = events_[i].t;
    }
    duration_us_ = events_.empty() ? 0 : events_.back().t;
}

EventStream parse_text_stream(std::string_view text, std::uint16_t width, std::uint16_t height) {
    std::vector<Event> events;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        ++line_no;
        std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos
                                                                               : eol - pos);
        pos = (eol == std::string_view::npos) ? text.size() : eol + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;

        std::uint64_t fields[4];
        const char* cur = line.data();
        const char* end = line.data() + line.size();
        for (int f = 0; f < 4; ++f) {
            auto [next, ec] = std::from_chars(cur, end, fields[f]);
            if (ec != std::errc() || next == cur) {
                throw MalformedLineError(line_no, "expected decimal integer in \"" +
                                                      std::string(line) + "\"");
            }
            cur = next;
            if (f < 3) {
                if (cur == end || *cur != ',') {
                    throw MalformedLineError(line_no, "expected ',' in \"" + std::string(line) + "\"");
                }
                ++cur;
            }
        }
        if (cur != end) {
            throw MalformedLineError(line_no, "trailing characters in \"" + std::string(line) + "\"");
        }
        if (fields[3] > 1) {
            throw MalformedLineError(line_no, "polarity must be 0 or 1, got " +
                                                  std::to_string(fields[3]));
        }
        if (fields[1] > 0xffff || fields[2] > 0xffff) {
            throw OutOfBoundsError("line " + std::to_string(line_no) + ": coordinate exceeds u16");
        }
        Event e{static_cast<std::uint16_t>(fields[1]), static_cast<std::uint16_t>(fields[2]),
                static_cast<std::uint8_t>(fields[3]), fields[0]};
        validate_event(e, width, height);
        if (!events.empty() && e.t < events.back().t) {
            throw NonMonotonicTimestampError("line " + std::to_string(line_no) + ": t=" +
                                             std::to_string(e.t) + " precedes t=" +
                                             std::to_string(events.back().t));
        }
        events.push_back(e);
    }
    return EventStream(std::move(events), width, height);
}

std::string write_text_stream(const EventStream& stream) {
    std::ostringstream out;
    for (const Event& e : stream.events()) {
        out << e.t << ',' << e.x << ',' << e.y << ',' << static_cast<int>(e.p) << '\n';
    }
    return out.str();
}

std::vector<std::uint8_t> write_binary_stream(const EventStream& stream) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + stream.size() * 16 + 4);
    out.insert(out.end(), {'E', 'V', 'S', '1'});
    put_u16(out, stream.width());
    put_u16(out, stream.height());
    put_u64(out, stream.size());
    if (stream.empty()) return out;

    const std::size_t payload_begin = out.size();
    for (const Event& e : stream.events()) {
        put_u64(out, e.t);
        put_u16(out, e.x);
        put_u16(out, e.y);
        out.push_back(e.p);
        out.push_back(0);
        put_u16(out, 0);
    }
    const auto crc = static_cast<std::uint32_t>(
        ::crc32(0L, out.data() + payload_begin, static_cast<uInt>(out.size() - payload_begin)));
    put_u32(out, crc);
    return out;
}

EventStream read_binary_stream(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 16) throw TruncatedPayloadError("EVS1 header requires 16 bytes");
    if (std::memcmp(bytes.data(), "EVS1", 4) != 0) throw BadMagicError("missing EVS1 magic");
    const std::uint16_t w = get_u16(bytes.data() + 4);
    const std::uint16_t h = get_u16(bytes.data() + 6);
    const std::uint64_t count = get_u64(bytes.data() + 8);
    if (count == 0) {
        if (bytes.size() != 16) throw TruncatedPayloadError("empty stream must be header only");
        return EventStream({}, w, h);
    }
    const std::uint64_t need = 16 + count * 16 + 4;
    if (bytes.size() != need) {
        throw TruncatedPayloadError("expected " + std::to_string(need) + " bytes, got " +
                                    std::to_string(bytes.size()));
    }
    const std::uint8_t* payload = bytes.data() + 16;
    const auto crc_stored = get_u32(payload + count * 16);
    const auto crc_actual = static_cast<std::uint32_t>(
        ::crc32(0L, payload, static_cast<uInt>(count * 16)));
    if (crc_stored != crc_actual) {
        throw ChecksumMismatchError("CRC32 mismatch: stored " + std::to_string(crc_stored) +
                                    ", computed " + std::to_string(crc_actual));
    }
    std::vector<Event> events;
    events.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint8_t* rec = payload + i * 16;
        Event e;
        e.t = get_u64(rec);
        e.x = get_u16(rec + 8);
        e.y = get_u16(rec + 10);
        e.p = rec[12];
        events.push_back(e);
    }
    return EventStream(std::move(events), w, h);
}

StatsReport stream_stats(const EventStream& stream) {
    StatsReport r;
    r.event_count = stream.size();
    r.duration_us = stream.duration_us();
    std::vector<std::uint8_t> touched(
        static_cast<std::size_t>(2) * stream.width() * stream.height(), 0);
    for (const Event& e : stream.events()) {
        ++r.polarity_counts[e.p];
        const std::size_t bin =
            (static_cast<std::size_t>(e.p) * stream.height() + e.y) * stream.width() + e.x;
        touched[bin] = 1;
    }
    if (touched.empty()) {
        r.zero_bin_fraction = 1.0;
    } else {
        std::size_t zeros = 0;
        for (std::uint8_t b : touched) zeros += (b == 0);
        r.zero_bin_fraction = static_cast<double>(zeros) / static_cast<double>(touched.size());
    }
    return r;
}

}  // namespace evs
