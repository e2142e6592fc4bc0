#include "evsamp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace evs {

namespace {

constexpr std::uint32_t kVersion = 1;

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

void put_f32(std::vector<std::uint8_t>& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

// Sequential reader with hard bounds; every under-run is a truncation error.
struct Cursor {
    const std::uint8_t* p;
    const std::uint8_t* end;

    void need(std::size_t n) const {
        if (static_cast<std::size_t>(end - p) < n) {
            throw TruncatedPayloadError("checkpoint ends mid-record");
        }
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
        p += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
        p += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
        p += 8;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        return s;
    }
};

void put_name(std::vector<std::uint8_t>& out, const std::string& name) {
    if (name.size() > 0xffff) throw InvalidConfigError("checkpoint: name too long");
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
}

void put_entry(std::vector<std::uint8_t>& out, const std::string& name, const Tensor& t) {
    put_name(out, name);
    if (t.shape.size() > 0xff) throw InvalidConfigError("checkpoint: rank too large");
    out.push_back(static_cast<std::uint8_t>(t.shape.size()));
    for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.data) put_f32(out, static_cast<float>(v));
}

void put_plain_section(std::vector<std::uint8_t>& out, const std::string& section,
                       const ParamSet& params) {
    put_name(out, section);
    put_u32(out, static_cast<std::uint32_t>(params.items.size()));
    for (const auto& [name, value] : params.items) put_entry(out, name, value);
}

void put_vector_section(std::vector<std::uint8_t>& out, const std::string& section,
                        const ParamSet& params, const std::vector<std::vector<double>>& data) {
    put_name(out, section);
    put_u32(out, static_cast<std::uint32_t>(params.items.size()));
    for (std::size_t i = 0; i < params.items.size(); ++i) {
        Tensor t;
        t.shape = params.items[i].second.shape;
        t.data = data[i];
        put_entry(out, params.items[i].first, t);
    }
}

std::pair<std::string, Tensor> read_entry(Cursor& c) {
    std::string name = c.str(c.u16());
    c.need(1);
    const std::uint8_t rank = *c.p++;
    Tensor t;
    t.shape.resize(rank);
    std::size_t total = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
        const std::uint32_t dim = c.u32();
        if (dim == 0 || dim > (1u << 24)) {
            throw TruncatedPayloadError("checkpoint: implausible dimension " + std::to_string(dim));
        }
        t.shape[d] = static_cast<int>(dim);
        total *= dim;
    }
    t.data.resize(total);
    for (std::size_t i = 0; i < total; ++i) t.data[i] = static_cast<double>(c.f32());
    return {std::move(name), std::move(t)};
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'C', 'K', 'P', 'T'});
    put_u32(out, kVersion);
    put_u64(out, ckpt.train_step);
    put_u64(out, ckpt.has_adam ? ckpt.adam.step : 0);

    std::uint32_t sections = 1;
    if (ckpt.has_adam) sections += 2;
    if (ckpt.has_ema) sections += 1;
    put_u32(out, sections);

    put_plain_section(out, "params", ckpt.params);
    if (ckpt.has_adam) {
        if (ckpt.adam.slots.size() != ckpt.params.items.size()) {
            throw ShapeMismatchError("checkpoint: adam state count mismatch");
        }
        std::vector<std::vector<double>> m, v;
        for (const auto& slot : ckpt.adam.slots) {
            m.push_back(slot.m);
            v.push_back(slot.v);
        }
        put_vector_section(out, "adam_m", ckpt.params, m);
        put_vector_section(out, "adam_v", ckpt.params, v);
    }
    if (ckpt.has_ema) {
        if (ckpt.ema.size() != ckpt.params.items.size()) {
            throw ShapeMismatchError("checkpoint: ema shadow count mismatch");
        }
        ParamSet shadow;
        for (std::size_t i = 0; i < ckpt.ema.size(); ++i) {
            shadow.items.emplace_back(ckpt.params.items[i].first, ckpt.ema[i]);
        }
        put_plain_section(out, "ema", shadow);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());

    if (bytes.size() < 4 || std::memcmp(bytes.data(), "CKPT", 4) != 0) {
        throw BadMagicError("missing CKPT magic");
    }
    Cursor c{bytes.data() + 4, bytes.data() + bytes.size()};
    const std::uint32_t version = c.u32();
    if (version != kVersion) {
        throw ValidationError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.train_step = c.u64();
    const std::uint64_t adam_step = c.u64();
    const std::uint32_t sections = c.u32();

    std::vector<std::vector<double>> adam_m, adam_v;
    for (std::uint32_t s = 0; s < sections; ++s) {
        const std::string section = c.str(c.u16());
        const std::uint32_t entries = c.u32();
        if (section == "params") {
            for (std::uint32_t i = 0; i < entries; ++i) {
                auto [name, t] = read_entry(c);
                ckpt.params.items.emplace_back(std::move(name), std::move(t));
            }
        } else if (section == "adam_m" || section == "adam_v") {
            auto& dst = (section == "adam_m") ? adam_m : adam_v;
            for (std::uint32_t i = 0; i < entries; ++i) {
                auto [name, t] = read_entry(c);
                (void)name;
                dst.push_back(std::move(t.data));
            }
        } else if (section == "ema") {
            for (std::uint32_t i = 0; i < entries; ++i) {
                auto [name, t] = read_entry(c);
                (void)name;
                ckpt.ema.push_back(std::move(t));
            }
            ckpt.has_ema = true;
        } else {
            throw ValidationError("unknown checkpoint section \"" + section + "\"");
        }
    }
    if (c.p != c.end) throw TruncatedPayloadError("checkpoint has trailing bytes");

    if (!adam_m.empty() || !adam_v.empty()) {
        if (adam_m.size() != ckpt.params.items.size() ||
            adam_v.size() != ckpt.params.items.size()) {
            throw ShapeMismatchError("checkpoint: adam sections do not match params");
        }
        ckpt.has_adam = true;
        ckpt.adam.step = adam_step;
        ckpt.adam.slots.resize(adam_m.size());
        for (std::size_t i = 0; i < adam_m.size(); ++i) {
            ckpt.adam.slots[i].m = std::move(adam_m[i]);
            ckpt.adam.slots[i].v = std::move(adam_v[i]);
        }
    }
    if (ckpt.has_ema && ckpt.ema.size() != ckpt.params.items.size()) {
        throw ShapeMismatchError("checkpoint: ema section does not match params");
    }
    return ckpt;
}

}  // namespace evs
