#include "evsamp/energy.hpp"

#include <cinttypes>
#include <cstdio>

namespace evs {

namespace {

constexpr double kAcPj = 0.9;
constexpr double kMacPj = 4.6;

}  // namespace

void OpCounter::add(const std::string& module, std::uint64_t ac, std::uint64_t mac) {
    ac_count += ac;
    mac_count += mac;
    for (auto& [name, counts] : modules) {
        if (name == module) {
            counts.ac += ac;
            counts.mac += mac;
            return;
        }
    }
    modules.emplace_back(module, OpCounts{ac, mac});
}

void OpCounter::merge(const OpCounter& other) {
    for (const auto& [name, counts] : other.modules) add(name, counts.ac, counts.mac);
}

OpCounts OpCounter::module_total(std::string_view prefix) const {
    OpCounts total;
    for (const auto& [name, counts] : modules) {
        if (std::string_view(name).substr(0, prefix.size()) == prefix) {
            total.ac += counts.ac;
            total.mac += counts.mac;
        }
    }
    return total;
}

OpCounter count_ops(const Tape& tape) {
    OpCounter counter;
    for (const TapeOp& op : tape.ops()) {
        if (op.kind != OpKind::conv2d) continue;
        const Tensor& x = tape.value(op.inputs[0]);
        const Tensor& weight = tape.value(op.inputs[1]);
        const auto& attrs = std::get<ConvAttrs>(op.attrs);
        const auto c_out = static_cast<std::uint64_t>(weight.shape[0]);
        const auto taps = static_cast<std::uint64_t>(weight.shape[2]) *
                          static_cast<std::uint64_t>(weight.shape[3]);
        const std::string module = op.scope.empty() ? "other" : op.scope;
        if (attrs.spike_input) {
            std::uint64_t nnz = 0;
            for (double v : x.data) nnz += (v != 0.0);
            counter.add(module, nnz * c_out * taps, 0);
        } else {
            const auto c_in = static_cast<std::uint64_t>(weight.shape[1]);
            const auto hw = static_cast<std::uint64_t>(x.shape[1]) *
                            static_cast<std::uint64_t>(x.shape[2]);
            counter.add(module, 0, c_out * c_in * taps * hw);
        }
    }
    return counter;
}

double energy_mj(double ac, double mac) { return (mac * kMacPj + ac * kAcPj) * 1e-9; }

double energy_mj(const OpCounter& counter) {
    return energy_mj(static_cast<double>(counter.ac_count), static_cast<double>(counter.mac_count));
}

std::string energy_report(const OpCounter& counter, bool split_embedding) {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-16s %14s %14s %12s\n", "module", "AC", "MAC",
                  "energy_mJ");
    out += line;
    for (const auto& [name, counts] : counter.modules) {
        std::snprintf(line, sizeof(line), "%-16s %14" PRIu64 " %14" PRIu64 " %12.6f\n",
                      name.c_str(), counts.ac, counts.mac,
                      energy_mj(static_cast<double>(counts.ac), static_cast<double>(counts.mac)));
        out += line;
    }
    std::snprintf(line, sizeof(line), "%-16s %14" PRIu64 " %14" PRIu64 " %12.6f\n", "total",
                  counter.ac_count, counter.mac_count, energy_mj(counter));
    out += line;
    if (split_embedding) {
        const OpCounts emb = counter.module_total("sampler");
        const std::uint64_t ac_rest = counter.ac_count - emb.ac;
        const std::uint64_t mac_rest = counter.mac_count - emb.mac;
        std::snprintf(line, sizeof(line), "%-16s %14" PRIu64 " %14" PRIu64 " %12.6f\n",
                      "total-no-embed", ac_rest, mac_rest,
                      energy_mj(static_cast<double>(ac_rest), static_cast<double>(mac_rest)));
        out += line;
        std::snprintf(line, sizeof(line),
                      "embedding phase counted above; the row excluding it is flagged\n");
        out += line;
    }
    return out;
}

}  // namespace evs
