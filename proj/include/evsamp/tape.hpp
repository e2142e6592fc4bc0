#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "evsamp/neuron.hpp"

namespace evs {

// Dense row-major value container; empty shape means scalar (size 1).
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    static Tensor zeros(std::vector<int> shape);
    static Tensor scalar(double v);
    std::size_t size() const { return data.size(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

std::size_t shape_size(const std::vector<int>& shape);

using ValueId = std::int32_t;

enum class OpKind : std::uint8_t {
    leaf,
    conv2d,
    add,
    mul,
    lincomb,
    sigmoid,
    relu,
    threshold,
    concat2,
    slot_aggregate,
    global_avg_pool,
    reduce_sum,
    detection_loss,
};

// One contiguous step range feeding an embedding slot. Steps are 1-based
// inclusive; close_step < 0 marks an ungated residual range.
struct AggSpan {
    std::int32_t neuron = 0;  // flat index into the (C, H, W) slot frame
    std::int16_t t_lo = 0;
    std::int16_t t_hi = 0;
    std::int16_t close_step = -1;
};

struct ConvAttrs {
    int pad = 0;
    bool spike_input = false;  // input tensor holds spikes, counts as AC work
};
struct LinCombAttrs {
    double c0 = 0.0, c1 = 0.0;
};
struct ThresholdAttrs {
    double theta = 1.0;
    SurrogateSpec surrogate;
};
struct SlotAttrs {
    bool sat = false;
    std::int16_t step_count = 0;
    std::vector<AggSpan> spans;
};
struct LossAttrs {
    std::array<double, 5> target{};  // objectness then cx, cy, w, h in [0, 1]
    double obj_weight = 1.0;
    double box_weight = 1.0;
};
using OpAttrs = std::variant<std::monostate, ConvAttrs, LinCombAttrs, ThresholdAttrs,
                             SlotAttrs, LossAttrs>;

struct TapeOp {
    OpKind kind = OpKind::leaf;
    std::vector<ValueId> inputs;
    ValueId out = -1;
    OpAttrs attrs;
    std::string scope;  // energy attribution tag, set at record time
};

// Ordered parameter collection; iteration order is registration order.
struct ParamSet {
    std::vector<std::pair<std::string, Tensor>> items;

    Tensor& add(std::string name, Tensor value);
    Tensor* find(std::string_view name);
    const Tensor* find(std::string_view name) const;
    Tensor& at(std::string_view name);
    const Tensor& at(std::string_view name) const;
};

struct GradientSet {
    std::vector<std::pair<std::string, Tensor>> grads;  // parameter registration order
    double loss = 0.0;

    const Tensor& at(std::string_view name) const;
};

// Define-by-run tape: every builder evaluates eagerly in float64 and records
// the op; backward replays in exact reverse order.
class Tape {
public:
    ValueId input(Tensor value);
    ValueId param(const std::string& name, Tensor value);

    ValueId conv2d(ValueId x, ValueId weight, std::optional<ValueId> bias,
                   bool spike_input = false);
    ValueId add(ValueId a, ValueId b);
    ValueId mul(ValueId a, ValueId b);
    ValueId lincomb(double c0, ValueId a, double c1, ValueId b);
    ValueId sigmoid(ValueId x);
    ValueId relu(ValueId x);
    ValueId threshold(ValueId u, double theta, const SurrogateSpec& surrogate);
    ValueId concat2(ValueId a, ValueId b);
    ValueId slot_aggregate(const std::vector<ValueId>& potentials,
                           const std::vector<ValueId>& spikes, bool sat,
                           std::vector<AggSpan> spans);
    ValueId global_avg_pool(ValueId x);
    ValueId reduce_sum(ValueId x);
    ValueId detection_loss(ValueId logits, const LossAttrs& attrs);

    GradientSet backward(ValueId loss_id);

    void set_scope(std::string scope) { scope_ = std::move(scope); }
    const Tensor& value(ValueId id) const;
    const std::vector<TapeOp>& ops() const { return ops_; }
    std::size_t value_count() const { return values_.size(); }

private:
    ValueId record(OpKind kind, std::vector<ValueId> inputs, Tensor out, OpAttrs attrs);
    void check(ValueId id) const;

    std::vector<Tensor> values_;
    std::vector<bool> needs_grad_;
    std::vector<std::pair<std::string, ValueId>> params_;  // registration order
    std::vector<TapeOp> ops_;
    std::string scope_;
};

}  // namespace evs
