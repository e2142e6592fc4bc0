#include "evsamp/tape.hpp"

#include <algorithm>
#include <cmath>

#include "evsamp/errors.hpp"

namespace evs {

namespace {

void check_finite(const Tensor& t, const char* what) {
    for (double v : t.data)
        if (!std::isfinite(v)) throw NonFiniteError(what);
}

double sigmoid_fn(double x) {
    // Split by sign so exp never overflows.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double smooth_l1(double d) {
    const double a = std::abs(d);
    return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

double smooth_l1_grad(double d) {
    return std::abs(d) < 1.0 ? d : (d > 0.0 ? 1.0 : -1.0);
}

}  // namespace

std::size_t shape_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    t.data.assign(shape_size(shape), 0.0);
    t.shape = std::move(shape);
    return t;
}

Tensor Tensor::scalar(double v) {
    Tensor t;
    t.data.assign(1, v);
    return t;
}

Tensor& ParamSet::add(std::string name, Tensor value) {
    if (find(name)) throw InvalidConfigError("duplicate parameter name: " + name);
    items.emplace_back(std::move(name), std::move(value));
    return items.back().second;
}

Tensor* ParamSet::find(std::string_view name) {
    for (auto& [n, t] : items)
        if (n == name) return &t;
    return nullptr;
}

const Tensor* ParamSet::find(std::string_view name) const {
    return const_cast<ParamSet*>(this)->find(name);
}

Tensor& ParamSet::at(std::string_view name) {
    if (Tensor* t = find(name)) return *t;
    throw InvalidConfigError("unknown parameter: " + std::string(name));
}

const Tensor& ParamSet::at(std::string_view name) const {
    return const_cast<ParamSet*>(this)->at(name);
}

const Tensor& GradientSet::at(std::string_view name) const {
    for (const auto& [n, t] : grads)
        if (n == name) return t;
    throw InvalidConfigError("unknown gradient: " + std::string(name));
}

void Tape::check(ValueId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= values_.size())
        throw InvalidConfigError("tape value id out of range");
}

const Tensor& Tape::value(ValueId id) const {
    check(id);
    return values_[static_cast<std::size_t>(id)];
}

ValueId Tape::record(OpKind kind, std::vector<ValueId> inputs, Tensor out, OpAttrs attrs) {
    check_finite(out, kind == OpKind::leaf ? "non-finite leaf value" : "non-finite activation");
    const ValueId id = static_cast<ValueId>(values_.size());
    bool needs = false;
    for (ValueId in : inputs) needs = needs || needs_grad_[static_cast<std::size_t>(in)];
    values_.push_back(std::move(out));
    needs_grad_.push_back(needs);
    ops_.push_back(TapeOp{kind, std::move(inputs), id, std::move(attrs), scope_});
    return id;
}

ValueId Tape::input(Tensor value) {
    return record(OpKind::leaf, {}, std::move(value), std::monostate{});
}

ValueId Tape::param(const std::string& name, Tensor value) {
    for (const auto& [n, id] : params_)
        if (n == name) throw InvalidConfigError("duplicate parameter on tape: " + name);
    const ValueId id = record(OpKind::leaf, {}, std::move(value), std::monostate{});
    needs_grad_[static_cast<std::size_t>(id)] = true;
    params_.emplace_back(name, id);
    return id;
}

ValueId Tape::conv2d(ValueId x, ValueId weight, std::optional<ValueId> bias, bool spike_input) {
    check(x);
    check(weight);
    const Tensor& in = value(x);
    const Tensor& w = value(weight);
    if (in.shape.size() != 3 || w.shape.size() != 4)
        throw ShapeMismatchError("conv2d expects (C,H,W) input and (O,I,k,k) weight");
    const int ci = in.shape[0], h = in.shape[1], wd = in.shape[2];
    const int co = w.shape[0], k = w.shape[2];
    if (w.shape[1] != ci || w.shape[3] != k || k % 2 == 0)
        throw ShapeMismatchError("conv2d kernel must be odd-sized and match input channels");
    const Tensor* b = nullptr;
    if (bias) {
        check(*bias);
        b = &value(*bias);
        if (b->shape != std::vector<int>{co}) throw ShapeMismatchError("conv2d bias shape");
    }
    const int pad = k / 2;

    Tensor out = Tensor::zeros({co, h, wd});
    for (int oc = 0; oc < co; ++oc) {
        const double bv = b ? b->data[static_cast<std::size_t>(oc)] : 0.0;
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < wd; ++xx) {
                double acc = bv;
                for (int ic = 0; ic < ci; ++ic)
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = y + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = xx + kx - pad;
                            if (ix < 0 || ix >= wd) continue;
                            acc += w.data[((static_cast<std::size_t>(oc) * ci + ic) * k + ky) * k + kx] *
                                   in.data[(static_cast<std::size_t>(ic) * h + iy) * wd + ix];
                        }
                    }
                out.data[(static_cast<std::size_t>(oc) * h + y) * wd + xx] = acc;
            }
    }
    std::vector<ValueId> inputs{x, weight};
    if (bias) inputs.push_back(*bias);
    return record(OpKind::conv2d, std::move(inputs), std::move(out), ConvAttrs{pad, spike_input});
}

ValueId Tape::add(ValueId a, ValueId b) {
    check(a);
    check(b);
    if (!value(a).same_shape(value(b))) throw ShapeMismatchError("add shape mismatch");
    Tensor out = value(a);
    const Tensor& vb = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += vb.data[i];
    return record(OpKind::add, {a, b}, std::move(out), std::monostate{});
}

ValueId Tape::mul(ValueId a, ValueId b) {
    check(a);
    check(b);
    if (!value(a).same_shape(value(b))) throw ShapeMismatchError("mul shape mismatch");
    Tensor out = value(a);
    const Tensor& vb = value(b);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= vb.data[i];
    return record(OpKind::mul, {a, b}, std::move(out), std::monostate{});
}

ValueId Tape::lincomb(double c0, ValueId a, double c1, ValueId b) {
    check(a);
    check(b);
    if (!value(a).same_shape(value(b))) throw ShapeMismatchError("lincomb shape mismatch");
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    Tensor out = Tensor::zeros(va.shape);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = c0 * va.data[i] + c1 * vb.data[i];
    return record(OpKind::lincomb, {a, b}, std::move(out), LinCombAttrs{c0, c1});
}

ValueId Tape::sigmoid(ValueId x) {
    check(x);
    Tensor out = value(x);
    for (double& v : out.data) v = sigmoid_fn(v);
    return record(OpKind::sigmoid, {x}, std::move(out), std::monostate{});
}

ValueId Tape::relu(ValueId x) {
    check(x);
    Tensor out = value(x);
    for (double& v : out.data) v = std::max(0.0, v);
    return record(OpKind::relu, {x}, std::move(out), std::monostate{});
}

ValueId Tape::threshold(ValueId u, double theta, const SurrogateSpec& surrogate) {
    check(u);
    surrogate.validate();
    Tensor out = value(u);
    for (double& v : out.data) v = v >= theta ? 1.0 : 0.0;
    return record(OpKind::threshold, {u}, std::move(out), ThresholdAttrs{theta, surrogate});
}

ValueId Tape::concat2(ValueId a, ValueId b) {
    check(a);
    check(b);
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.shape.size() != 3 || vb.shape.size() != 3 || va.shape[1] != vb.shape[1] ||
        va.shape[2] != vb.shape[2])
        throw ShapeMismatchError("concat2 expects (C,H,W) inputs on one grid");
    Tensor out = Tensor::zeros({va.shape[0] + vb.shape[0], va.shape[1], va.shape[2]});
    std::copy(va.data.begin(), va.data.end(), out.data.begin());
    std::copy(vb.data.begin(), vb.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(va.size()));
    return record(OpKind::concat2, {a, b}, std::move(out), std::monostate{});
}

ValueId Tape::slot_aggregate(const std::vector<ValueId>& potentials,
                             const std::vector<ValueId>& spikes, bool sat,
                             std::vector<AggSpan> spans) {
    if (potentials.empty() || potentials.size() != spikes.size())
        throw ShapeMismatchError("slot_aggregate needs matching potential/spike sequences");
    for (ValueId id : potentials) check(id);
    for (ValueId id : spikes) check(id);
    const Tensor& first = value(potentials[0]);
    const std::int16_t steps = static_cast<std::int16_t>(potentials.size());

    Tensor out = Tensor::zeros(first.shape);
    for (const AggSpan& span : spans) {
        const std::size_t n = static_cast<std::size_t>(span.neuron);
        double wsum = 0.0;
        for (int t = span.t_lo; t <= span.t_hi; ++t)
            wsum += value(potentials[static_cast<std::size_t>(t - 1)]).data[n];
        if (sat && span.close_step >= 1)
            wsum *= value(spikes[static_cast<std::size_t>(span.close_step - 1)]).data[n];
        out.data[n] += wsum;
    }

    std::vector<ValueId> inputs = potentials;
    inputs.insert(inputs.end(), spikes.begin(), spikes.end());
    return record(OpKind::slot_aggregate, std::move(inputs), std::move(out),
                  SlotAttrs{sat, steps, std::move(spans)});
}

ValueId Tape::global_avg_pool(ValueId x) {
    check(x);
    const Tensor& in = value(x);
    if (in.shape.size() != 3) throw ShapeMismatchError("global_avg_pool expects (C,H,W)");
    const int c = in.shape[0];
    const std::size_t plane = static_cast<std::size_t>(in.shape[1]) * in.shape[2];
    Tensor out = Tensor::zeros({c});
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += in.data[ch * plane + i];
        out.data[static_cast<std::size_t>(ch)] = acc / static_cast<double>(plane);
    }
    return record(OpKind::global_avg_pool, {x}, std::move(out), std::monostate{});
}

ValueId Tape::reduce_sum(ValueId x) {
    check(x);
    const Tensor& in = value(x);
    double acc = 0.0;
    for (double v : in.data) acc += v;
    return record(OpKind::reduce_sum, {x}, Tensor::scalar(acc), std::monostate{});
}

ValueId Tape::detection_loss(ValueId logits, const LossAttrs& attrs) {
    check(logits);
    const Tensor& z = value(logits);
    if (z.shape != std::vector<int>{5})
        throw ShapeMismatchError("detection_loss expects 5 logits");

    const double z0 = z.data[0];
    const double obj = attrs.target[0];
    // Stable binary cross-entropy straight from the logit.
    double loss = attrs.obj_weight *
                  (std::max(z0, 0.0) - z0 * obj + std::log1p(std::exp(-std::abs(z0))));
    for (int i = 1; i < 5; ++i) {
        const double p = sigmoid_fn(z.data[static_cast<std::size_t>(i)]);
        loss += attrs.box_weight * obj * smooth_l1(p - attrs.target[static_cast<std::size_t>(i)]);
    }
    return record(OpKind::detection_loss, {logits}, Tensor::scalar(loss), attrs);
}

GradientSet Tape::backward(ValueId loss_id) {
    check(loss_id);
    if (values_[static_cast<std::size_t>(loss_id)].size() != 1)
        throw DisconnectedLossError("loss must be scalar");

    // Ops whose output feeds the loss, found by one reverse sweep.
    std::vector<bool> live(values_.size(), false);
    live[static_cast<std::size_t>(loss_id)] = true;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it)
        if (live[static_cast<std::size_t>(it->out)])
            for (ValueId in : it->inputs) live[static_cast<std::size_t>(in)] = true;

    bool any_param = false;
    for (const auto& [name, id] : params_) any_param = any_param || live[static_cast<std::size_t>(id)];
    if (!any_param) throw DisconnectedLossError("loss does not reach any parameter");

    std::vector<Tensor> grads(values_.size());
    auto grad_of = [&](ValueId id) -> Tensor& {
        Tensor& g = grads[static_cast<std::size_t>(id)];
        if (g.data.empty()) g = Tensor::zeros(values_[static_cast<std::size_t>(id)].shape);
        return g;
    };
    grad_of(loss_id).data[0] = 1.0;

    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
        const TapeOp& op = *it;
        if (op.kind == OpKind::leaf || !live[static_cast<std::size_t>(op.out)]) continue;
        const Tensor& gy = grads[static_cast<std::size_t>(op.out)];
        if (gy.data.empty()) continue;
        auto wants = [&](ValueId id) { return needs_grad_[static_cast<std::size_t>(id)]; };

        switch (op.kind) {
            case OpKind::conv2d: {
                const auto& at = std::get<ConvAttrs>(op.attrs);
                const Tensor& in = value(op.inputs[0]);
                const Tensor& w = value(op.inputs[1]);
                const int ci = in.shape[0], h = in.shape[1], wd = in.shape[2];
                const int co = w.shape[0], k = w.shape[2];
                const bool want_x = wants(op.inputs[0]);
                const bool want_w = wants(op.inputs[1]);
                Tensor* gx = want_x ? &grad_of(op.inputs[0]) : nullptr;
                Tensor* gw = want_w ? &grad_of(op.inputs[1]) : nullptr;
                if (op.inputs.size() == 3 && wants(op.inputs[2])) {
                    Tensor& gb = grad_of(op.inputs[2]);
                    const std::size_t plane = static_cast<std::size_t>(h) * wd;
                    for (int oc = 0; oc < co; ++oc) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < plane; ++i) acc += gy.data[oc * plane + i];
                        gb.data[static_cast<std::size_t>(oc)] += acc;
                    }
                }
                if (want_x || want_w)
                    for (int oc = 0; oc < co; ++oc)
                        for (int y = 0; y < h; ++y)
                            for (int xx = 0; xx < wd; ++xx) {
                                const double g = gy.data[(static_cast<std::size_t>(oc) * h + y) * wd + xx];
                                if (g == 0.0) continue;
                                for (int ic = 0; ic < ci; ++ic)
                                    for (int ky = 0; ky < k; ++ky) {
                                        const int iy = y + ky - at.pad;
                                        if (iy < 0 || iy >= h) continue;
                                        for (int kx = 0; kx < k; ++kx) {
                                            const int ix = xx + kx - at.pad;
                                            if (ix < 0 || ix >= wd) continue;
                                            const std::size_t wi =
                                                ((static_cast<std::size_t>(oc) * ci + ic) * k + ky) * k + kx;
                                            const std::size_t xi =
                                                (static_cast<std::size_t>(ic) * h + iy) * wd + ix;
                                            if (gw) gw->data[wi] += g * in.data[xi];
                                            if (gx) gx->data[xi] += g * w.data[wi];
                                        }
                                    }
                            }
                break;
            }
            case OpKind::add:
                for (int side = 0; side < 2; ++side)
                    if (wants(op.inputs[static_cast<std::size_t>(side)])) {
                        Tensor& g = grad_of(op.inputs[static_cast<std::size_t>(side)]);
                        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += gy.data[i];
                    }
                break;
            case OpKind::mul:
                for (int side = 0; side < 2; ++side)
                    if (wants(op.inputs[static_cast<std::size_t>(side)])) {
                        Tensor& g = grad_of(op.inputs[static_cast<std::size_t>(side)]);
                        const Tensor& other = value(op.inputs[static_cast<std::size_t>(1 - side)]);
                        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += gy.data[i] * other.data[i];
                    }
                break;
            case OpKind::lincomb: {
                const auto& at = std::get<LinCombAttrs>(op.attrs);
                const double cs[2] = {at.c0, at.c1};
                for (int side = 0; side < 2; ++side)
                    if (wants(op.inputs[static_cast<std::size_t>(side)])) {
                        Tensor& g = grad_of(op.inputs[static_cast<std::size_t>(side)]);
                        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += cs[side] * gy.data[i];
                    }
                break;
            }
            case OpKind::sigmoid:
                if (wants(op.inputs[0])) {
                    Tensor& g = grad_of(op.inputs[0]);
                    const Tensor& y = value(op.out);
                    for (std::size_t i = 0; i < g.size(); ++i)
                        g.data[i] += gy.data[i] * y.data[i] * (1.0 - y.data[i]);
                }
                break;
            case OpKind::relu:
                if (wants(op.inputs[0])) {
                    Tensor& g = grad_of(op.inputs[0]);
                    const Tensor& x = value(op.inputs[0]);
                    for (std::size_t i = 0; i < g.size(); ++i)
                        if (x.data[i] > 0.0) g.data[i] += gy.data[i];
                }
                break;
            case OpKind::threshold:
                if (wants(op.inputs[0])) {
                    const auto& at = std::get<ThresholdAttrs>(op.attrs);
                    Tensor& g = grad_of(op.inputs[0]);
                    const Tensor& u = value(op.inputs[0]);
                    for (std::size_t i = 0; i < g.size(); ++i)
                        g.data[i] += gy.data[i] * surrogate_eval(at.surrogate, u.data[i] - at.theta);
                }
                break;
            case OpKind::concat2: {
                const std::size_t na = value(op.inputs[0]).size();
                if (wants(op.inputs[0])) {
                    Tensor& g = grad_of(op.inputs[0]);
                    for (std::size_t i = 0; i < na; ++i) g.data[i] += gy.data[i];
                }
                if (wants(op.inputs[1])) {
                    Tensor& g = grad_of(op.inputs[1]);
                    for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += gy.data[na + i];
                }
                break;
            }
            case OpKind::slot_aggregate: {
                const auto& at = std::get<SlotAttrs>(op.attrs);
                const std::size_t steps = static_cast<std::size_t>(at.step_count);
                for (const AggSpan& span : at.spans) {
                    const std::size_t n = static_cast<std::size_t>(span.neuron);
                    const double g = gy.data[n];
                    if (g == 0.0) continue;
                    const bool gated = at.sat && span.close_step >= 1;
                    double sfac = 1.0;
                    if (gated)
                        sfac = value(op.inputs[steps + static_cast<std::size_t>(span.close_step - 1)]).data[n];
                    for (int t = span.t_lo; t <= span.t_hi; ++t) {
                        const ValueId uid = op.inputs[static_cast<std::size_t>(t - 1)];
                        if (wants(uid)) grad_of(uid).data[n] += g * sfac;
                    }
                    if (gated) {
                        const ValueId sid = op.inputs[steps + static_cast<std::size_t>(span.close_step - 1)];
                        if (wants(sid)) {
                            double wsum = 0.0;
                            for (int t = span.t_lo; t <= span.t_hi; ++t)
                                wsum += value(op.inputs[static_cast<std::size_t>(t - 1)]).data[n];
                            grad_of(sid).data[n] += g * wsum;
                        }
                    }
                }
                break;
            }
            case OpKind::global_avg_pool:
                if (wants(op.inputs[0])) {
                    Tensor& g = grad_of(op.inputs[0]);
                    const int c = g.shape[0];
                    const std::size_t plane = static_cast<std::size_t>(g.shape[1]) * g.shape[2];
                    for (int ch = 0; ch < c; ++ch) {
                        const double gv = gy.data[static_cast<std::size_t>(ch)] / static_cast<double>(plane);
                        for (std::size_t i = 0; i < plane; ++i) g.data[ch * plane + i] += gv;
                    }
                }
                break;
            case OpKind::reduce_sum:
                if (wants(op.inputs[0])) {
                    Tensor& g = grad_of(op.inputs[0]);
                    for (double& v : g.data) v += gy.data[0];
                }
                break;
            case OpKind::detection_loss:
                if (wants(op.inputs[0])) {
                    const auto& at = std::get<LossAttrs>(op.attrs);
                    Tensor& g = grad_of(op.inputs[0]);
                    const Tensor& z = value(op.inputs[0]);
                    const double gl = gy.data[0];
                    const double obj = at.target[0];
                    g.data[0] += gl * at.obj_weight * (sigmoid_fn(z.data[0]) - obj);
                    for (std::size_t i = 1; i < 5; ++i) {
                        const double p = sigmoid_fn(z.data[i]);
                        g.data[i] += gl * at.box_weight * obj * smooth_l1_grad(p - at.target[i]) * p * (1.0 - p);
                    }
                }
                break;
            case OpKind::leaf:
                break;
        }
    }

    GradientSet out;
    out.loss = values_[static_cast<std::size_t>(loss_id)].data[0];
    for (const auto& [name, id] : params_) {
        Tensor g = grads[static_cast<std::size_t>(id)].data.empty()
                       ? Tensor::zeros(values_[static_cast<std::size_t>(id)].shape)
                       : std::move(grads[static_cast<std::size_t>(id)]);
        check_finite(g, "non-finite gradient");
        out.grads.emplace_back(name, std::move(g));
    }
    return out;
}

}  // namespace evs
