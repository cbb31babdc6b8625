#include "zonocert/tape.hpp"

#include <cmath>
#include <string>

#include "zonocert/ops.hpp"

namespace zonocert::nn {

std::size_t Tape::check(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw IndexError("tape node " + std::to_string(id));
    }
    return static_cast<std::size_t>(id);
}

NodeId Tape::push(Node n) {
    if (swept_) throw UnsupportedOpError("tape already swept; build a fresh tape");
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.needs_grad = requires_grad;
    return push(std::move(n));
}

static void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": " + a.shape_str() + " vs " + b.shape_str());
    }
}

NodeId Tape::dense(NodeId w, NodeId b, NodeId x) {
    Layer l = Layer::dense(value(w), value(b));
    l.in_shape = {static_cast<int>(value(x).size())};
    l.out_shape = {l.weight.shape()[0]};
    Node n;
    n.op = Op::Dense;
    n.a = w;
    n.b = b;
    n.c = x;
    n.needs_grad = requires_grad(w) || requires_grad(b) || requires_grad(x);
    n.value = apply_layer(l, value(x));
    return push(std::move(n));
}

NodeId Tape::conv(NodeId kernel, NodeId b, NodeId x, int stride, std::vector<int> in_shape) {
    Layer l = Layer::conv(value(kernel), stride, value(b));
    l.in_shape = in_shape;
    l.out_shape = layer_output_shape(l, in_shape);
    Node n;
    n.op = Op::Conv;
    n.a = kernel;
    n.b = b;
    n.c = x;
    n.index = stride;
    n.aux_shape = std::move(in_shape);
    n.needs_grad = requires_grad(kernel) || requires_grad(b) || requires_grad(x);
    Tensor xin(l.in_shape, value(x).vec());
    n.value = apply_layer(l, xin);
    return push(std::move(n));
}

NodeId Tape::relu(NodeId x) {
    Node n;
    n.op = Op::Relu;
    n.a = x;
    n.needs_grad = requires_grad(x);
    n.value = value(x);
    for (std::int64_t i = 0; i < n.value.size(); ++i) {
        if (n.value[i] < 0.0) n.value[i] = 0.0;
    }
    return push(std::move(n));
}

NodeId Tape::softmax(NodeId z) {
    Node n;
    n.op = Op::Softmax;
    n.a = z;
    n.needs_grad = requires_grad(z);
    n.value = nn::softmax(value(z));
    return push(std::move(n));
}

NodeId Tape::log_shift(NodeId x, double shift) {
    Node n;
    n.op = Op::LogShift;
    n.a = x;
    n.scalar = shift;
    n.needs_grad = requires_grad(x);
    n.value = value(x);
    for (std::int64_t i = 0; i < n.value.size(); ++i) n.value[i] = std::log(n.value[i] + shift);
    return push(std::move(n));
}

NodeId Tape::pick(NodeId x, int index) {
    if (index < 0 || index >= value(x).size()) throw IndexError("pick " + std::to_string(index));
    Node n;
    n.op = Op::Pick;
    n.a = x;
    n.index = index;
    n.needs_grad = requires_grad(x);
    n.value = Tensor::scalar(value(x)[index]);
    return push(std::move(n));
}

NodeId Tape::sum(NodeId x) {
    Node n;
    n.op = Op::Sum;
    n.a = x;
    n.needs_grad = requires_grad(x);
    double acc = 0.0;
    for (std::int64_t i = 0; i < value(x).size(); ++i) acc += value(x)[i];
    n.value = Tensor::scalar(acc);
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
    require_same_shape(value(a), value(b), "add");
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.needs_grad = requires_grad(a) || requires_grad(b);
    n.value = value(a);
    for (std::int64_t i = 0; i < n.value.size(); ++i) n.value[i] += value(b)[i];
    return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
    require_same_shape(value(a), value(b), "sub");
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.needs_grad = requires_grad(a) || requires_grad(b);
    n.value = value(a);
    for (std::int64_t i = 0; i < n.value.size(); ++i) n.value[i] -= value(b)[i];
    return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
    require_same_shape(value(a), value(b), "mul");
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.needs_grad = requires_grad(a) || requires_grad(b);
    n.value = value(a);
    for (std::int64_t i = 0; i < n.value.size(); ++i) n.value[i] *= value(b)[i];
    return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double c) {
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.scalar = c;
    n.needs_grad = requires_grad(a);
    n.value = value(a);
    for (std::int64_t i = 0; i < n.value.size(); ++i) n.value[i] *= c;
    return push(std::move(n));
}

NodeId Tape::add_const(NodeId a, double c) {
    Node n;
    n.op = Op::AddConst;
    n.a = a;
    n.scalar = c;
    n.needs_grad = requires_grad(a);
    n.value = value(a);
    for (std::int64_t i = 0; i < n.value.size(); ++i) n.value[i] += c;
    return push(std::move(n));
}

NodeId Tape::dot(NodeId a, NodeId b) {
    require_same_shape(value(a), value(b), "dot");
    Node n;
    n.op = Op::Dot;
    n.a = a;
    n.b = b;
    n.needs_grad = requires_grad(a) || requires_grad(b);
    double acc = 0.0;
    for (std::int64_t i = 0; i < value(a).size(); ++i) acc += value(a)[i] * value(b)[i];
    n.value = Tensor::scalar(acc);
    return push(std::move(n));
}

Tensor& Tape::grad_buf(NodeId id) {
    Node& n = nodes_[check(id)];
    if (n.grad.size() == 0) {
        n.grad = Tensor(n.value.shape());
    }
    return n.grad;
}

const Tensor& Tape::grad(NodeId id) {
    Node& n = nodes_[check(id)];
    if (!n.needs_grad) throw UnsupportedOpError("node does not track gradients");
    if (!swept_) throw UnsupportedOpError("backward() has not run");
    if (n.grad.size() == 0) n.grad = Tensor(n.value.shape());
    return n.grad;
}

void Tape::backward(NodeId root) {
    const Node& r = nodes_[check(root)];
    if (r.value.size() != 1) throw UnsupportedOpError("backward root must be scalar");
    if (!r.needs_grad) throw UnsupportedOpError("root does not depend on any gradient leaf");
    if (swept_) throw UnsupportedOpError("tape already swept");
    swept_ = true;
    grad_buf(root)[0] = 1.0;
    for (NodeId id = root; id >= 0; --id) {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.needs_grad || n.grad.size() == 0) continue;
        backprop_node(id);
    }
}

void Tape::backprop_node(NodeId id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = n.grad;
    auto wants = [this](NodeId p) { return p >= 0 && nodes_[static_cast<std::size_t>(p)].needs_grad; };
    switch (n.op) {
    case Op::Leaf:
        return;
    case Op::Dense: {
        const Tensor& w = value(n.a);
        const Tensor& x = value(n.c);
        const int out_n = w.shape()[0];
        const int in_n = w.shape()[1];
        if (wants(n.a)) {
            Tensor& gw = grad_buf(n.a);
            for (int r = 0; r < out_n; ++r) {
                const double gr = g[r];
                double* row = gw.data() + static_cast<std::int64_t>(r) * in_n;
                for (int c = 0; c < in_n; ++c) row[c] += gr * x[c];
            }
        }
        if (wants(n.b)) {
            Tensor& gb = grad_buf(n.b);
            for (int r = 0; r < out_n; ++r) gb[r] += g[r];
        }
        if (wants(n.c)) {
            Tensor& gx = grad_buf(n.c);
            for (int r = 0; r < out_n; ++r) {
                const double gr = g[r];
                const double* row = w.data() + static_cast<std::int64_t>(r) * in_n;
                for (int c = 0; c < in_n; ++c) gx[c] += gr * row[c];
            }
        }
        return;
    }
    case Op::Conv: {
        const Tensor& k = value(n.a);
        const Tensor& x = value(n.c);
        const auto& in_shape = n.aux_shape;
        const int ic = in_shape[0], ih = in_shape[1], iw = in_shape[2];
        const int oc = k.shape()[0], kh = k.shape()[2], kw = k.shape()[3];
        const int s = n.index;
        const int oh = (ih - kh) / s + 1;
        const int ow = (iw - kw) / s + 1;
        const bool wk = wants(n.a), wb = wants(n.b), wx = wants(n.c);
        Tensor* gk = wk ? &grad_buf(n.a) : nullptr;
        Tensor* gb = wb ? &grad_buf(n.b) : nullptr;
        Tensor* gx = wx ? &grad_buf(n.c) : nullptr;
        for (int o = 0; o < oc; ++o) {
            for (int y = 0; y < oh; ++y) {
                for (int xo = 0; xo < ow; ++xo) {
                    const double go = g[(static_cast<std::int64_t>(o) * oh + y) * ow + xo];
                    if (go == 0.0) continue;
                    if (wb) (*gb)[o] += go;
                    for (int c = 0; c < ic; ++c) {
                        for (int ky = 0; ky < kh; ++ky) {
                            const std::int64_t kbase = (((static_cast<std::int64_t>(o) * ic + c) * kh + ky) * kw);
                            const std::int64_t xbase =
                                (static_cast<std::int64_t>(c) * ih + (y * s + ky)) * iw + xo * s;
                            for (int kx = 0; kx < kw; ++kx) {
                                if (wk) (*gk)[kbase + kx] += go * x[xbase + kx];
                                if (wx) (*gx)[xbase + kx] += go * k[kbase + kx];
                            }
                        }
                    }
                }
            }
        }
        return;
    }
    case Op::Relu: {
        if (!wants(n.a)) return;
        Tensor& gx = grad_buf(n.a);
        const Tensor& x = value(n.a);
        for (std::int64_t i = 0; i < x.size(); ++i) {
            if (x[i] > 0.0) gx[i] += g[i];
        }
        return;
    }
    case Op::Softmax: {
        if (!wants(n.a)) return;
        Tensor& gz = grad_buf(n.a);
        const Tensor& p = n.value;
        double dotpg = 0.0;
        for (std::int64_t i = 0; i < p.size(); ++i) dotpg += p[i] * g[i];
        for (std::int64_t i = 0; i < p.size(); ++i) gz[i] += p[i] * (g[i] - dotpg);
        return;
    }
    case Op::LogShift: {
        if (!wants(n.a)) return;
        Tensor& gx = grad_buf(n.a);
        const Tensor& x = value(n.a);
        for (std::int64_t i = 0; i < x.size(); ++i) gx[i] += g[i] / (x[i] + n.scalar);
        return;
    }
    case Op::Pick: {
        if (!wants(n.a)) return;
        grad_buf(n.a)[n.index] += g[0];
        return;
    }
    case Op::Sum: {
        if (!wants(n.a)) return;
        Tensor& gx = grad_buf(n.a);
        for (std::int64_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
        return;
    }
    case Op::Add: {
        if (wants(n.a)) {
            Tensor& ga = grad_buf(n.a);
            for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (wants(n.b)) {
            Tensor& gb = grad_buf(n.b);
            for (std::int64_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
        return;
    }
    case Op::Sub: {
        if (wants(n.a)) {
            Tensor& ga = grad_buf(n.a);
            for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (wants(n.b)) {
            Tensor& gb = grad_buf(n.b);
            for (std::int64_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
        return;
    }
    case Op::Mul: {
        if (wants(n.a)) {
            Tensor& ga = grad_buf(n.a);
            const Tensor& b = value(n.b);
            for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
        }
        if (wants(n.b)) {
            Tensor& gb = grad_buf(n.b);
            const Tensor& a = value(n.a);
            for (std::int64_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
        }
        return;
    }
    case Op::Scale: {
        if (!wants(n.a)) return;
        Tensor& ga = grad_buf(n.a);
        for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.scalar;
        return;
    }
    case Op::AddConst: {
        if (!wants(n.a)) return;
        Tensor& ga = grad_buf(n.a);
        for (std::int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        return;
    }
    case Op::Dot: {
        const double g0 = g[0];
        if (wants(n.a)) {
            Tensor& ga = grad_buf(n.a);
            const Tensor& b = value(n.b);
            for (std::int64_t i = 0; i < ga.size(); ++i) ga[i] += g0 * b[i];
        }
        if (wants(n.b)) {
            Tensor& gb = grad_buf(n.b);
            const Tensor& a = value(n.a);
            for (std::int64_t i = 0; i < gb.size(); ++i) gb[i] += g0 * a[i];
        }
        return;
    }
    }
    throw UnsupportedOpError("backprop: unhandled op");
}

TapeNet TapeNet::build(Tape& tape, const LayeredNetwork& net, bool params_constant) {
    TapeNet tn;
    for (const auto& key : net.parameter_keys(false)) {
        const bool track = !params_constant && !net.layer(key.layer).frozen;
        tn.params[key] = tape.leaf(net.param(key), track);
    }
    return tn;
}

NodeId TapeNet::forward(Tape& tape, const LayeredNetwork& net, NodeId x, int first_layer) const {
    NodeId cur = x;
    for (int i = first_layer; i < net.layer_count(); ++i) {
        const Layer& l = net.layer(i);
        switch (l.kind) {
        case LayerKind::Relu:
            cur = tape.relu(cur);
            break;
        case LayerKind::Dense:
            cur = tape.dense(params.at({i, ParamKey::Weight}), params.at({i, ParamKey::Bias}), cur);
            break;
        case LayerKind::Conv:
            cur = tape.conv(params.at({i, ParamKey::Weight}), params.at({i, ParamKey::Bias}), cur,
                            l.stride, l.in_shape);
            break;
        }
    }
    return cur;
}

GradientMap reduce_gradients(std::vector<GradientMap> per_example) {
    if (per_example.empty()) return {};
    // Pairwise tree keyed by example index; the shape of the tree depends
    // only on the batch size.
    std::size_t n = per_example.size();
    while (n > 1) {
        const std::size_t half = (n + 1) / 2;
        for (std::size_t i = 0; i + half < n; ++i) {
            GradientMap& dst = per_example[i];
            GradientMap& src = per_example[i + half];
            for (auto& [key, grad] : src) {
                auto it = dst.find(key);
                if (it == dst.end()) {
                    dst[key] = std::move(grad);
                } else {
                    Tensor& acc = it->second;
                    for (std::int64_t j = 0; j < acc.size(); ++j) acc[j] += grad[j];
                }
            }
        }
        n = half;
    }
    return std::move(per_example[0]);
}

GradientMap grad_params(const LayeredNetwork& net, const LossClosure& loss, int batch_size,
                        double* loss_sum) {
    std::vector<GradientMap> per_example(static_cast<std::size_t>(batch_size));
    double total = 0.0;
    for (int i = 0; i < batch_size; ++i) {
        Tape tape;
        TapeNet tn = TapeNet::build(tape, net);
        NodeId root = loss(tape, tn, i);
        total += tape.value(root)[0];
        tape.backward(root);
        GradientMap& gm = per_example[static_cast<std::size_t>(i)];
        for (const auto& key : net.parameter_keys(true)) {
            gm[key] = tape.grad(tn.params.at(key));
        }
    }
    if (loss_sum) *loss_sum = total;
    return reduce_gradients(std::move(per_example));
}

Tensor grad_wrt_activation(const LayeredNetwork& net, int first_suffix_layer,
                           const Tensor& activation, const LogitLoss& loss) {
    Tape tape;
    TapeNet tn = TapeNet::build(tape, net, /*params_constant=*/true);
    NodeId x = tape.leaf(activation, true);
    NodeId logits = tn.forward(tape, net, x, first_suffix_layer);
    NodeId root = loss(tape, logits);
    tape.backward(root);
    return tape.grad(x);
}

} // namespace zonocert::nn
