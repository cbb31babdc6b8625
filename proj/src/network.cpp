#include "zonocert/network.hpp"

#include <cmath>
#include <string>

namespace zonocert::nn {

Layer Layer::dense(Tensor weight, Tensor bias) {
    if (weight.rank() != 2) throw ShapeError("dense weight must be 2-D, got " + weight.shape_str());
    if (bias.rank() != 1 || bias.shape()[0] != weight.shape()[0]) {
        throw ShapeError("dense bias must have length equal to output dimension");
    }
    Layer l;
    l.kind = LayerKind::Dense;
    l.weight = std::move(weight);
    l.bias = std::move(bias);
    return l;
}

Layer Layer::conv(Tensor kernel, int stride, Tensor bias) {
    if (kernel.rank() != 4) throw ShapeError("conv kernel must be 4-D, got " + kernel.shape_str());
    if (stride < 1) throw ShapeError("conv stride must be >= 1");
    if (bias.rank() != 1 || bias.shape()[0] != kernel.shape()[0]) {
        throw ShapeError("conv bias must have length equal to out-channels");
    }
    Layer l;
    l.kind = LayerKind::Conv;
    l.weight = std::move(kernel);
    l.bias = std::move(bias);
    l.stride = stride;
    return l;
}

Layer Layer::relu() {
    Layer l;
    l.kind = LayerKind::Relu;
    return l;
}

std::vector<int> layer_output_shape(const Layer& layer, const std::vector<int>& in_shape) {
    switch (layer.kind) {
    case LayerKind::Relu:
        return in_shape;
    case LayerKind::Dense: {
        const std::int64_t in_features = shape_product(in_shape);
        if (in_features != layer.weight.shape()[1]) {
            throw ShapeError("dense expects " + std::to_string(layer.weight.shape()[1]) +
                             " inputs, got " + std::to_string(in_features));
        }
        return {layer.weight.shape()[0]};
    }
    case LayerKind::Conv: {
        if (in_shape.size() != 3) throw ShapeError("conv input must be (channels, h, w)");
        const int ic = in_shape[0], ih = in_shape[1], iw = in_shape[2];
        const int oc = layer.weight.shape()[0];
        const int kc = layer.weight.shape()[1];
        const int kh = layer.weight.shape()[2];
        const int kw = layer.weight.shape()[3];
        if (kc != ic) throw ShapeError("conv kernel expects " + std::to_string(kc) +
                                       " input channels, got " + std::to_string(ic));
        if (kh > ih || kw > iw) throw ShapeError("conv kernel larger than input");
        const int oh = (ih - kh) / layer.stride + 1;
        const int ow = (iw - kw) / layer.stride + 1;
        return {oc, oh, ow};
    }
    }
    throw ShapeError("unknown layer kind");
}

Tensor apply_layer(const Layer& layer, const Tensor& x) {
    switch (layer.kind) {
    case LayerKind::Relu: {
        Tensor out = x;
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
        return out;
    }
    case LayerKind::Dense: {
        const int out_n = layer.weight.shape()[0];
        const int in_n = layer.weight.shape()[1];
        if (x.size() != in_n) {
            throw ShapeError("dense input size " + std::to_string(x.size()) +
                             ", expected " + std::to_string(in_n));
        }
        Tensor out({out_n});
        const double* w = layer.weight.data();
        for (int r = 0; r < out_n; ++r) {
            double acc = layer.bias[r];
            const double* row = w + static_cast<std::int64_t>(r) * in_n;
            for (int c = 0; c < in_n; ++c) acc += row[c] * x[c];
            out[r] = acc;
        }
        return out;
    }
    case LayerKind::Conv: {
        const auto& in_shape = layer.in_shape;
        const auto& out_shape = layer.out_shape;
        if (x.size() != shape_product(in_shape)) {
            throw ShapeError("conv input size " + std::to_string(x.size()));
        }
        const int ic = in_shape[0], ih = in_shape[1], iw = in_shape[2];
        const int oc = out_shape[0], oh = out_shape[1], ow = out_shape[2];
        const int kh = layer.weight.shape()[2], kw = layer.weight.shape()[3];
        const int s = layer.stride;
        Tensor out(out_shape);
        const double* k = layer.weight.data();
        for (int o = 0; o < oc; ++o) {
            for (int y = 0; y < oh; ++y) {
                for (int xo = 0; xo < ow; ++xo) {
                    double acc = layer.bias[o];
                    for (int c = 0; c < ic; ++c) {
                        for (int ky = 0; ky < kh; ++ky) {
                            const double* krow =
                                k + (((static_cast<std::int64_t>(o) * ic + c) * kh + ky) * kw);
                            const double* xrow =
                                x.data() + (static_cast<std::int64_t>(c) * ih + (y * s + ky)) * iw + xo * s;
                            for (int kx = 0; kx < kw; ++kx) acc += krow[kx] * xrow[kx];
                        }
                    }
                    out[(static_cast<std::int64_t>(o) * oh + y) * ow + xo] = acc;
                }
            }
        }
        return out;
    }
    }
    throw ShapeError("unknown layer kind");
}

LayeredNetwork::LayeredNetwork(std::vector<int> input_shape, std::vector<Layer> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
    validate_and_annotate();
}

void LayeredNetwork::validate_and_annotate() {
    if (layers_.empty()) throw ShapeError("network needs at least one layer");
    shape_product(input_shape_);
    std::vector<int> cur = input_shape_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i].in_shape = cur;
        cur = layer_output_shape(layers_[i], cur);
        layers_[i].out_shape = cur;
    }
    block_ends_.clear();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (!layers_[i].parameterized()) {
            if (i == 0) throw ShapeError("network cannot start with a bare ReLU");
            continue;
        }
        // Block = parameterized layer plus the ReLU that follows, if any.
        std::size_t end = i + 1;
        if (end < layers_.size() && layers_[end].kind == LayerKind::Relu) ++end;
        block_ends_.push_back(static_cast<int>(end));
    }
    if (block_ends_.empty()) throw ShapeError("network has no parameterized layers");
    // Freeze flags must already be monotone if provided by the caller.
    bool seen_unfrozen = false;
    for (const auto& l : layers_) {
        if (!l.parameterized()) continue;
        if (l.frozen && seen_unfrozen) throw ShapeError("freeze flags must be monotone");
        if (!l.frozen) seen_unfrozen = true;
    }
}

int LayeredNetwork::prefix_layers(int blocks) const {
    if (blocks < 0 || blocks > block_count()) {
        throw IndexError("block prefix " + std::to_string(blocks) + " out of range");
    }
    return blocks == 0 ? 0 : block_ends_[static_cast<std::size_t>(blocks - 1)];
}

int LayeredNetwork::num_classes() const {
    return static_cast<int>(shape_product(layers_.back().out_shape));
}

Tensor LayeredNetwork::forward(const Tensor& x) const { return forward_from(0, x); }

Tensor LayeredNetwork::forward_from(int first_layer, const Tensor& activation) const {
    if (first_layer < 0 || first_layer > layer_count()) {
        throw IndexError("layer index " + std::to_string(first_layer));
    }
    const std::vector<int>& expect =
        first_layer == 0 ? input_shape_ : layers_[static_cast<std::size_t>(first_layer - 1)].out_shape;
    if (activation.size() != shape_product(expect)) {
        throw ShapeError("activation size " + std::to_string(activation.size()) +
                         " does not match layer input " + std::to_string(shape_product(expect)));
    }
    Tensor cur = activation;
    for (int i = first_layer; i < layer_count(); ++i) {
        cur = apply_layer(layers_[static_cast<std::size_t>(i)], cur);
    }
    return cur;
}

std::vector<Tensor> LayeredNetwork::forward_trace(const Tensor& x) const {
    std::vector<Tensor> trace;
    trace.reserve(layers_.size());
    Tensor cur = x;
    for (const auto& l : layers_) {
        cur = apply_layer(l, cur);
        trace.push_back(cur);
    }
    return trace;
}

int LayeredNetwork::predict(const Tensor& x) const { return argmax_lowest(forward(x)); }

void LayeredNetwork::freeze_through_block(int b) {
    if (b < 0 || b > block_count()) throw IndexError("freeze block " + std::to_string(b));
    int block = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (!layers_[i].parameterized()) continue;
        layers_[i].frozen = block < b;
        ++block;
    }
}

int LayeredNetwork::frozen_blocks() const {
    int n = 0;
    for (const auto& l : layers_) {
        if (l.parameterized() && l.frozen) ++n;
    }
    return n;
}

std::vector<ParamKey> LayeredNetwork::parameter_keys(bool unfrozen_only) const {
    std::vector<ParamKey> keys;
    for (int i = 0; i < layer_count(); ++i) {
        const Layer& l = layers_[static_cast<std::size_t>(i)];
        if (!l.parameterized()) continue;
        if (unfrozen_only && l.frozen) continue;
        keys.push_back({i, ParamKey::Weight});
        keys.push_back({i, ParamKey::Bias});
    }
    return keys;
}

Tensor& LayeredNetwork::param(const ParamKey& key) {
    Layer& l = layer(key.layer);
    if (!l.parameterized()) throw IndexError("layer has no parameters");
    return key.part == ParamKey::Weight ? l.weight : l.bias;
}

const Tensor& LayeredNetwork::param(const ParamKey& key) const {
    const Layer& l = layer(key.layer);
    if (!l.parameterized()) throw IndexError("layer has no parameters");
    return key.part == ParamKey::Weight ? l.weight : l.bias;
}

std::int64_t LayeredNetwork::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& key : parameter_keys(false)) n += param(key).size();
    return n;
}

void init_he_uniform(LayeredNetwork& net, std::uint64_t seed) {
    int block = 0;
    for (int i = 0; i < net.layer_count(); ++i) {
        Layer& l = net.layer(i);
        if (!l.parameterized()) continue;
        Rng rng(derive_seed(seed, {0x1717, static_cast<std::uint64_t>(block)}));
        std::int64_t fan_in = 0;
        if (l.kind == LayerKind::Dense) {
            fan_in = l.weight.shape()[1];
        } else {
            fan_in = static_cast<std::int64_t>(l.weight.shape()[1]) * l.weight.shape()[2] *
                     l.weight.shape()[3];
        }
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (std::int64_t j = 0; j < l.weight.size(); ++j) {
            l.weight[j] = rng.uniform(-limit, limit);
        }
        l.bias.fill(0.0);
        ++block;
    }
}

int argmax_lowest(const Tensor& v) {
    if (v.size() == 0) throw ShapeError("argmax of empty tensor");
    int best = 0;
    for (std::int64_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = static_cast<int>(i);
    }
    return best;
}

} // namespace zonocert::nn
