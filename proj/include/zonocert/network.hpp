#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "zonocert/rng.hpp"
#include "zonocert/tensor.hpp"

namespace zonocert::nn {

enum class LayerKind { Dense, Conv, Relu };

struct Layer {
    LayerKind kind = LayerKind::Relu;
    Tensor weight; // Dense: (out, in); Conv: (out_ch, in_ch, kh, kw)
    Tensor bias;
    int stride = 1;
    bool frozen = false;

    // Filled in by LayeredNetwork when shapes are validated.
    std::vector<int> in_shape;
    std::vector<int> out_shape;

    static Layer dense(Tensor weight, Tensor bias);
    static Layer conv(Tensor kernel, int stride, Tensor bias);
    static Layer relu();

    bool parameterized() const { return kind != LayerKind::Relu; }
};

struct ParamKey {
    int layer = 0;
    enum Part { Weight = 0, Bias = 1 } part = Weight;
    auto operator<=>(const ParamKey&) const = default;
};

using GradientMap = std::map<ParamKey, Tensor>;

// Ordered stack of dense/conv/relu layers. A "block" is one parameterized
// layer together with the ReLU that follows it (if any); latent training
// stages and freeze boundaries are expressed in block units.
class LayeredNetwork {
public:
    LayeredNetwork() = default;
    LayeredNetwork(std::vector<int> input_shape, std::vector<Layer> layers);

    const std::vector<int>& input_shape() const { return input_shape_; }
    const std::vector<Layer>& layers() const { return layers_; }
    Layer& layer(int i) { return layers_.at(static_cast<std::size_t>(i)); }
    const Layer& layer(int i) const { return layers_.at(static_cast<std::size_t>(i)); }
    int layer_count() const { return static_cast<int>(layers_.size()); }

    // Count of parameterized stages (network depth d).
    int depth() const { return block_count(); }
    int block_count() const { return static_cast<int>(block_ends_.size()); }
    // Number of leading layers that make up blocks [0, b); b == 0 gives 0.
    int prefix_layers(int blocks) const;
    int num_classes() const;

    Tensor forward(const Tensor& x) const;
    Tensor forward_from(int first_layer, const Tensor& activation) const;
    std::vector<Tensor> forward_trace(const Tensor& x) const;
    int predict(const Tensor& x) const;

    // Freeze flags are monotone: freezing block b freezes every block before it.
    void freeze_through_block(int b);
    int frozen_blocks() const;

    std::vector<ParamKey> parameter_keys(bool unfrozen_only) const;
    Tensor& param(const ParamKey& key);
    const Tensor& param(const ParamKey& key) const;
    std::int64_t parameter_count() const;

private:
    std::vector<int> input_shape_;
    std::vector<Layer> layers_;
    std::vector<int> block_ends_; // block b covers layers [block_ends_[b-1], block_ends_[b])
    void validate_and_annotate();
};

Tensor apply_layer(const Layer& layer, const Tensor& x);
std::vector<int> layer_output_shape(const Layer& layer, const std::vector<int>& in_shape);

// He-style uniform fan-in init; biases zero. Per-layer streams are derived
// from the seed so the result does not depend on traversal details.
void init_he_uniform(LayeredNetwork& net, std::uint64_t seed);

int argmax_lowest(const Tensor& v);

} // namespace zonocert::nn
