#pragma once

#include <functional>
#include <map>
#include <vector>

#include "zonocert/network.hpp"
#include "zonocert/tensor.hpp"

namespace zonocert::nn {

using NodeId = int;

// Reverse-mode tape over whole tensors. Nodes are appended in evaluation
// order, so a single reverse sweep is a valid topological traversal.
class Tape {
public:
    NodeId leaf(Tensor value, bool requires_grad);
    NodeId constant(Tensor value) { return leaf(std::move(value), false); }

    NodeId dense(NodeId w, NodeId b, NodeId x);
    NodeId conv(NodeId kernel, NodeId b, NodeId x, int stride, std::vector<int> in_shape);
    NodeId relu(NodeId x);
    NodeId softmax(NodeId z);
    NodeId log_shift(NodeId x, double shift); // log(x + shift), elementwise
    NodeId pick(NodeId x, int index);
    NodeId sum(NodeId x);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b); // elementwise
    NodeId scale(NodeId a, double c);
    NodeId add_const(NodeId a, double c);
    NodeId dot(NodeId a, NodeId b);

    const Tensor& value(NodeId id) const { return nodes_[check(id)].value; }
    bool requires_grad(NodeId id) const { return nodes_[check(id)].needs_grad; }

    // Reverse sweep from a scalar root.
    void backward(NodeId root);
    // Zero tensor when the root did not depend on the node.
    const Tensor& grad(NodeId id);

private:
    enum class Op {
        Leaf,
        Dense,
        Conv,
        Relu,
        Softmax,
        LogShift,
        Pick,
        Sum,
        Add,
        Sub,
        Mul,
        Scale,
        AddConst,
        Dot,
    };
    struct Node {
        Op op = Op::Leaf;
        Tensor value;
        Tensor grad;
        bool needs_grad = false;
        NodeId a = -1, b = -1, c = -1;
        double scalar = 0.0;
        int index = 0;
        std::vector<int> aux_shape;
    };
    std::vector<Node> nodes_;
    bool swept_ = false;

    std::size_t check(NodeId id) const;
    NodeId push(Node n);
    void backprop_node(NodeId id);
    Tensor& grad_buf(NodeId id);
};

// Parameter leaves for a network on one tape. Frozen layers enter as
// constants, so they never receive gradient entries.
struct TapeNet {
    std::map<ParamKey, NodeId> params;
    static TapeNet build(Tape& tape, const LayeredNetwork& net, bool params_constant = false);
    NodeId forward(Tape& tape, const LayeredNetwork& net, NodeId x, int first_layer = 0) const;
};

// Builds the per-example loss node; index identifies the example in the batch.
using LossClosure = std::function<NodeId(Tape&, const TapeNet&, int)>;

// Sum of per-example gradients for all unfrozen parameters. Reduction is a
// fixed pairwise tree over example index, so the result is independent of
// any parallel execution of the examples.
GradientMap grad_params(const LayeredNetwork& net, const LossClosure& loss, int batch_size,
                        double* loss_sum = nullptr);

using LogitLoss = std::function<NodeId(Tape&, NodeId logits)>;

// Gradient of the suffix loss with respect to an intermediate activation;
// first_suffix_layer is the number of layers already consumed.
Tensor grad_wrt_activation(const LayeredNetwork& net, int first_suffix_layer,
                           const Tensor& activation, const LogitLoss& loss);

// Deterministic pairwise-tree sum of per-example gradient maps.
GradientMap reduce_gradients(std::vector<GradientMap> per_example);

} // namespace zonocert::nn
