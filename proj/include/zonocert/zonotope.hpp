#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include "zonocert/network.hpp"
#include "zonocert/tensor.hpp"

namespace zonocert::zono {

using SparseMat = Eigen::SparseMatrix<double>;

struct IntervalBounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

// Convex region {a + A e | e in [-1,1]^m}. Generators are stored sparsely:
// input regions are diagonal and ReLU relaxation columns have one nonzero,
// so most columns stay very short even after several layers.
class Zonotope {
public:
    Zonotope(Eigen::VectorXd center, SparseMat generators, std::vector<int> provenance,
             int layer_tag);

    int dim() const { return static_cast<int>(center_.size()); }
    int generator_count() const { return static_cast<int>(generators_.cols()); }
    const Eigen::VectorXd& center() const { return center_; }
    const SparseMat& generators() const { return generators_; }
    // For each column, the layer_tag of the zonotope that introduced it
    // (0 for input-region columns).
    const std::vector<int>& provenance() const { return provenance_; }
    int layer_tag() const { return layer_tag_; }

    Eigen::VectorXd sample(const Eigen::VectorXd& e) const;
    void dump(std::ostream& os) const;

private:
    Eigen::VectorXd center_;
    SparseMat generators_;
    std::vector<int> provenance_;
    int layer_tag_ = 0;
};

// L-inf ball of radius eps around x, clipped to [0,1]; diagonal generators.
Zonotope input_region(const nn::Tensor& x, double eps);

// Exact image under a dense or conv layer; generator count unchanged.
Zonotope affine(const Zonotope& z, const nn::Layer& layer, const SparseMat* conv_matrix = nullptr);

// Sound ReLU transform. Stable rows pass through or zero out; crossing rows
// get the slope/offset relaxation plus one fresh generator column. Bounds may
// be supplied by the caller (e.g. estimated); exact bounds are the default.
Zonotope relu(const Zonotope& z, const IntervalBounds* precomputed = nullptr);

// Exact per-row interval: center +- row L1 of the generators.
IntervalBounds bounds(const Zonotope& z);

// Randomized row-L1 estimate: per-row median of |A R| over k standard Cauchy
// projection columns. Training-time speedup only; never used for certificates.
Eigen::VectorXd l1_rows_cauchy(const Zonotope& z, int k, std::uint64_t seed);

// Conv layers lowered to explicit sparse affine maps so zonotope propagation
// shares one exact code path. Cache is shared across propagations of a fixed
// network; safe for concurrent readers.
SparseMat conv_affine_matrix(const nn::Layer& layer);

class AffineCache {
public:
    const SparseMat& conv_matrix(const nn::LayeredNetwork& net, int layer_index);

private:
    std::map<int, SparseMat> mats_;
    std::mutex mu_;
};

struct BoundsEstimator {
    int cauchy_k = 0; // 0 -> exact row L1
    std::uint64_t seed = 0;
};

// Applies layers [0, layer_count) of the network.
Zonotope propagate_prefix(const nn::LayeredNetwork& net, Zonotope z, int layer_count,
                          AffineCache* cache = nullptr, const BoundsEstimator* est = nullptr);

} // namespace zonocert::zono
