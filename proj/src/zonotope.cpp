#include "zonocert/zonotope.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "zonocert/checkpoint.hpp"
#include "zonocert/rng.hpp"

namespace zonocert::zono {

namespace {
// Intervals narrower than this straddling zero are snapped to the center's
// sign instead of dividing by u - l.
constexpr double kStableWidth = 1e-9;
} // namespace

Zonotope::Zonotope(Eigen::VectorXd center, SparseMat generators, std::vector<int> provenance,
                   int layer_tag)
    : center_(std::move(center)),
      generators_(std::move(generators)),
      provenance_(std::move(provenance)),
      layer_tag_(layer_tag) {
    if (generators_.rows() != center_.size()) {
        throw ShapeError("zonotope generators have " + std::to_string(generators_.rows()) +
                         " rows for dimension " + std::to_string(center_.size()));
    }
    if (static_cast<int>(provenance_.size()) != generators_.cols()) {
        throw ShapeError("zonotope provenance length mismatch");
    }
}

Eigen::VectorXd Zonotope::sample(const Eigen::VectorXd& e) const {
    if (e.size() != generators_.cols()) {
        throw ShapeError("coefficient vector has size " + std::to_string(e.size()) + ", expected " +
                         std::to_string(generators_.cols()));
    }
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        if (std::abs(e[i]) > 1.0 + 1e-12) {
            throw DomainError("coefficient outside [-1,1] at index " + std::to_string(i));
        }
    }
    return center_ + generators_ * e;
}

void Zonotope::dump(std::ostream& os) const {
    os << "zonotope dim " << dim() << " generators " << generator_count() << " layer "
       << layer_tag_ << "\n";
    os << "center";
    for (Eigen::Index i = 0; i < center_.size(); ++i) os << " " << nn::format_double(center_[i]);
    os << "\nprovenance";
    for (int p : provenance_) os << " " << p;
    os << "\n";
    for (int j = 0; j < generators_.outerSize(); ++j) {
        for (SparseMat::InnerIterator it(generators_, j); it; ++it) {
            os << "gen " << it.row() << " " << j << " " << nn::format_double(it.value()) << "\n";
        }
    }
    os << "end\n";
}

Zonotope input_region(const nn::Tensor& x, double eps) {
    if (eps < 0.0) throw DomainError("epsilon must be non-negative");
    const std::int64_t n = x.size();
    for (std::int64_t i = 0; i < n; ++i) {
        if (x[i] < 0.0 || x[i] > 1.0) {
            throw DomainError("input entry " + std::to_string(i) + " outside [0,1]");
        }
    }
    Eigen::VectorXd center(n);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const double lo = std::max(0.0, x[i] - eps);
        const double hi = std::min(1.0, x[i] + eps);
        center[i] = 0.5 * (lo + hi);
        const double half = 0.5 * (hi - lo);
        if (half != 0.0) trips.emplace_back(static_cast<int>(i), static_cast<int>(i), half);
    }
    SparseMat gens(n, n);
    gens.setFromTriplets(trips.begin(), trips.end());
    return Zonotope(std::move(center), std::move(gens), std::vector<int>(static_cast<std::size_t>(n), 0), 0);
}

SparseMat conv_affine_matrix(const nn::Layer& layer) {
    if (layer.kind != nn::LayerKind::Conv) throw ShapeError("conv_affine_matrix needs a conv layer");
    const auto& in_shape = layer.in_shape;
    const auto& out_shape = layer.out_shape;
    const int ic = in_shape[0], ih = in_shape[1], iw = in_shape[2];
    const int oc = out_shape[0], oh = out_shape[1], ow = out_shape[2];
    const int kh = layer.weight.shape()[2], kw = layer.weight.shape()[3];
    const int s = layer.stride;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(oc) * oh * ow * ic * kh * kw);
    const double* k = layer.weight.data();
    for (int o = 0; o < oc; ++o) {
        for (int y = 0; y < oh; ++y) {
            for (int xo = 0; xo < ow; ++xo) {
                const int row = (o * oh + y) * ow + xo;
                for (int c = 0; c < ic; ++c) {
                    for (int ky = 0; ky < kh; ++ky) {
                        for (int kx = 0; kx < kw; ++kx) {
                            const double v = k[(((static_cast<std::int64_t>(o) * ic + c) * kh + ky) * kw) + kx];
                            if (v == 0.0) continue;
                            const int col = (c * ih + (y * s + ky)) * iw + (xo * s + kx);
                            trips.emplace_back(row, col, v);
                        }
                    }
                }
            }
        }
    }
    SparseMat m(oc * oh * ow, ic * ih * iw);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

const SparseMat& AffineCache::conv_matrix(const nn::LayeredNetwork& net, int layer_index) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = mats_.find(layer_index);
    if (it == mats_.end()) {
        it = mats_.emplace(layer_index, conv_affine_matrix(net.layer(layer_index))).first;
    }
    return it->second;
}

Zonotope affine(const Zonotope& z, const nn::Layer& layer, const SparseMat* conv_matrix) {
    switch (layer.kind) {
    case nn::LayerKind::Relu:
        throw ShapeError("affine() does not take ReLU layers");
    case nn::LayerKind::Dense: {
        const int out_n = layer.weight.shape()[0];
        const int in_n = layer.weight.shape()[1];
        if (z.dim() != in_n) {
            throw ShapeError("zonotope dim " + std::to_string(z.dim()) + " vs dense input " +
                             std::to_string(in_n));
        }
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
            layer.weight.data(), out_n, in_n);
        Eigen::Map<const Eigen::VectorXd> b(layer.bias.data(), out_n);
        Eigen::VectorXd center = w * z.center() + b;
        SparseMat gens = (w.sparseView() * z.generators()).pruned();
        return Zonotope(std::move(center), std::move(gens), z.provenance(), z.layer_tag() + 1);
    }
    case nn::LayerKind::Conv: {
        SparseMat local;
        const SparseMat* m = conv_matrix;
        if (!m) {
            local = conv_affine_matrix(layer);
            m = &local;
        }
        if (z.dim() != m->cols()) {
            throw ShapeError("zonotope dim " + std::to_string(z.dim()) + " vs conv input " +
                             std::to_string(m->cols()));
        }
        Eigen::VectorXd center = (*m) * z.center();
        const auto& os = layer.out_shape;
        const int oh_ow = os[1] * os[2];
        for (int o = 0; o < os[0]; ++o) {
            center.segment(static_cast<Eigen::Index>(o) * oh_ow, oh_ow).array() += layer.bias[o];
        }
        SparseMat gens = ((*m) * z.generators()).pruned();
        return Zonotope(std::move(center), std::move(gens), z.provenance(), z.layer_tag() + 1);
    }
    }
    throw ShapeError("unknown layer kind");
}

IntervalBounds bounds(const Zonotope& z) {
    Eigen::VectorXd radius = Eigen::VectorXd::Zero(z.dim());
    const SparseMat& g = z.generators();
    for (int j = 0; j < g.outerSize(); ++j) {
        for (SparseMat::InnerIterator it(g, j); it; ++it) {
            radius[it.row()] += std::abs(it.value());
        }
    }
    IntervalBounds b;
    b.lower = z.center() - radius;
    b.upper = z.center() + radius;
    return b;
}

Zonotope relu(const Zonotope& z, const IntervalBounds* precomputed) {
    IntervalBounds local;
    if (!precomputed) {
        local = bounds(z);
        precomputed = &local;
    }
    const Eigen::VectorXd& lo = precomputed->lower;
    const Eigen::VectorXd& up = precomputed->upper;
    if (lo.size() != z.dim() || up.size() != z.dim()) throw ShapeError("bounds dimension mismatch");

    const int d = z.dim();
    // Per-row factor; crossing rows additionally get an offset and one fresh
    // generator of magnitude offset.
    Eigen::VectorXd factor(d);
    Eigen::VectorXd offset = Eigen::VectorXd::Zero(d);
    std::vector<int> crossing;
    for (int i = 0; i < d; ++i) {
        const double l = lo[i], u = up[i];
        if (l >= 0.0) {
            factor[i] = 1.0;
        } else if (u <= 0.0) {
            factor[i] = 0.0;
        } else if (u - l < kStableWidth) {
            factor[i] = z.center()[i] >= 0.0 ? 1.0 : 0.0;
        } else {
            const double lambda = u / (u - l);
            const double mu = -u * l / (2.0 * (u - l));
            factor[i] = lambda;
            offset[i] = mu;
            crossing.push_back(i);
        }
    }

    Eigen::VectorXd center = z.center().cwiseProduct(factor) + offset;
    const SparseMat& g = z.generators();
    const int m = z.generator_count();
    const int m_new = m + static_cast<int>(crossing.size());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(g.nonZeros()) + crossing.size());
    for (int j = 0; j < g.outerSize(); ++j) {
        for (SparseMat::InnerIterator it(g, j); it; ++it) {
            const double v = it.value() * factor[it.row()];
            if (v != 0.0) trips.emplace_back(static_cast<int>(it.row()), j, v);
        }
    }
    const int tag = z.layer_tag() + 1;
    std::vector<int> provenance = z.provenance();
    provenance.reserve(static_cast<std::size_t>(m_new));
    for (std::size_t c = 0; c < crossing.size(); ++c) {
        trips.emplace_back(crossing[c], m + static_cast<int>(c), offset[crossing[c]]);
        provenance.push_back(tag);
    }
    SparseMat gens(d, m_new);
    gens.setFromTriplets(trips.begin(), trips.end());
    return Zonotope(std::move(center), std::move(gens), std::move(provenance), tag);
}

Eigen::VectorXd l1_rows_cauchy(const Zonotope& z, int k, std::uint64_t seed) {
    if (k < 1) throw DomainError("cauchy projection count must be >= 1");
    const int m = z.generator_count();
    const int d = z.dim();
    Rng rng(seed);
    Eigen::MatrixXd r(m, k);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < k; ++j) r(i, j) = rng.cauchy();
    }
    Eigen::MatrixXd proj = z.generators() * r; // d x k
    Eigen::VectorXd est(d);
    std::vector<double> row(static_cast<std::size_t>(k));
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < k; ++j) row[static_cast<std::size_t>(j)] = std::abs(proj(i, j));
        std::sort(row.begin(), row.end());
        est[i] = (k % 2 == 1) ? row[static_cast<std::size_t>(k / 2)]
                              : 0.5 * (row[static_cast<std::size_t>(k / 2 - 1)] +
                                       row[static_cast<std::size_t>(k / 2)]);
    }
    return est;
}

Zonotope propagate_prefix(const nn::LayeredNetwork& net, Zonotope z, int layer_count,
                          AffineCache* cache, const BoundsEstimator* est) {
    if (layer_count < 0 || layer_count > net.layer_count()) {
        throw IndexError("prefix length " + std::to_string(layer_count));
    }
    for (int i = z.layer_tag(); i < layer_count; ++i) {
        const nn::Layer& layer = net.layer(i);
        if (layer.kind == nn::LayerKind::Relu) {
            if (est && est->cauchy_k > 0) {
                const Eigen::VectorXd radius =
                    l1_rows_cauchy(z, est->cauchy_k, derive_seed(est->seed, {0xca, static_cast<std::uint64_t>(i)}));
                IntervalBounds b;
                b.lower = z.center() - radius;
                b.upper = z.center() + radius;
                z = relu(z, &b);
            } else {
                z = relu(z);
            }
        } else if (layer.kind == nn::LayerKind::Conv) {
            const SparseMat* m = cache ? &cache->conv_matrix(net, i) : nullptr;
            z = affine(z, layer, m);
        } else {
            z = affine(z, layer);
        }
    }
    return z;
}

} // namespace zonocert::zono
