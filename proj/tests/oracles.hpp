#pragma once

// Independent reference implementations used only by tests. These
// deliberately avoid the library's Eigen/tape code paths so that agreement
// is meaningful.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "zonocert/dataset.hpp"
#include "zonocert/network.hpp"

namespace zonocert::testsupport {

// Plain-loop forward through dense/conv/relu layers.
std::vector<double> naive_forward(const nn::LayeredNetwork& net, const std::vector<double>& x);

// Extended-precision softmax / cross-entropy / KL.
std::vector<double> softmax_ld(const std::vector<double>& z);
double cross_entropy_ld(const std::vector<double>& p, int y);
double kl_ld(const std::vector<double>& p, const std::vector<double>& q);

// Central finite differences of f over a parameter vector.
std::vector<double> finite_diff(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> theta, double h);

// Per-coordinate min/max of a + A e over all sign vectors e in {-1,1}^m.
struct EnumBounds {
    std::vector<double> lower, upper;
};
EnumBounds enumerate_bounds(const std::vector<double>& center,
                            const std::vector<std::vector<double>>& columns);

// Convex polygon in the plane (counter-clockwise).
struct Poly2 {
    std::vector<std::array<double, 2>> pts;
    bool empty() const { return pts.size() < 3; }
};
Poly2 rect_poly(double x0, double x1, double y0, double y1);
// Keep the side a*x + b*y + c >= 0.
Poly2 clip_halfplane(const Poly2& poly, double a, double b, double c);

// Exact robustness ground truth for 2-input dense/ReLU networks: enumerates
// all ReLU sign patterns and maximizes each competitor margin over the
// clipped pattern polygon.
struct ExactVerdict {
    bool robust = false;
    double max_margin = 0.0; // over all patterns and competitors
    std::array<double, 2> argmax{0.0, 0.0};
};
ExactVerdict enumerate_verify_2d(const nn::LayeredNetwork& net, const std::array<double, 2>& x,
                                 int y, double eps);

// Byte-offset IDX reader, independent of data::load_mnist_idx.
struct RawIdx {
    int count = 0, rows = 0, cols = 0;
    std::vector<unsigned char> pixels; // count*rows*cols
    std::vector<unsigned char> labels;
};
RawIdx read_idx_reference(const std::string& images_path, const std::string& labels_path);

} // namespace zonocert::testsupport
