#include "zonocert/tensor.hpp"

#include <cmath>
#include <sstream>

namespace zonocert::nn {

std::int64_t shape_product(const std::vector<int>& shape) {
    std::int64_t p = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("dimensions must be positive, got " + std::to_string(d));
        p *= d;
    }
    return p;
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_product(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != static_cast<std::int64_t>(data_.size())) {
        throw ShapeError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str());
    }
    check_finite("tensor construction");
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::from_vector(std::vector<double> v) {
    const int n = static_cast<int>(v.size());
    return Tensor({n}, std::move(v));
}

void Tensor::fill(double v) {
    for (auto& x : data_) x = v;
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void Tensor::check_finite(const std::string& context) const {
    if (!all_finite()) throw DomainError("non-finite entry in " + context);
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << ",";
        os << shape_[i];
    }
    os << ")";
    return os.str();
}

} // namespace zonocert::nn
