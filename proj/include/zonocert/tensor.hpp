#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "zonocert/errors.hpp"

namespace zonocert::nn {

// Dense n-dimensional array, row-major. Entries are kept finite: constructors
// and deserialization reject NaN/Inf so downstream math can assume clean data.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor from_vector(std::vector<double> v);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    void fill(double v);
    bool all_finite() const;
    void check_finite(const std::string& context) const;

    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

std::int64_t shape_product(const std::vector<int>& shape);

} // namespace zonocert::nn
