#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtgan/common.hpp"

namespace mtgan {

// Dense row-major double tensor. Feature maps use NCHW order throughout.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> shape);
    Tensor(std::vector<std::int64_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::int64_t> shape);
    static Tensor full(std::vector<std::int64_t> shape, double value);
    static Tensor randn(std::vector<std::int64_t> shape, Rng& rng, double stddev = 1.0);
    static Tensor uniform(std::vector<std::int64_t> shape, Rng& rng, double lo, double hi);
    static Tensor scalar(double value);

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t dim() const { return static_cast<std::int64_t>(shape_.size()); }
    std::int64_t size(std::int64_t d) const { return shape_.at(static_cast<std::size_t>(d)); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool defined() const { return !shape_.empty() || !data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // NCHW accessor, bounds unchecked.
    double& at4(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
        return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    double at4(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
        return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }

    Tensor reshaped(std::vector<std::int64_t> shape) const;

    void fill(double v);
    void add_(const Tensor& other);          // elementwise +=
    void add_scaled_(const Tensor& other, double s);
    void scale_(double s);

    double sum() const;
    double abs_max() const;
    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::string shape_str() const;
    static std::string shape_str(const std::vector<std::int64_t>& shape);

private:
    std::vector<std::int64_t> shape_;
    std::vector<double> data_;
};

std::int64_t shape_numel(const std::vector<std::int64_t>& shape);

}  // namespace mtgan
