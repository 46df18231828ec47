#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ssimnet/error.hpp"

namespace ssimnet {

// Dense n-dimensional array of doubles in row-major order. Tensors are
// plain values: operations return new tensors and never mutate shared
// state, so read-only sharing across threads is safe.
class Tensor {
  public:
    Tensor() = default;

    // Allocates a zero-filled tensor. Every dimension must be >= 1.
    explicit Tensor(std::vector<std::size_t> shape);

    static Tensor zeros(std::vector<std::size_t> shape);

    // Adopts an existing buffer; data.size() must equal the shape product.
    static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data);

    // i.i.d. standard-normal samples from a seeded generator. The sampling
    // transform is pinned in this library (not delegated to
    // std::normal_distribution) so identical (shape, seed) pairs produce
    // bitwise-identical tensors across standard libraries.
    static Tensor randn(std::vector<std::size_t> shape, std::uint64_t seed);

    // Like randn but scaled to standard deviation `stddev`.
    static Tensor randn_scaled(std::vector<std::size_t> shape, std::uint64_t seed, double stddev);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Rank-checked accessors for the common layouts.
    double& at(std::size_t i, std::size_t j);
    double at(std::size_t i, std::size_t j) const;
    double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
    double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

    // Same data, new shape; element counts must agree.
    Tensor reshaped(std::vector<std::size_t> shape) const;

    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    void fill(double value);

    Tensor& operator+=(const Tensor& other);
    Tensor& operator-=(const Tensor& other);
    Tensor& operator*=(double scalar);

    bool operator==(const Tensor& other) const = default;

  private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Batch/channel/height/width geometry of image tensors.
struct Shape4 {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    // All four dimensions must be strictly positive.
    static Shape4 of(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
    static Shape4 from_tensor(const Tensor& t);

    std::vector<std::size_t> dims() const { return {n, c, h, w}; }
    std::size_t count() const { return n * c * h * w; }

    bool operator==(const Shape4&) const = default;
};

// Pointwise operations. Tensor-tensor forms require equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(double scalar, const Tensor& a);

// Flattened multi-channel window read from a (C,H,W) tensor.
//
// The window of size (kh, kw) is placed so that its center sits at
// (row, col); for even extents the center rounds toward the top-left.
// Positions outside the image but inside the zero-padded bounds
// contribute 0. The result has length C*kh*kw in channel-major order.
Tensor extract_patch(const Tensor& input, std::size_t row, std::size_t col,
                     std::size_t kh, std::size_t kw, std::size_t padding);

}  // namespace ssimnet
