#include "ssimnet/tensor.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

namespace ssimnet {

namespace {

std::size_t checked_count(const std::vector<std::size_t>& shape) {
    if (shape.empty()) {
        throw shape_error("tensor shape must have at least one dimension");
    }
    std::size_t count = 1;
    for (std::size_t dim : shape) {
        if (dim == 0) {
            throw shape_error("tensor dimensions must be >= 1");
        }
        count *= dim;
    }
    return count;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream out;
    out << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        out << (i ? "," : "") << shape[i];
    }
    out << ")";
    return out.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw shape_error(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                          " vs " + shape_string(b.shape()));
    }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) {
    std::size_t count = checked_count(shape);
    shape_ = std::move(shape);
    data_.assign(count, 0.0);
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    return Tensor(std::move(shape));
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data) {
    std::size_t count = checked_count(shape);
    if (count != data.size()) {
        throw shape_error("from_data: " + std::to_string(data.size()) +
                          " values for shape " + shape_string(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

Tensor Tensor::randn(std::vector<std::size_t> shape, std::uint64_t seed) {
    return randn_scaled(std::move(shape), seed, 1.0);
}

Tensor Tensor::randn_scaled(std::vector<std::size_t> shape, std::uint64_t seed, double stddev) {
    Tensor t(std::move(shape));
    std::mt19937_64 gen(seed);
    // 53-bit uniform in [0,1).
    auto next_unit = [&gen] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
    const double two_pi = 2.0 * std::numbers::pi;
    std::size_t i = 0;
    const std::size_t n = t.size();
    while (i < n) {
        // Box-Muller; u1 shifted into (0,1] so the log stays finite.
        const double u1 = 1.0 - next_unit();
        const double u2 = next_unit();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        t.data_[i++] = stddev * radius * std::cos(two_pi * u2);
        if (i < n) {
            t.data_[i++] = stddev * radius * std::sin(two_pi * u2);
        }
    }
    return t;
}

double& Tensor::at(std::size_t i, std::size_t j) {
    if (rank() != 2) {
        throw shape_error("at(i,j) requires a rank-2 tensor");
    }
    return data_[i * shape_[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    if (rank() != 2) {
        throw shape_error("at(i,j) requires a rank-2 tensor");
    }
    return data_[i * shape_[1] + j];
}

double& Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    if (rank() != 4) {
        throw shape_error("at(n,c,h,w) requires a rank-4 tensor");
    }
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    if (rank() != 4) {
        throw shape_error("at(n,c,h,w) requires a rank-4 tensor");
    }
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
    std::size_t count = checked_count(shape);
    if (count != size()) {
        throw shape_error("reshaped: element count mismatch");
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

void Tensor::fill(double value) {
    std::fill(data_.begin(), data_.end(), value);
}

Tensor& Tensor::operator+=(const Tensor& other) {
    require_same_shape(*this, other, "add");
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] += other.data_[i];
    }
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
    require_same_shape(*this, other, "sub");
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] -= other.data_[i];
    }
    return *this;
}

Tensor& Tensor::operator*=(double scalar) {
    for (double& v : data_) {
        v *= scalar;
    }
    return *this;
}

Shape4 Shape4::of(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    if (n == 0 || c == 0 || h == 0 || w == 0) {
        throw shape_error("Shape4 dimensions must be strictly positive");
    }
    return Shape4{n, c, h, w};
}

Shape4 Shape4::from_tensor(const Tensor& t) {
    if (t.rank() != 4) {
        throw shape_error("expected a rank-4 (N,C,H,W) tensor, got rank " +
                          std::to_string(t.rank()));
    }
    const auto& s = t.shape();
    return Shape4::of(s[0], s[1], s[2], s[3]);
}

Tensor add(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    out += b;
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    Tensor out = a;
    out -= b;
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] *= b[i];
    }
    return out;
}

Tensor scalar_mul(double scalar, const Tensor& a) {
    Tensor out = a;
    out *= scalar;
    return out;
}

Tensor extract_patch(const Tensor& input, std::size_t row, std::size_t col,
                     std::size_t kh, std::size_t kw, std::size_t padding) {
    if (input.rank() != 3) {
        throw shape_error("extract_patch expects a (C,H,W) tensor");
    }
    if (kh == 0 || kw == 0) {
        throw shape_error("extract_patch: kernel extents must be >= 1");
    }
    const auto& s = input.shape();
    const std::ptrdiff_t channels = static_cast<std::ptrdiff_t>(s[0]);
    const std::ptrdiff_t height = static_cast<std::ptrdiff_t>(s[1]);
    const std::ptrdiff_t width = static_cast<std::ptrdiff_t>(s[2]);
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(padding);

    const std::ptrdiff_t top = static_cast<std::ptrdiff_t>(row) - static_cast<std::ptrdiff_t>((kh - 1) / 2);
    const std::ptrdiff_t left = static_cast<std::ptrdiff_t>(col) - static_cast<std::ptrdiff_t>((kw - 1) / 2);

    if (top < -pad || left < -pad ||
        top + static_cast<std::ptrdiff_t>(kh) > height + pad ||
        left + static_cast<std::ptrdiff_t>(kw) > width + pad) {
        throw shape_error("extract_patch: window exceeds padded bounds");
    }

    Tensor patch({static_cast<std::size_t>(channels) * kh * kw});
    double* out = patch.data();
    const double* in = input.data();
    for (std::ptrdiff_t c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < kh; ++i) {
            const std::ptrdiff_t r = top + static_cast<std::ptrdiff_t>(i);
            for (std::size_t j = 0; j < kw; ++j) {
                const std::ptrdiff_t q = left + static_cast<std::ptrdiff_t>(j);
                double value = 0.0;
                if (r >= 0 && r < height && q >= 0 && q < width) {
                    value = in[(c * height + r) * width + q];
                }
                *out++ = value;
            }
        }
    }
    return patch;
}

}  // namespace ssimnet
