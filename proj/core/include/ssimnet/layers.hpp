#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ssimnet/tensor.hpp"

namespace ssimnet {

enum class LayerKind { conv, ssim, relu, maxpool, fc, softmax_xent };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

// Declarative description of one layer, e.g. a 5x5/32 sliding-window
// stage with stride 1 and padding 2.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t out_channels = 0;  // conv, ssim, fc
    std::size_t kernel_h = 0;      // conv, ssim, maxpool
    std::size_t kernel_w = 0;
    std::size_t stride = 0;        // conv, ssim, maxpool
    std::size_t padding = 0;       // conv, ssim; maxpool runs unpadded

    static LayerSpec conv(std::size_t out_channels, std::size_t kernel, std::size_t stride,
                          std::size_t padding);
    static LayerSpec ssim(std::size_t out_channels, std::size_t kernel, std::size_t stride,
                          std::size_t padding);
    static LayerSpec relu();
    static LayerSpec maxpool(std::size_t window = 2, std::size_t stride = 2);
    static LayerSpec fc(std::size_t out_channels);
    static LayerSpec softmax_xent();

    // Enforces field presence per kind: kernel/stride only for windowed
    // kinds, out_channels only for parameterized kinds.
    void validate() const;

    bool operator==(const LayerSpec&) const = default;
};

// Named handle to one parameter tensor and its gradient accumulator.
// `decay` marks tensors included in the L2 regularization term (weights
// yes, biases no).
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
    bool decay = true;
};

// A differentiable layer. forward(x, cache=true) stores whatever the
// paired backward needs; the cache is valid for exactly one backward,
// which consumes it. forward with cache=false touches no member state
// beyond reads and is safe to call concurrently on a shared layer.
class Layer {
  public:
    virtual ~Layer() = default;

    virtual LayerKind kind() const = 0;
    virtual const LayerSpec& spec() const = 0;

    virtual Tensor forward(const Tensor& input, bool cache) = 0;

    // Returns grad wrt the forward input; accumulates parameter grads.
    // Throws state_error when no cached forward is pending.
    virtual Tensor backward(const Tensor& grad_out) = 0;

    virtual void collect_params(const std::string& prefix, std::vector<ParamRef>& out);

    virtual std::unique_ptr<Layer> clone() const = 0;
};

// 2-D convolution. Weights (F, C, kh, kw), bias (F), He-style init.
class Conv2dLayer final : public Layer {
  public:
    Conv2dLayer(const LayerSpec& spec, std::size_t in_channels, std::uint64_t seed);

    LayerKind kind() const override { return LayerKind::conv; }
    const LayerSpec& spec() const override { return spec_; }

    Tensor forward(const Tensor& input, bool cache) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    std::unique_ptr<Layer> clone() const override;

    std::size_t in_channels() const { return in_channels_; }
    Tensor& weights() { return weights_; }
    const Tensor& weights() const { return weights_; }
    Tensor& bias() { return bias_; }
    Tensor& grad_weights() { return grad_weights_; }
    Tensor& grad_bias() { return grad_bias_; }

  private:
    LayerSpec spec_;
    std::size_t in_channels_ = 0;
    Tensor weights_;
    Tensor bias_;
    Tensor grad_weights_;
    Tensor grad_bias_;
    Tensor cached_input_;
    bool has_cache_ = false;
};

class ReluLayer final : public Layer {
  public:
    ReluLayer() : spec_(LayerSpec::relu()) {}

    LayerKind kind() const override { return LayerKind::relu; }
    const LayerSpec& spec() const override { return spec_; }

    Tensor forward(const Tensor& input, bool cache) override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone() const override;

  private:
    LayerSpec spec_;
    // Subgradient at exactly 0 is 0, so the mask is input > 0.
    std::vector<unsigned char> mask_;
    std::vector<std::size_t> cached_shape_;
    bool has_cache_ = false;
};

// Square-window max pooling; odd trailing rows/columns are truncated.
// Gradient routes to the first occurrence of the window maximum in
// row-major order.
class MaxPoolLayer final : public Layer {
  public:
    explicit MaxPoolLayer(const LayerSpec& spec);

    LayerKind kind() const override { return LayerKind::maxpool; }
    const LayerSpec& spec() const override { return spec_; }

    Tensor forward(const Tensor& input, bool cache) override;
    Tensor backward(const Tensor& grad_out) override;
    std::unique_ptr<Layer> clone() const override;

  private:
    LayerSpec spec_;
    std::vector<std::size_t> argmax_;
    std::vector<std::size_t> cached_in_shape_;
    std::vector<std::size_t> cached_out_shape_;
    bool has_cache_ = false;
};

// Fully connected: flattens (N, ...) to (N, in), output = x W^T + b.
class FcLayer final : public Layer {
  public:
    FcLayer(const LayerSpec& spec, std::size_t in_features, std::uint64_t seed);

    LayerKind kind() const override { return LayerKind::fc; }
    const LayerSpec& spec() const override { return spec_; }

    Tensor forward(const Tensor& input, bool cache) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    std::unique_ptr<Layer> clone() const override;

    std::size_t in_features() const { return in_features_; }
    Tensor& weights() { return weights_; }
    Tensor& bias() { return bias_; }

  private:
    LayerSpec spec_;
    std::size_t in_features_ = 0;
    Tensor weights_;  // (out, in)
    Tensor bias_;     // (out)
    Tensor grad_weights_;
    Tensor grad_bias_;
    Tensor cached_input_;  // flattened (N, in)
    std::vector<std::size_t> cached_in_shape_;
    bool has_cache_ = false;
};

struct SoftmaxXentResult {
    double loss = 0.0;
    Tensor grad_logits;
};

// Mean cross-entropy over the batch with max-subtracted softmax;
// grad_logits = (softmax - onehot) / N.
SoftmaxXentResult softmax_xent(const Tensor& logits, std::span<const int> targets);

}  // namespace ssimnet
