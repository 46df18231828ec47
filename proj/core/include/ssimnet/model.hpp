#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ssimnet/layers.hpp"
#include "ssimnet/ssim.hpp"
#include "ssimnet/tensor.hpp"

namespace ssimnet {

// An ordered stack of layer specs. The optional terminal softmax_xent
// entry only marks the training loss; it is not an executable layer.
struct ModelSpec {
    std::string name;
    std::vector<LayerSpec> layers;

    bool operator==(const ModelSpec&) const = default;
};

// Walks the layer stack over `input` and returns the output shape, throwing
// config_error on any mismatch (non-integral windowing, fc not last,
// softmax_xent not terminal, empty spec).
Shape4 validate_model(const ModelSpec& spec, const Shape4& input);

// Instantiated network. Parameter init is deterministic in (seed, layer
// index); copies are deep and preserve parameter values and gradients.
class Model {
  public:
    Model(const ModelSpec& spec, const Shape4& input, std::uint64_t seed,
          const SsimConstants& constants = SsimConstants::defaults());
    Model(const Model& other);
    Model& operator=(const Model& other);
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    // Runs every executable layer; returns logits (N, classes) when the
    // stack ends in fc. cache=false performs a read-only pass that is
    // safe to run concurrently from several threads on one instance.
    Tensor forward(const Tensor& input, bool cache = true);

    // Propagates grad wrt logits back to grad wrt input, accumulating
    // parameter gradients along the way.
    Tensor backward(const Tensor& grad_logits);

    std::vector<ParamRef> params();
    void zero_grads();
    void copy_params_from(const Model& other);

    const ModelSpec& spec() const { return spec_; }
    const Shape4& input_shape() const { return input_shape_; }
    const Shape4& output_shape() const { return output_shape_; }
    std::uint64_t seed() const { return seed_; }

    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t index) { return *layers_.at(index); }
    const Layer& layer(std::size_t index) const { return *layers_.at(index); }

  private:
    ModelSpec spec_;
    Shape4 input_shape_{};
    Shape4 output_shape_{};
    std::uint64_t seed_ = 0;
    SsimConstants constants_;
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<std::string> layer_names_;  // parameter name prefixes, per executable layer
};

// Fixed-point mix used to derive independent per-layer init streams
// from one run seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

}  // namespace ssimnet
