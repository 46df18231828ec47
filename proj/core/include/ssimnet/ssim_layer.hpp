#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ssimnet/layers.hpp"
#include "ssimnet/ssim.hpp"
#include "ssimnet/tensor.hpp"

namespace ssimnet {

// Sliding-window layer whose activation is the structural similarity
// between each input patch and each trainable filter, in the simplified
// product form with unit exponents. Outputs lie in [-1, 1] and need no
// bias. Statistics use the 1/N convention, under which the analytic
// gradient is exact.
class SsimLayer final : public Layer {
  public:
    SsimLayer(const LayerSpec& spec, std::size_t in_channels, std::uint64_t seed,
              const SsimConstants& constants = SsimConstants::defaults());

    LayerKind kind() const override { return LayerKind::ssim; }
    const LayerSpec& spec() const override { return spec_; }

    Tensor forward(const Tensor& input, bool cache) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    std::unique_ptr<Layer> clone() const override;

    std::size_t in_channels() const { return in_channels_; }
    std::size_t patch_len() const;
    const SsimConstants& constants() const { return constants_; }

    // Filters are stored flat as (F, C*kh*kw), one patch-shaped template
    // per output channel, drawn from N(0, 1).
    Tensor& filters() { return filters_; }
    const Tensor& filters() const { return filters_; }
    Tensor& grad_filters() { return grad_filters_; }

  private:
    LayerSpec spec_;
    std::size_t in_channels_ = 0;
    SsimConstants constants_;
    Tensor filters_;
    Tensor grad_filters_;

    // Backward cache: the input plus every statistic the closed-form
    // gradient needs, so nothing is recomputed except the patch matrix.
    Tensor cached_input_;
    std::vector<double> cached_mu_x_;    // (N * positions)
    std::vector<double> cached_var_x_;   // (N * positions)
    std::vector<double> cached_mu_y_;    // (F)
    std::vector<double> cached_var_y_;   // (F)
    std::vector<double> cached_cov_;     // (N * positions * F)
    bool has_cache_ = false;
};

}  // namespace ssimnet
