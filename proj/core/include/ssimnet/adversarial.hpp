#pragma once

#include <span>
#include <string>
#include <vector>

#include "ssimnet/cifar.hpp"
#include "ssimnet/model.hpp"
#include "ssimnet/tensor.hpp"

namespace ssimnet {

// Elementwise sign with a hard zero case: -1, 0, or +1.
Tensor sign(const Tensor& g);

inline constexpr double kDefaultAttackEpsilons[] = {0.0, 0.003, 0.005, 0.007, 0.01, 0.02};

struct AttackConfig {
    std::vector<double> epsilons{std::begin(kDefaultAttackEpsilons),
                                 std::end(kDefaultAttackEpsilons)};
    std::size_t batch_size = 64;
    std::size_t threads = 0;
    // Per-channel multiplier on epsilon. Images are attacked in the
    // normalized domain, so 1/stddev here makes epsilon mean raw pixel
    // units; empty applies epsilon as-is.
    std::vector<double> channel_scale;

    void validate() const;
};

// One-step gradient-sign perturbation of a batch (N, C, H, W):
//   adv = x + epsilon * scale_c * sign(grad_x loss)
// Parameters are left untouched and gradients are zeroed on exit. With
// empty channel_scale every element moves by exactly 0 or +-epsilon.
Tensor fgsm(Model& model, const Tensor& x, std::span<const int> targets, double epsilon,
            std::span<const double> channel_scale = {});

// Fraction of rows whose target ranks in the k best logits; ties are
// awarded to the lower class index.
double topk_accuracy(const Tensor& logits, std::span<const int> targets, std::size_t k);

struct RobustnessRow {
    std::string model_id;
    std::string split;
    double epsilon = 0.0;
    double top1 = 0.0;
    double top5 = 0.0;
};

struct RobustnessReport {
    std::string model_id;
    std::string epsilon_domain;  // "pixel" or "normalized"
    std::vector<RobustnessRow> rows;
};

// Attacks both splits at every epsilon (ascending); one row per
// (epsilon, split), train before validation. epsilon = 0 reproduces
// clean accuracy exactly.
RobustnessReport robustness_sweep(Model& model, const std::string& model_id,
                                  const DatasetSplit& train, const DatasetSplit& validation,
                                  const AttackConfig& attack,
                                  const std::string& epsilon_domain);

}  // namespace ssimnet
