#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssimnet/cifar.hpp"
#include "ssimnet/layers.hpp"
#include "ssimnet/model.hpp"
#include "ssimnet/tensor.hpp"

namespace ssimnet {

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 500;
    std::uint64_t seed = 1;
    bool augment = true;   // random horizontal flips on the training split
    std::size_t threads = 0;  // 0 = one worker per hardware thread

    // learning_rate 0 is allowed: the step becomes a no-op so a run
    // degenerates to repeated evaluation.
    void validate() const;

    bool operator==(const TrainConfig&) const = default;
};

std::size_t resolve_threads(std::size_t requested);

// Mean data loss plus the L2 penalty over decay-flagged parameters.
double global_loss(std::span<const double> sample_losses, const std::vector<ParamRef>& params,
                   double weight_decay);

// Classical momentum with decoupled-from-nothing L2: the 2*lambda*w term
// enters the velocity together with the data gradient.
//   v <- momentum * v + (g + 2 lambda w);  w <- w - lr * v
class SgdOptimizer {
  public:
    explicit SgdOptimizer(std::vector<ParamRef> params);

    void step(const TrainConfig& config);

    std::size_t size() const { return params_.size(); }
    const std::string& name(std::size_t i) const { return params_.at(i).name; }
    Tensor& velocity(std::size_t i) { return velocities_.at(i); }
    const Tensor& velocity(std::size_t i) const { return velocities_.at(i); }

  private:
    std::vector<ParamRef> params_;
    std::vector<Tensor> velocities_;
};

struct EpochMetrics {
    double loss = 0.0;      // mean per-sample data loss
    double accuracy = 0.0;  // top-1, ties resolved to the lowest class index
    std::size_t count = 0;
};

// One pass over the split in shuffled order. Shuffling and flip draws
// come from a stream seeded with config.seed + epoch_index, and
// per-sample gradients are reduced in sample order, so results are
// bit-identical across reruns and across thread counts. Non-finite
// losses, gradients, or parameters abort with numeric_error naming the
// offending layer.
EpochMetrics train_epoch(Model& model, const DatasetSplit& data, const TrainConfig& config,
                         SgdOptimizer& optimizer, std::size_t epoch_index);

// Forward-only pass; batch partitioning never changes the result.
EpochMetrics evaluate(Model& model, const DatasetSplit& data, std::size_t batch_size = 64,
                      std::size_t threads = 0);

}  // namespace ssimnet
