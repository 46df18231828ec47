#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ssimnet/config.hpp"
#include "ssimnet/model.hpp"
#include "ssimnet/optim.hpp"
#include "ssimnet/tensor.hpp"

namespace ssimnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'S', 'S', 'I', 'M', 'N', 'E', 'T', '1'};

struct NamedTensor {
    std::string name;
    Tensor value;
};

// On-disk training state. The layout is little-endian and
// self-describing: magic, version, fingerprint string, the full config
// text, epoch, best metric, then length-prefixed named f64 tensors
// (parameters first, then optimizer velocities as "velocity.<name>").
struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::string fingerprint;
    std::string config_text;
    std::uint64_t epoch = 0;
    double best_metric = 0.0;
    std::vector<NamedTensor> tensors;

    const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt);

// Rejects wrong magic/version, truncation, and a fingerprint that does
// not hash the embedded config text (all data_error).
Checkpoint load_checkpoint(const std::filesystem::path& file);

// Captures parameters (and velocities when an optimizer is given).
Checkpoint snapshot_checkpoint(const ExperimentConfig& config, Model& model,
                               const SgdOptimizer* optimizer, std::uint64_t epoch,
                               double best_metric);

// Parses the embedded config text.
ExperimentConfig checkpoint_config(const Checkpoint& ckpt);

// Writes tensors back into the model (and optimizer). Missing names or
// shape mismatches are data errors.
void restore_checkpoint(const Checkpoint& ckpt, Model& model, SgdOptimizer* optimizer);

}  // namespace ssimnet
