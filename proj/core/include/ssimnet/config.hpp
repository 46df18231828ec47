#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ssimnet/adversarial.hpp"
#include "ssimnet/model.hpp"
#include "ssimnet/optim.hpp"
#include "ssimnet/ssim.hpp"

namespace ssimnet {

// Everything one run needs, parsed from a plain-text file with
// [section] headers and key = value lines. The [model] section lists
// one `layer = <kind> key=value...` line per layer, in order.
struct ExperimentConfig {
    std::string name;
    std::string description;
    ModelSpec model;
    TrainConfig train;
    SsimConstants ssim = SsimConstants::defaults();
    std::filesystem::path data_dir = "data/cifar-10-batches-bin";
    std::size_t subset_per_class = 0;  // 0 = full training split
    std::vector<double> attack_epsilons{std::begin(kDefaultAttackEpsilons),
                                        std::end(kDefaultAttackEpsilons)};
    std::filesystem::path output_dir;

    bool operator==(const ExperimentConfig&) const = default;
};

// Strict parser: unknown sections or keys fail with config_error that
// names the line. parse(serialize(parse(text))) == parse(text).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::filesystem::path& file);
std::string serialize_config(const ExperimentConfig& config);

// FNV-1a 64 over the canonical serialization, 16 hex digits.
std::string config_fingerprint(const ExperimentConfig& config);
std::string fnv1a_hex(std::string_view bytes);

// Config name plus the first 8 fingerprint digits, e.g. for CSV rows.
std::string model_id(const ExperimentConfig& config);

// Ready-made experiment definitions, selectable by name anywhere a
// config path is accepted.
const std::vector<ExperimentConfig>& builtin_configs();
const ExperimentConfig* find_builtin_config(const std::string& name);

}  // namespace ssimnet
