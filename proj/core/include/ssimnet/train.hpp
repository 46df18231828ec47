#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ssimnet/adversarial.hpp"
#include "ssimnet/checkpoint.hpp"
#include "ssimnet/config.hpp"

namespace ssimnet {

inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kRobustnessFile = "robustness.csv";
inline constexpr const char* kStatsFile = "normalization.txt";
inline constexpr const char* kBestCheckpoint = "best.ckpt";
inline constexpr const char* kLastCheckpoint = "last.ckpt";

struct EpochRow {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    double wall_seconds = 0.0;
};

struct TrainRunResult {
    std::filesystem::path output_dir;
    std::filesystem::path metrics_csv;
    std::filesystem::path best_checkpoint;
    std::filesystem::path last_checkpoint;
    std::filesystem::path stats_file;
    std::vector<EpochRow> rows;
    double best_val_accuracy = 0.0;
    std::size_t best_epoch = 0;
};

// Full training pipeline: load + subset + normalize the data, train for
// max_epochs, stream metrics.csv, and keep best/last checkpoints plus
// the normalization stats beside them. `log` (when given) receives one
// progress line per epoch.
TrainRunResult run_training(const ExperimentConfig& config, std::ostream* log = nullptr);

struct EvalReport {
    std::string model_id;
    std::string split;
    double loss = 0.0;
    double accuracy = 0.0;
    std::size_t count = 0;
};

// Restores a checkpoint and scores one split (normalized with the stats
// saved next to the checkpoint). subset_per_class 0 means the full
// split.
EvalReport run_eval(const std::filesystem::path& checkpoint_file, const std::string& split,
                    std::size_t subset_per_class, std::ostream* log = nullptr);

// Gradient-sign sweep over both splits; writes robustness.csv (into
// out_dir, or next to the checkpoint) and returns the rows. Epsilons
// are raw pixel units, converted through the saved normalization.
RobustnessReport run_attack(const std::filesystem::path& checkpoint_file,
                            const std::vector<double>& epsilons, std::size_t subset_per_class,
                            const std::optional<std::filesystem::path>& out_dir,
                            std::ostream* log = nullptr);

struct FilterExportResult {
    std::filesystem::path image_file;   // PPM grid of the filters
    std::filesystem::path norms_file;   // "index l2-norm" per line
    std::size_t filter_count = 0;
    std::size_t grid_cols = 0;
    std::size_t grid_rows = 0;
};

// Renders the filters of the conv/ssim layer at `layer_index` as a PPM
// grid (each filter min-max scaled; flat filters render mid-gray) and
// writes their L2 norms.
FilterExportResult export_filters(const std::filesystem::path& checkpoint_file,
                                  std::size_t layer_index,
                                  const std::optional<std::filesystem::path>& out_dir,
                                  std::ostream* log = nullptr);

}  // namespace ssimnet
