#include "ssimnet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

#include "ssimnet/csv.hpp"
#include "ssimnet/error.hpp"
#include "ssimnet/layers.hpp"
#include "ssimnet/ssim_layer.hpp"
#include "ssimnet/textio.hpp"

namespace ssimnet {

namespace {

constexpr Shape4 kCifarInput{1, kCifarChannels, kCifarDim, kCifarDim};

struct RestoredRun {
    ExperimentConfig config;
    Model model;
    ChannelStats stats;
    std::filesystem::path dir;
};

RestoredRun restore_run(const std::filesystem::path& checkpoint_file) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_file);
    ExperimentConfig config = checkpoint_config(ckpt);
    Model model(config.model, kCifarInput, config.train.seed, config.ssim);
    restore_checkpoint(ckpt, model, nullptr);
    const std::filesystem::path dir = checkpoint_file.parent_path();
    ChannelStats stats = load_channel_stats(dir / kStatsFile);
    return {std::move(config), std::move(model), std::move(stats), dir};
}

}  // namespace

TrainRunResult run_training(const ExperimentConfig& config, std::ostream* log) {
    config.train.validate();
    validate_model(config.model, kCifarInput);

    DatasetSplit train = load_cifar_train(config.data_dir);
    DatasetSplit validation = load_cifar_validation(config.data_dir);
    train = balanced_subset(train, config.subset_per_class, config.train.seed);

    const ChannelStats stats = compute_channel_stats(train);
    normalize_split(train, stats);
    normalize_split(validation, stats);

    TrainRunResult result;
    result.output_dir = config.output_dir.empty() ? std::filesystem::path(".")
                                                  : config.output_dir;
    std::filesystem::create_directories(result.output_dir);
    result.metrics_csv = result.output_dir / kMetricsFile;
    result.best_checkpoint = result.output_dir / kBestCheckpoint;
    result.last_checkpoint = result.output_dir / kLastCheckpoint;
    result.stats_file = result.output_dir / kStatsFile;
    save_channel_stats(result.stats_file, stats);

    Model model(config.model, kCifarInput, config.train.seed, config.ssim);
    SgdOptimizer optimizer(model.params());

    const std::string id = model_id(config);
    CsvWriter csv(result.metrics_csv);
    csv.comment("model_id=" + id);
    csv.comment("config_fingerprint=" + config_fingerprint(config));
    csv.row({"epoch", "train_loss", "train_acc", "val_loss", "val_acc", "wall_seconds"});
    csv.flush();

    for (std::size_t epoch = 1; epoch <= config.train.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const EpochMetrics tm = train_epoch(model, train, config.train, optimizer, epoch);
        const EpochMetrics vm =
            evaluate(model, validation, /*batch_size=*/64, config.train.threads);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        EpochRow row{epoch, tm.loss, tm.accuracy, vm.loss, vm.accuracy, wall};
        result.rows.push_back(row);
        csv.row({std::to_string(epoch), format_double(tm.loss), format_double(tm.accuracy),
                 format_double(vm.loss), format_double(vm.accuracy), format_double(wall)});
        csv.flush();
        if (log) {
            *log << id << " epoch " << epoch << "/" << config.train.max_epochs
                 << " train_loss=" << tm.loss << " train_acc=" << tm.accuracy
                 << " val_loss=" << vm.loss << " val_acc=" << vm.accuracy << " (" << wall
                 << "s)\n";
        }

        if (result.rows.size() == 1 || vm.accuracy > result.best_val_accuracy) {
            result.best_val_accuracy = vm.accuracy;
            result.best_epoch = epoch;
            save_checkpoint(result.best_checkpoint,
                            snapshot_checkpoint(config, model, &optimizer, epoch, vm.accuracy));
        }
    }
    save_checkpoint(result.last_checkpoint,
                    snapshot_checkpoint(config, model, &optimizer, config.train.max_epochs,
                                        result.best_val_accuracy));
    return result;
}

EvalReport run_eval(const std::filesystem::path& checkpoint_file, const std::string& split,
                    std::size_t subset_per_class, std::ostream* log) {
    if (split != "train" && split != "val") {
        throw config_error("--split must be train or val, got '" + split + "'");
    }
    RestoredRun run = restore_run(checkpoint_file);

    DatasetSplit data = split == "train" ? load_cifar_train(run.config.data_dir)
                                         : load_cifar_validation(run.config.data_dir);
    data = balanced_subset(data, subset_per_class, run.config.train.seed);
    normalize_split(data, run.stats);

    const EpochMetrics m = evaluate(run.model, data, /*batch_size=*/64, run.config.train.threads);
    EvalReport report{model_id(run.config), split, m.loss, m.accuracy, m.count};
    if (log) {
        *log << report.model_id << " " << split << ": loss=" << report.loss
             << " accuracy=" << report.accuracy << " over " << report.count << " samples\n";
    }
    return report;
}

RobustnessReport run_attack(const std::filesystem::path& checkpoint_file,
                            const std::vector<double>& epsilons, std::size_t subset_per_class,
                            const std::optional<std::filesystem::path>& out_dir,
                            std::ostream* log) {
    RestoredRun run = restore_run(checkpoint_file);

    DatasetSplit train = load_cifar_train(run.config.data_dir);
    DatasetSplit validation = load_cifar_validation(run.config.data_dir);
    train = balanced_subset(train, subset_per_class, run.config.train.seed);
    validation = balanced_subset(validation, subset_per_class, run.config.train.seed);
    normalize_split(train, run.stats);
    normalize_split(validation, run.stats);

    AttackConfig attack;
    attack.epsilons = epsilons.empty() ? run.config.attack_epsilons : epsilons;
    std::sort(attack.epsilons.begin(), attack.epsilons.end());
    attack.threads = run.config.train.threads;
    // Epsilons are raw pixel units; dividing by the per-channel spread
    // applies the same physical perturbation in the normalized domain.
    attack.channel_scale.clear();
    for (double sd : run.stats.stddev) attack.channel_scale.push_back(1.0 / sd);

    const std::string id = model_id(run.config);
    RobustnessReport report =
        robustness_sweep(run.model, id, train, validation, attack, "pixel");

    const std::filesystem::path dir = out_dir.value_or(run.dir);
    std::filesystem::create_directories(dir);
    CsvWriter csv(dir / kRobustnessFile);
    csv.comment("model_id=" + id);
    csv.comment("config_fingerprint=" + config_fingerprint(run.config));
    csv.comment("epsilon_domain=" + report.epsilon_domain);
    csv.row({"model_id", "split", "epsilon", "top1", "top5"});
    for (const RobustnessRow& row : report.rows) {
        csv.row({row.model_id, row.split, format_double(row.epsilon), format_double(row.top1),
                 format_double(row.top5)});
        if (log) {
            *log << row.model_id << " " << row.split << " eps=" << row.epsilon
                 << " top1=" << row.top1 << " top5=" << row.top5 << "\n";
        }
    }
    csv.flush();
    return report;
}

namespace {

std::size_t pick_grid_cols(std::size_t count) {
    std::size_t cols = 1;
    while (cols * cols < count) ++cols;  // ceil(sqrt(count))
    for (std::size_t d = cols; d < count; ++d) {
        if (count % d == 0) return d;
    }
    return cols;
}

}  // namespace

FilterExportResult export_filters(const std::filesystem::path& checkpoint_file,
                                  std::size_t layer_index,
                                  const std::optional<std::filesystem::path>& out_dir,
                                  std::ostream* log) {
    RestoredRun run = restore_run(checkpoint_file);
    if (layer_index >= run.model.layer_count()) {
        throw config_error("layer index " + std::to_string(layer_index) +
                           " out of range (model has " +
                           std::to_string(run.model.layer_count()) + " layers)");
    }
    Layer& layer = run.model.layer(layer_index);

    const double* filters = nullptr;
    std::size_t count = 0, channels = 0, kh = 0, kw = 0;
    if (auto* conv = dynamic_cast<Conv2dLayer*>(&layer)) {
        const auto& w = conv->weights();
        filters = w.data();
        count = w.shape()[0];
        channels = w.shape()[1];
        kh = w.shape()[2];
        kw = w.shape()[3];
    } else if (auto* ssim = dynamic_cast<SsimLayer*>(&layer)) {
        const auto& w = ssim->filters();
        filters = w.data();
        count = w.shape()[0];
        channels = ssim->in_channels();
        kh = ssim->spec().kernel_h;
        kw = ssim->spec().kernel_w;
    } else {
        throw config_error("layer " + std::to_string(layer_index) +
                           " has no spatial filters to export");
    }
    if (channels != 1 && channels != 3) {
        throw config_error("can only render 1- or 3-channel filters, layer has " +
                           std::to_string(channels));
    }

    const std::size_t cols = pick_grid_cols(count);
    const std::size_t rows = (count + cols - 1) / cols;
    const std::size_t width = 1 + cols * (kw + 1);
    const std::size_t height = 1 + rows * (kh + 1);
    const unsigned char bg = 128;
    std::vector<unsigned char> rgb(width * height * 3, bg);

    const std::size_t filter_len = channels * kh * kw;
    for (std::size_t f = 0; f < count; ++f) {
        const double* w = filters + f * filter_len;
        double lo = w[0], hi = w[0];
        for (std::size_t i = 1; i < filter_len; ++i) {
            lo = std::min(lo, w[i]);
            hi = std::max(hi, w[i]);
        }
        const double span = hi - lo;
        const std::size_t cell_r = 1 + (f / cols) * (kh + 1);
        const std::size_t cell_c = 1 + (f % cols) * (kw + 1);
        for (std::size_t i = 0; i < kh; ++i) {
            for (std::size_t j = 0; j < kw; ++j) {
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    const std::size_t src_ch = channels == 3 ? ch : 0;
                    const double v = w[(src_ch * kh + i) * kw + j];
                    const double unit = span == 0.0 ? 0.5 : (v - lo) / span;
                    rgb[((cell_r + i) * width + (cell_c + j)) * 3 + ch] =
                        static_cast<unsigned char>(std::llround(unit * 255.0));
                }
            }
        }
    }

    const std::filesystem::path dir = out_dir.value_or(run.dir);
    std::filesystem::create_directories(dir);
    FilterExportResult result;
    result.image_file = dir / "filters.ppm";
    result.norms_file = dir / "filter_norms.txt";
    result.filter_count = count;
    result.grid_cols = cols;
    result.grid_rows = rows;

    std::ofstream ppm(result.image_file, std::ios::binary | std::ios::trunc);
    if (!ppm) throw data_error("cannot write " + result.image_file.string());
    ppm << "P6\n" << width << " " << height << "\n255\n";
    ppm.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!ppm) throw data_error("failed writing " + result.image_file.string());

    std::ofstream norms(result.norms_file, std::ios::trunc);
    if (!norms) throw data_error("cannot write " + result.norms_file.string());
    for (std::size_t f = 0; f < count; ++f) {
        const double* w = filters + f * filter_len;
        double ss = 0.0;
        for (std::size_t i = 0; i < filter_len; ++i) ss += w[i] * w[i];
        norms << f << " " << format_double(std::sqrt(ss)) << "\n";
    }
    if (!norms) throw data_error("failed writing " + result.norms_file.string());

    if (log) {
        *log << "exported " << count << " filters (" << cols << "x" << rows << " grid) to "
             << result.image_file.string() << "\n";
    }
    return result;
}

}  // namespace ssimnet
