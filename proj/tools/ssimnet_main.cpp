#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ssimnet/config.hpp"
#include "ssimnet/error.hpp"
#include "ssimnet/train.hpp"

namespace {

// --config accepts either a file path or the name of a built-in setup.
ssimnet::ExperimentConfig resolve_config(const std::string& ref) {
    if (std::filesystem::exists(ref)) return ssimnet::load_config_file(ref);
    if (const ssimnet::ExperimentConfig* builtin = ssimnet::find_builtin_config(ref)) {
        return *builtin;
    }
    std::string names;
    for (const auto& cfg : ssimnet::builtin_configs()) {
        if (!names.empty()) names += ", ";
        names += cfg.name;
    }
    throw ssimnet::config_error("'" + ref + "' is neither a config file nor a built-in config (" +
                                names + ")");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"train, evaluate, and probe small image classifiers built around a "
                 "structural-similarity feature layer"};
    app.require_subcommand(1);

    std::string config_ref;
    std::string checkpoint;
    std::string split = "val";
    std::size_t subset_per_class = 0;
    std::vector<double> epsilons;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::size_t layer_index = 0;

    CLI::App* cmd_train = app.add_subcommand("train", "Train a model from a config");
    cmd_train->add_option("--config", config_ref, "Config file or built-in name")->required();
    cmd_train->add_option("--seed", seed, "Override the config's RNG seed");
    cmd_train->add_option("--subset-per-class", subset_per_class,
                          "Train on this many images per class (0 = all)");
    cmd_train->add_option("--out", out_dir, "Override the config's output directory");

    CLI::App* cmd_eval = app.add_subcommand("eval", "Score a checkpoint on one split");
    cmd_eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    cmd_eval->add_option("--split", split, "train or val")->check(CLI::IsMember({"train", "val"}));
    cmd_eval->add_option("--subset-per-class", subset_per_class,
                         "Evaluate this many images per class (0 = all)");

    CLI::App* cmd_attack =
        app.add_subcommand("attack", "Gradient-sign robustness sweep over both splits");
    cmd_attack->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    cmd_attack->add_option("--epsilons", epsilons, "Pixel-domain step sizes")->delimiter(',');
    cmd_attack->add_option("--subset-per-class", subset_per_class,
                           "Attack this many images per class (0 = all)");
    cmd_attack->add_option("--out", out_dir, "Directory for robustness.csv");

    CLI::App* cmd_export =
        app.add_subcommand("export-filters", "Render a layer's filters as a PPM grid");
    cmd_export->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    cmd_export->add_option("--layer", layer_index, "Layer index (default 0)");
    cmd_export->add_option("--out", out_dir, "Directory for filters.ppm / filter_norms.txt");

    CLI::App* cmd_list = app.add_subcommand("list-configs", "List built-in configs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const std::optional<std::filesystem::path> out =
            out_dir ? std::optional<std::filesystem::path>(*out_dir) : std::nullopt;
        if (cmd_train->parsed()) {
            ssimnet::ExperimentConfig config = resolve_config(config_ref);
            if (seed) config.train.seed = *seed;
            if (subset_per_class) config.subset_per_class = subset_per_class;
            if (out) config.output_dir = *out;
            if (config.output_dir.empty()) {
                config.output_dir = std::filesystem::path("runs") / config.name;
            }
            const ssimnet::TrainRunResult result = ssimnet::run_training(config, &std::cout);
            std::cout << "best val accuracy " << result.best_val_accuracy << " at epoch "
                      << result.best_epoch << "\n"
                      << "metrics: " << result.metrics_csv.string() << "\n"
                      << "checkpoints: " << result.best_checkpoint.string() << ", "
                      << result.last_checkpoint.string() << "\n";
        } else if (cmd_eval->parsed()) {
            ssimnet::run_eval(checkpoint, split, subset_per_class, &std::cout);
        } else if (cmd_attack->parsed()) {
            ssimnet::run_attack(checkpoint, epsilons, subset_per_class, out, &std::cout);
        } else if (cmd_export->parsed()) {
            ssimnet::export_filters(checkpoint, layer_index, out, &std::cout);
        } else if (cmd_list->parsed()) {
            for (const auto& cfg : ssimnet::builtin_configs()) {
                std::cout << cfg.name << "\n    " << cfg.description << "\n";
            }
        }
        return 0;
    } catch (const ssimnet::data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const ssimnet::numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
