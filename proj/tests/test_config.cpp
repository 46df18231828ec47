#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ssimnet/checkpoint.hpp"
#include "ssimnet/config.hpp"

using namespace ssimnet;
namespace fs = std::filesystem;

namespace {

const char* kSampleText = R"(# experiment definition
name = unit-sample
description = tiny probe network

[model]
layer = conv out=4 kernel=3 stride=1 pad=1
layer = relu
layer = maxpool
layer = ssim out=3 kernel=3x3 pad=1
layer = maxpool window=2 stride=2
layer = fc out=10
layer = softmax-xent

[train]
learning_rate = 0.02
momentum = 0.8
weight_decay = 0.0005
batch_size = 8
max_epochs = 4
seed = 123
augment = false
threads = 1

[ssim]
c1 = 0.0001
c2 = 0.0009

[data]
dir = some/data
subset_per_class = 20

[attack]
epsilons = 0,0.01,0.02

[output]
dir = runs/unit-sample
)";

fs::path temp_dir(const char* tag) {
    const fs::path dir = fs::temp_directory_path() / (std::string("ssimnet-config-") + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<std::uint8_t> read_bytes(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

void write_bytes(const fs::path& file, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(file, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("parsing fills every section") {
    const ExperimentConfig cfg = parse_config(kSampleText);
    CHECK(cfg.name == "unit-sample");
    CHECK(cfg.description == "tiny probe network");
    CHECK(cfg.model.name == "unit-sample");

    REQUIRE(cfg.model.layers.size() == 7);
    CHECK(cfg.model.layers[0].kind == LayerKind::conv);
    CHECK(cfg.model.layers[0].out_channels == 4);
    CHECK(cfg.model.layers[0].kernel_h == 3);
    CHECK(cfg.model.layers[0].padding == 1);
    // ssim line omits stride, which defaults to 1.
    CHECK(cfg.model.layers[3].kind == LayerKind::ssim);
    CHECK(cfg.model.layers[3].stride == 1);
    CHECK(cfg.model.layers[4].kind == LayerKind::maxpool);
    CHECK(cfg.model.layers[4].kernel_w == 2);
    CHECK(cfg.model.layers[6].kind == LayerKind::softmax_xent);

    CHECK(cfg.train.learning_rate == 0.02);
    CHECK(cfg.train.momentum == 0.8);
    CHECK(cfg.train.weight_decay == 0.0005);
    CHECK(cfg.train.batch_size == 8);
    CHECK(cfg.train.max_epochs == 4);
    CHECK(cfg.train.seed == 123);
    CHECK(cfg.train.augment == false);
    CHECK(cfg.train.threads == 1);

    CHECK(cfg.ssim.c1 == 0.0001);
    CHECK(cfg.ssim.c2 == 0.0009);
    CHECK(cfg.ssim.c3 == 0.00045);  // always c2 / 2

    CHECK(cfg.data_dir == fs::path("some/data"));
    CHECK(cfg.subset_per_class == 20);
    CHECK(cfg.attack_epsilons == std::vector<double>{0.0, 0.01, 0.02});
    CHECK(cfg.output_dir == fs::path("runs/unit-sample"));
}

TEST_CASE("omitted keys keep their defaults") {
    const ExperimentConfig cfg = parse_config(
        "name = skeleton\n[model]\nlayer = maxpool\nlayer = fc out=10\n[output]\ndir = runs/x\n");
    CHECK(cfg.train == TrainConfig{});
    CHECK(cfg.ssim.c1 == SsimConstants::defaults().c1);
    // Bare maxpool takes a 2x2 window with matching stride.
    CHECK(cfg.model.layers[0].kernel_h == 2);
    CHECK(cfg.model.layers[0].kernel_w == 2);
    CHECK(cfg.model.layers[0].stride == 2);
    // No [attack] section: the standard sweep applies.
    REQUIRE(cfg.attack_epsilons.size() == 6);
    CHECK(cfg.attack_epsilons.front() == 0.0);
    CHECK(cfg.attack_epsilons.back() == 0.02);
    // maxpool window sets the default stride to the window height.
    const ExperimentConfig pooled = parse_config(
        "name = p\n[model]\nlayer = maxpool window=3\nlayer = fc out=2\n");
    CHECK(pooled.model.layers[0].stride == 3);
}

TEST_CASE("serialization round-trips to a fixed point") {
    const ExperimentConfig cfg = parse_config(kSampleText);
    const std::string canonical = serialize_config(cfg);
    const ExperimentConfig reparsed = parse_config(canonical);
    CHECK(reparsed == cfg);
    CHECK(serialize_config(reparsed) == canonical);
    CHECK(config_fingerprint(reparsed) == config_fingerprint(cfg));
}

TEST_CASE("strict parsing rejects unknown constructs") {
    CHECK_THROWS_AS(parse_config("name = x\n[plot]\n"), config_error);
    CHECK_THROWS_AS(parse_config("name = x\n[train]\nlr = 0.1\n"), config_error);
    CHECK_THROWS_AS(parse_config("name = x\n[model]\nlayer = conv out=4 kernel=3 flux=2\n"),
                    config_error);
    CHECK_THROWS_AS(parse_config("name = x\n[model]\nlayer = relu out=4\n"), config_error);
    CHECK_THROWS_AS(parse_config("name = x\n[model]\nweights = 3\n"), config_error);
    CHECK_THROWS_AS(parse_config("name = x\njust some prose\n"), config_error);
    CHECK_THROWS_AS(parse_config("name = x\n[model\n"), config_error);
    CHECK_THROWS_AS(parse_config("name = x\n[train]\nmomentum = fast\n"), config_error);
    CHECK_THROWS_AS(parse_config("name = x\n[model]\nlayer = conv out=4\n"), config_error);
    CHECK_THROWS_AS(parse_config("name = x\n[model]\nlayer = dense out=4\n"), config_error);
    // A name is mandatory; so are positive stability constants.
    CHECK_THROWS_AS(parse_config("[model]\nlayer = fc out=10\n"), config_error);
    CHECK_THROWS_AS(parse_config("name = x\n[ssim]\nc1 = 0\n"), config_error);
    CHECK_THROWS_AS(parse_config("name = x\n[ssim]\nc2 = -1\n"), config_error);
}

TEST_CASE("config files load like inline text") {
    const fs::path dir = temp_dir("file");
    std::ofstream(dir / "exp.cfg") << kSampleText;
    const ExperimentConfig from_file = load_config_file(dir / "exp.cfg");
    CHECK(from_file == parse_config(kSampleText));
    CHECK_THROWS_AS(load_config_file(dir / "absent.cfg"), config_error);
}

TEST_CASE("hashing matches the published fnv-1a vectors") {
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("fingerprints react to any semantic change") {
    ExperimentConfig cfg = parse_config(kSampleText);
    const std::string base = config_fingerprint(cfg);
    CHECK(base.size() == 16);
    CHECK(base == fnv1a_hex(serialize_config(cfg)));

    ExperimentConfig bumped = cfg;
    bumped.train.seed = 124;
    CHECK(config_fingerprint(bumped) != base);

    ExperimentConfig resized = cfg;
    resized.model.layers[0].out_channels = 5;
    CHECK(config_fingerprint(resized) != base);

    const std::string id = model_id(cfg);
    CHECK(id == "unit-sample-" + base.substr(0, 8));
}

TEST_CASE("builtin experiment definitions are complete and well formed") {
    const auto& builtins = builtin_configs();
    REQUIRE(builtins.size() == 5);

    const std::vector<std::string> expected{"shallow-ssim", "shallow-conv", "ssim-norelu",
                                            "deep-ssim", "deep-conv"};
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const ExperimentConfig& cfg = builtins[i];
        CAPTURE(cfg.name);
        CHECK(cfg.name == expected[i]);
        CHECK(cfg.model.name == cfg.name);
        CHECK(cfg.output_dir == fs::path("runs") / cfg.name);
        // Every builtin must run on 32x32 RGB and emit 10 classes.
        const Shape4 out = validate_model(cfg.model, Shape4::of(1, 3, 32, 32));
        CHECK(out == Shape4::of(1, 10, 1, 1));
        CHECK(cfg.model.layers.back().kind == LayerKind::softmax_xent);
        // Builtins round-trip through their own serialization.
        CHECK(parse_config(serialize_config(cfg)) == cfg);
    }

    const ExperimentConfig& ssim_cfg = builtins[0];
    CHECK(ssim_cfg.model.layers[0].kind == LayerKind::ssim);
    CHECK(ssim_cfg.model.layers[0].out_channels == 32);
    CHECK(ssim_cfg.model.layers[0].kernel_h == 7);
    CHECK(ssim_cfg.model.layers[0].padding == 3);
    CHECK(builtins[1].model.layers[0].kind == LayerKind::conv);

    // The ablation twin differs from shallow-ssim only by the first relu.
    CHECK(builtins[2].model.layers.size() + 1 == ssim_cfg.model.layers.size());
    CHECK(builtins[2].model.layers[1].kind == LayerKind::maxpool);

    CHECK(find_builtin_config("deep-ssim") == &builtins[3]);
    CHECK(find_builtin_config("nope") == nullptr);
}

TEST_CASE("checkpoints round-trip training state bit for bit") {
    const fs::path dir = temp_dir("ckpt");
    ExperimentConfig cfg = parse_config(
        "name = ckpt-probe\n[model]\nlayer = conv out=4 kernel=3 stride=1 pad=1\nlayer = relu\n"
        "layer = maxpool\nlayer = fc out=10\nlayer = softmax-xent\n[output]\ndir = runs/ckpt\n");
    Model model(cfg.model, Shape4::of(1, 3, 8, 8), cfg.train.seed, cfg.ssim);
    SgdOptimizer optimizer(model.params());

    // Take one optimizer step so the velocities are interesting.
    for (auto& p : model.params()) p.grad->fill(0.5);
    optimizer.step(cfg.train);

    const Checkpoint snap = snapshot_checkpoint(cfg, model, &optimizer, 3, 0.625);
    CHECK(snap.version == kCheckpointVersion);
    CHECK(snap.fingerprint == config_fingerprint(cfg));
    CHECK(snap.epoch == 3);
    CHECK(snap.best_metric == 0.625);
    CHECK(snap.find("layer0.conv.weights") != nullptr);
    CHECK(snap.find("velocity.layer0.conv.weights") != nullptr);
    CHECK(snap.find("nonexistent") == nullptr);

    const fs::path file = dir / "state.ckpt";
    save_checkpoint(file, snap);
    const Checkpoint loaded = load_checkpoint(file);
    CHECK(loaded.version == snap.version);
    CHECK(loaded.fingerprint == snap.fingerprint);
    CHECK(loaded.config_text == snap.config_text);
    CHECK(loaded.epoch == snap.epoch);
    CHECK(loaded.best_metric == snap.best_metric);
    REQUIRE(loaded.tensors.size() == snap.tensors.size());
    for (std::size_t i = 0; i < loaded.tensors.size(); ++i) {
        CHECK(loaded.tensors[i].name == snap.tensors[i].name);
        CHECK(loaded.tensors[i].value == snap.tensors[i].value);
    }
    CHECK(checkpoint_config(loaded) == cfg);

    SUBCASE("restoring reproduces parameters and velocities") {
        Model fresh(cfg.model, Shape4::of(1, 3, 8, 8), 999, cfg.ssim);
        SgdOptimizer fresh_opt(fresh.params());
        restore_checkpoint(loaded, fresh, &fresh_opt);
        auto want = model.params();
        auto got = fresh.params();
        REQUIRE(want.size() == got.size());
        for (std::size_t i = 0; i < want.size(); ++i) {
            CHECK(*got[i].value == *want[i].value);
            bool zeros = true;
            for (std::size_t j = 0; j < got[i].grad->size(); ++j) {
                zeros = zeros && (*got[i].grad)[j] == 0.0;
            }
            CHECK(zeros);
        }
        for (std::size_t i = 0; i < fresh_opt.size(); ++i) {
            CHECK(fresh_opt.velocity(i) == optimizer.velocity(i));
        }
    }
    SUBCASE("restoring into a mismatched architecture fails") {
        ExperimentConfig other = cfg;
        other.model.layers[0].out_channels = 5;
        Model fresh(other.model, Shape4::of(1, 3, 8, 8), 999, other.ssim);
        CHECK_THROWS_AS(restore_checkpoint(loaded, fresh, nullptr), data_error);
    }
    SUBCASE("a parameter-only snapshot omits velocities") {
        const Checkpoint bare = snapshot_checkpoint(cfg, model, nullptr, 1, 0.0);
        CHECK(bare.find("layer0.conv.weights") != nullptr);
        CHECK(bare.find("velocity.layer0.conv.weights") == nullptr);
        // Restoring it leaves optimizer state alone rather than guessing.
        Model fresh(cfg.model, Shape4::of(1, 3, 8, 8), 999, cfg.ssim);
        CHECK_NOTHROW(restore_checkpoint(bare, fresh, nullptr));
    }
}

TEST_CASE("corrupted checkpoint files are rejected") {
    const fs::path dir = temp_dir("corrupt");
    const ExperimentConfig cfg = parse_config(
        "name = c\n[model]\nlayer = fc out=3\nlayer = softmax-xent\n[output]\ndir = runs/c\n");
    Model model(cfg.model, Shape4::of(1, 1, 2, 2), 1, cfg.ssim);
    const fs::path file = dir / "state.ckpt";
    save_checkpoint(file, snapshot_checkpoint(cfg, model, nullptr, 0, 0.0));
    const std::vector<std::uint8_t> good = read_bytes(file);
    REQUIRE(good.size() > 64);

    SUBCASE("bad magic") {
        auto bytes = good;
        bytes[0] ^= 0xFF;
        write_bytes(file, bytes);
        CHECK_THROWS_AS(load_checkpoint(file), data_error);
    }
    SUBCASE("unsupported version") {
        auto bytes = good;
        bytes[8] = 2;
        write_bytes(file, bytes);
        CHECK_THROWS_AS(load_checkpoint(file), data_error);
    }
    SUBCASE("truncation") {
        auto bytes = good;
        bytes.resize(bytes.size() - 7);
        write_bytes(file, bytes);
        CHECK_THROWS_AS(load_checkpoint(file), data_error);
    }
    SUBCASE("trailing garbage") {
        auto bytes = good;
        bytes.push_back(0);
        write_bytes(file, bytes);
        CHECK_THROWS_AS(load_checkpoint(file), data_error);
    }
    SUBCASE("config text no longer matches the fingerprint") {
        auto bytes = good;
        bytes[50] ^= 0x01;  // inside the embedded config text
        write_bytes(file, bytes);
        CHECK_THROWS_AS(load_checkpoint(file), data_error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), data_error);
    }
    SUBCASE("the pristine file still loads") {
        write_bytes(file, good);
        CHECK_NOTHROW(load_checkpoint(file));
    }
}
