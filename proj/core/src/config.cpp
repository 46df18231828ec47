#include "ssimnet/config.hpp"

#include <fstream>
#include <sstream>

#include "ssimnet/error.hpp"
#include "ssimnet/textio.hpp"

namespace ssimnet {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
    throw config_error("config line " + std::to_string(line) + ": " + msg);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        out.push_back(trim(s.substr(pos, comma - pos)));
        if (comma == s.size()) break;
        pos = comma + 1;
    }
    if (out.size() == 1 && out[0].empty()) out.clear();
    return out;
}

double parse_double_at(const std::string& value, std::size_t line, const std::string& key) {
    double v = 0.0;
    if (!parse_double(value, v)) fail(line, "key '" + key + "' needs a numeric value");
    return v;
}

std::uint64_t parse_u64_at(const std::string& value, std::size_t line, const std::string& key) {
    std::uint64_t v = 0;
    if (!parse_u64(value, v)) fail(line, "key '" + key + "' needs a non-negative integer");
    return v;
}

bool parse_bool_at(const std::string& value, std::size_t line, const std::string& key) {
    if (value == "true") return true;
    if (value == "false") return false;
    fail(line, "key '" + key + "' needs true or false");
}

void parse_kernel(const std::string& value, std::size_t line, std::size_t& kh, std::size_t& kw) {
    const std::size_t x = value.find('x');
    std::uint64_t a = 0, b = 0;
    if (x == std::string::npos) {
        if (!parse_u64(value, a) || a == 0) fail(line, "bad kernel size '" + value + "'");
        kh = kw = a;
        return;
    }
    if (!parse_u64(value.substr(0, x), a) || !parse_u64(value.substr(x + 1), b) || a == 0 ||
        b == 0) {
        fail(line, "bad kernel size '" + value + "'");
    }
    kh = a;
    kw = b;
}

LayerSpec parse_layer_line(const std::string& value, std::size_t line) {
    const auto tokens = split_ws(value);
    if (tokens.empty()) fail(line, "layer line is empty");
    LayerSpec spec;
    spec.kind = layer_kind_from_string(tokens[0]);
    bool saw_out = false, saw_kernel = false, saw_stride = false;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
        const std::string& tok = tokens[i];
        const std::size_t eq = tok.find('=');
        if (eq == std::string::npos) fail(line, "layer option '" + tok + "' is not key=value");
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "out") {
            spec.out_channels = parse_u64_at(val, line, key);
            saw_out = true;
        } else if (key == "kernel" || key == "window") {
            parse_kernel(val, line, spec.kernel_h, spec.kernel_w);
            saw_kernel = true;
        } else if (key == "stride") {
            spec.stride = parse_u64_at(val, line, key);
            saw_stride = true;
        } else if (key == "pad") {
            spec.padding = parse_u64_at(val, line, key);
        } else {
            fail(line, "unknown layer option '" + key + "'");
        }
    }
    switch (spec.kind) {
        case LayerKind::conv:
        case LayerKind::ssim:
            if (!saw_out || !saw_kernel) {
                fail(line, to_string(spec.kind) + " layer needs out= and kernel=");
            }
            if (!saw_stride) spec.stride = 1;
            break;
        case LayerKind::maxpool:
            if (!saw_kernel) spec.kernel_h = spec.kernel_w = 2;
            if (!saw_stride) spec.stride = spec.kernel_h;
            break;
        case LayerKind::fc:
            if (!saw_out) fail(line, "fc layer needs out=");
            break;
        case LayerKind::relu:
        case LayerKind::softmax_xent:
            if (tokens.size() > 1) fail(line, to_string(spec.kind) + " layer takes no options");
            break;
    }
    try {
        spec.validate();
    } catch (const config_error& e) {
        fail(line, e.what());
    }
    return spec;
}

std::string layer_line(const LayerSpec& spec) {
    std::string out = to_string(spec.kind);
    switch (spec.kind) {
        case LayerKind::conv:
        case LayerKind::ssim:
            out += " out=" + std::to_string(spec.out_channels) + " kernel=" +
                   std::to_string(spec.kernel_h) + "x" + std::to_string(spec.kernel_w) +
                   " stride=" + std::to_string(spec.stride) +
                   " pad=" + std::to_string(spec.padding);
            break;
        case LayerKind::maxpool:
            out += " window=" + std::to_string(spec.kernel_h) + "x" +
                   std::to_string(spec.kernel_w) + " stride=" + std::to_string(spec.stride);
            break;
        case LayerKind::fc:
            out += " out=" + std::to_string(spec.out_channels);
            break;
        case LayerKind::relu:
        case LayerKind::softmax_xent:
            break;
    }
    return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    cfg.attack_epsilons.clear();
    bool saw_attack_epsilons = false;

    std::istringstream in(text);
    std::string raw;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(line_no, "unterminated section header");
            section = line.substr(1, line.size() - 2);
            if (section != "model" && section != "train" && section != "ssim" &&
                section != "data" && section != "attack" && section != "output") {
                fail(line_no, "unknown section [" + section + "]");
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(line_no, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(line_no, "empty key");

        if (section.empty()) {
            if (key == "name") cfg.name = value;
            else if (key == "description") cfg.description = value;
            else fail(line_no, "unknown top-level key '" + key + "'");
        } else if (section == "model") {
            if (key != "layer") fail(line_no, "the [model] section only takes layer = lines");
            cfg.model.layers.push_back(parse_layer_line(value, line_no));
        } else if (section == "train") {
            if (key == "learning_rate") cfg.train.learning_rate = parse_double_at(value, line_no, key);
            else if (key == "momentum") cfg.train.momentum = parse_double_at(value, line_no, key);
            else if (key == "weight_decay") cfg.train.weight_decay = parse_double_at(value, line_no, key);
            else if (key == "batch_size") cfg.train.batch_size = parse_u64_at(value, line_no, key);
            else if (key == "max_epochs") cfg.train.max_epochs = parse_u64_at(value, line_no, key);
            else if (key == "seed") cfg.train.seed = parse_u64_at(value, line_no, key);
            else if (key == "augment") cfg.train.augment = parse_bool_at(value, line_no, key);
            else if (key == "threads") cfg.train.threads = parse_u64_at(value, line_no, key);
            else fail(line_no, "unknown [train] key '" + key + "'");
        } else if (section == "ssim") {
            if (key == "c1") cfg.ssim.c1 = parse_double_at(value, line_no, key);
            else if (key == "c2") cfg.ssim.c2 = parse_double_at(value, line_no, key);
            else fail(line_no, "unknown [ssim] key '" + key + "'");
        } else if (section == "data") {
            if (key == "dir") cfg.data_dir = value;
            else if (key == "subset_per_class") cfg.subset_per_class = parse_u64_at(value, line_no, key);
            else fail(line_no, "unknown [data] key '" + key + "'");
        } else if (section == "attack") {
            if (key != "epsilons") fail(line_no, "unknown [attack] key '" + key + "'");
            saw_attack_epsilons = true;
            for (const std::string& tok : split_list(value)) {
                double v = 0.0;
                if (!parse_double(tok, v)) fail(line_no, "bad epsilon '" + tok + "'");
                cfg.attack_epsilons.push_back(v);
            }
        } else if (section == "output") {
            if (key != "dir") fail(line_no, "unknown [output] key '" + key + "'");
            cfg.output_dir = value;
        }
    }

    if (cfg.name.empty()) throw config_error("config must set a name");
    if (!(cfg.ssim.c1 > 0.0) || !(cfg.ssim.c2 > 0.0)) {
        throw config_error("config: stability constants must be positive");
    }
    if (!saw_attack_epsilons) {
        cfg.attack_epsilons.assign(std::begin(kDefaultAttackEpsilons),
                                   std::end(kDefaultAttackEpsilons));
    }
    cfg.ssim.c3 = cfg.ssim.c2 / 2.0;
    cfg.model.name = cfg.name;
    return cfg;
}

ExperimentConfig load_config_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw config_error("cannot open config file " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& config) {
    std::string out;
    out += "name = " + config.name + "\n";
    if (!config.description.empty()) out += "description = " + config.description + "\n";
    out += "\n[model]\n";
    for (const LayerSpec& layer : config.model.layers) {
        out += "layer = " + layer_line(layer) + "\n";
    }
    out += "\n[train]\n";
    out += "learning_rate = " + format_double(config.train.learning_rate) + "\n";
    out += "momentum = " + format_double(config.train.momentum) + "\n";
    out += "weight_decay = " + format_double(config.train.weight_decay) + "\n";
    out += "batch_size = " + std::to_string(config.train.batch_size) + "\n";
    out += "max_epochs = " + std::to_string(config.train.max_epochs) + "\n";
    out += "seed = " + std::to_string(config.train.seed) + "\n";
    out += "augment = " + std::string(config.train.augment ? "true" : "false") + "\n";
    out += "threads = " + std::to_string(config.train.threads) + "\n";
    out += "\n[ssim]\n";
    out += "c1 = " + format_double(config.ssim.c1) + "\n";
    out += "c2 = " + format_double(config.ssim.c2) + "\n";
    out += "\n[data]\n";
    out += "dir = " + config.data_dir.generic_string() + "\n";
    out += "subset_per_class = " + std::to_string(config.subset_per_class) + "\n";
    out += "\n[attack]\n";
    out += "epsilons =";
    for (std::size_t i = 0; i < config.attack_epsilons.size(); ++i) {
        out += (i ? "," : " ") + format_double(config.attack_epsilons[i]);
    }
    out += "\n";
    out += "\n[output]\n";
    out += "dir = " + config.output_dir.generic_string() + "\n";
    return out;
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t hash = 14695981039346656037ULL;
    for (const char ch : bytes) {
        hash ^= static_cast<std::uint8_t>(ch);
        hash *= 1099511628211ULL;
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[hash & 0xF];
        hash >>= 4;
    }
    return out;
}

std::string config_fingerprint(const ExperimentConfig& config) {
    return fnv1a_hex(serialize_config(config));
}

std::string model_id(const ExperimentConfig& config) {
    return config.name + "-" + config_fingerprint(config).substr(0, 8);
}

namespace {

ExperimentConfig make_builtin(const std::string& name, const std::string& description,
                              std::vector<LayerSpec> layers) {
    ExperimentConfig cfg;
    cfg.name = name;
    cfg.description = description;
    cfg.model.name = name;
    cfg.model.layers = std::move(layers);
    cfg.output_dir = std::filesystem::path("runs") / name;
    return cfg;
}

std::vector<ExperimentConfig> make_builtins() {
    using L = LayerSpec;
    std::vector<ExperimentConfig> out;
    out.push_back(make_builtin(
        "shallow-ssim", "Two-stage classifier led by a structural-similarity feature layer.",
        {L::ssim(32, 7, 1, 3), L::relu(), L::maxpool(), L::conv(32, 5, 1, 2), L::relu(),
         L::maxpool(), L::fc(10), L::softmax_xent()}));
    out.push_back(make_builtin(
        "shallow-conv", "Two-stage convolutional baseline matching shallow-ssim's footprint.",
        {L::conv(32, 7, 1, 3), L::maxpool(), L::conv(32, 5, 1, 2), L::relu(), L::maxpool(),
         L::fc(10), L::softmax_xent()}));
    out.push_back(make_builtin(
        "ssim-norelu", "shallow-ssim without the rectifier after the similarity layer.",
        {L::ssim(32, 7, 1, 3), L::maxpool(), L::conv(32, 5, 1, 2), L::relu(), L::maxpool(),
         L::fc(10), L::softmax_xent()}));
    out.push_back(make_builtin(
        "deep-ssim", "Three convolutional stages feeding a structural-similarity layer.",
        {L::conv(32, 5, 1, 2), L::relu(), L::maxpool(), L::conv(32, 5, 1, 2), L::relu(),
         L::maxpool(), L::conv(32, 5, 1, 2), L::relu(), L::maxpool(), L::ssim(32, 5, 1, 2),
         L::relu(), L::fc(10), L::softmax_xent()}));
    out.push_back(make_builtin(
        "deep-conv", "Four-stage convolutional baseline matching deep-ssim's footprint.",
        {L::conv(32, 5, 1, 2), L::relu(), L::maxpool(), L::conv(32, 5, 1, 2), L::relu(),
         L::maxpool(), L::conv(32, 5, 1, 2), L::relu(), L::maxpool(), L::conv(32, 5, 1, 2),
         L::relu(), L::fc(10), L::softmax_xent()}));
    return out;
}

}  // namespace

const std::vector<ExperimentConfig>& builtin_configs() {
    static const std::vector<ExperimentConfig> configs = make_builtins();
    return configs;
}

const ExperimentConfig* find_builtin_config(const std::string& name) {
    for (const ExperimentConfig& cfg : builtin_configs()) {
        if (cfg.name == name) return &cfg;
    }
    return nullptr;
}

}  // namespace ssimnet
