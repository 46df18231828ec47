#include "ssimnet/cifar.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "ssimnet/error.hpp"
#include "ssimnet/model.hpp"

namespace ssimnet {

const char* const kCifarTrainFiles[5] = {"data_batch_1.bin", "data_batch_2.bin",
                                         "data_batch_3.bin", "data_batch_4.bin",
                                         "data_batch_5.bin"};
const char* const kCifarValidationFile = "test_batch.bin";

std::string to_string(SplitRole role) {
    return role == SplitRole::train ? "train" : "val";
}

std::vector<ImageRecord> decode_cifar_records(std::span<const std::uint8_t> bytes,
                                              const std::string& origin) {
    const std::size_t expected = kCifarRecordsPerBatch * kCifarRecordBytes;
    if (bytes.size() != expected) {
        throw data_error(origin + ": expected " + std::to_string(expected) + " bytes (" +
                         std::to_string(kCifarRecordsPerBatch) + " records of " +
                         std::to_string(kCifarRecordBytes) + "), got " +
                         std::to_string(bytes.size()));
    }
    const std::size_t plane = kCifarDim * kCifarDim;
    std::vector<ImageRecord> records;
    records.reserve(kCifarRecordsPerBatch);
    for (std::size_t r = 0; r < kCifarRecordsPerBatch; ++r) {
        const std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
        const int label = rec[0];
        if (label >= static_cast<int>(kCifarClasses)) {
            throw data_error(origin + ": record " + std::to_string(r) + " has label " +
                             std::to_string(label) + " outside [0, " +
                             std::to_string(kCifarClasses) + ")");
        }
        ImageRecord img;
        img.label = label;
        img.pixels = Tensor({kCifarChannels, kCifarDim, kCifarDim});
        double* px = img.pixels.data();
        for (std::size_t i = 0; i < kCifarChannels * plane; ++i) {
            px[i] = static_cast<double>(rec[1 + i]) / 255.0;
        }
        records.push_back(std::move(img));
    }
    return records;
}

std::vector<ImageRecord> load_cifar_batch(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw data_error("cannot open dataset file " + file.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_cifar_records(bytes, file.string());
}

std::vector<std::uint8_t> encode_cifar_records(const std::vector<ImageRecord>& records) {
    const std::size_t plane = kCifarDim * kCifarDim;
    std::vector<std::uint8_t> bytes;
    bytes.reserve(records.size() * kCifarRecordBytes);
    for (std::size_t r = 0; r < records.size(); ++r) {
        const ImageRecord& rec = records[r];
        if (rec.label < 0 || rec.label >= static_cast<int>(kCifarClasses)) {
            throw data_error("record " + std::to_string(r) + ": label out of range");
        }
        if (rec.pixels.size() != kCifarChannels * plane) {
            throw data_error("record " + std::to_string(r) + ": pixels are not 3x32x32");
        }
        bytes.push_back(static_cast<std::uint8_t>(rec.label));
        const double* px = rec.pixels.data();
        for (std::size_t i = 0; i < kCifarChannels * plane; ++i) {
            const double v = px[i] * 255.0;
            if (!std::isfinite(v) || v < -0.5 || v > 255.5) {
                throw data_error("record " + std::to_string(r) +
                                 ": pixel outside the byte range, cannot encode");
            }
            bytes.push_back(static_cast<std::uint8_t>(std::llround(v)));
        }
    }
    return bytes;
}

bool cifar_dataset_present(const std::filesystem::path& dir) {
    for (const char* name : kCifarTrainFiles) {
        if (!std::filesystem::exists(dir / name)) return false;
    }
    return std::filesystem::exists(dir / kCifarValidationFile);
}

DatasetSplit load_cifar_train(const std::filesystem::path& dir) {
    DatasetSplit split;
    split.role = SplitRole::train;
    split.records.reserve(5 * kCifarRecordsPerBatch);
    for (const char* name : kCifarTrainFiles) {
        auto batch = load_cifar_batch(dir / name);
        for (auto& rec : batch) split.records.push_back(std::move(rec));
    }
    return split;
}

DatasetSplit load_cifar_validation(const std::filesystem::path& dir) {
    DatasetSplit split;
    split.role = SplitRole::validation;
    split.records = load_cifar_batch(dir / kCifarValidationFile);
    return split;
}

Tensor horizontal_flip(const Tensor& image) {
    if (image.rank() != 3) throw shape_error("horizontal_flip expects a (C, H, W) image");
    const std::size_t c = image.shape()[0], h = image.shape()[1], w = image.shape()[2];
    Tensor out(image.shape());
    const double* src = image.data();
    double* dst = out.data();
    for (std::size_t ci = 0; ci < c; ++ci) {
        for (std::size_t r = 0; r < h; ++r) {
            const double* srow = src + (ci * h + r) * w;
            double* drow = dst + (ci * h + r) * w;
            for (std::size_t j = 0; j < w; ++j) drow[j] = srow[w - 1 - j];
        }
    }
    return out;
}

ChannelStats compute_channel_stats(const DatasetSplit& split) {
    if (split.records.empty()) throw data_error("channel stats: empty split");
    const Tensor& first = split.records.front().pixels;
    if (first.rank() != 3) throw shape_error("channel stats: records must be (C, H, W)");
    const std::size_t c = first.shape()[0];
    const std::size_t plane = first.shape()[1] * first.shape()[2];

    ChannelStats stats;
    stats.mean.assign(c, 0.0);
    stats.stddev.assign(c, 0.0);
    const double count = static_cast<double>(split.records.size() * plane);
    for (std::size_t ci = 0; ci < c; ++ci) {
        double sum = 0.0;
        for (const ImageRecord& rec : split.records) {
            if (rec.pixels.shape() != first.shape()) {
                throw shape_error("channel stats: records disagree on image shape");
            }
            const double* px = rec.pixels.data() + ci * plane;
            for (std::size_t i = 0; i < plane; ++i) sum += px[i];
        }
        const double mu = sum / count;
        double ss = 0.0;
        for (const ImageRecord& rec : split.records) {
            const double* px = rec.pixels.data() + ci * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double d = px[i] - mu;
                ss += d * d;
            }
        }
        const double sd = std::sqrt(ss / count);
        if (sd == 0.0) {
            throw data_error("channel " + std::to_string(ci) +
                             " has zero spread; cannot normalize");
        }
        stats.mean[ci] = mu;
        stats.stddev[ci] = sd;
    }
    return stats;
}

Tensor normalize_image(const Tensor& image, const ChannelStats& stats) {
    if (image.rank() != 3) throw shape_error("normalize_image expects a (C, H, W) image");
    const std::size_t c = image.shape()[0];
    if (c != stats.mean.size() || c != stats.stddev.size()) {
        throw shape_error("normalize_image: stats cover " + std::to_string(stats.mean.size()) +
                          " channels, image has " + std::to_string(c));
    }
    const std::size_t plane = image.shape()[1] * image.shape()[2];
    Tensor out(image.shape());
    const double* src = image.data();
    double* dst = out.data();
    for (std::size_t ci = 0; ci < c; ++ci) {
        const double mu = stats.mean[ci];
        const double inv = 1.0 / stats.stddev[ci];
        for (std::size_t i = 0; i < plane; ++i) {
            dst[ci * plane + i] = (src[ci * plane + i] - mu) * inv;
        }
    }
    return out;
}

void normalize_split(DatasetSplit& split, const ChannelStats& stats) {
    for (ImageRecord& rec : split.records) rec.pixels = normalize_image(rec.pixels, stats);
}

namespace {

std::string format_double_list(const std::vector<double>& values) {
    std::string out;
    char buf[64];
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), values[i]);
        if (ec != std::errc()) throw state_error("failed to format a stats value");
        if (i) out += ",";
        out.append(buf, end);
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& origin) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string tok = text.substr(pos, comma - pos);
        double v = 0.0;
        const char* b = tok.data();
        auto [p, ec] = std::from_chars(b, b + tok.size(), v);
        if (ec != std::errc() || p != b + tok.size()) {
            throw data_error(origin + ": bad numeric value '" + tok + "'");
        }
        out.push_back(v);
        pos = comma + 1;
        if (comma == text.size()) break;
    }
    return out;
}

}  // namespace

void save_channel_stats(const std::filesystem::path& file, const ChannelStats& stats) {
    std::ofstream out(file);
    if (!out) throw data_error("cannot write stats file " + file.string());
    out << "channels = " << stats.mean.size() << "\n";
    out << "mean = " << format_double_list(stats.mean) << "\n";
    out << "stddev = " << format_double_list(stats.stddev) << "\n";
    if (!out) throw data_error("failed writing stats file " + file.string());
}

ChannelStats load_channel_stats(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw data_error("cannot open stats file " + file.string());
    ChannelStats stats;
    std::size_t channels = 0;
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto trim = [](std::string& s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        trim(key);
        trim(value);
        if (key == "channels") {
            channels = static_cast<std::size_t>(std::stoul(value));
        } else if (key == "mean") {
            stats.mean = parse_double_list(value, file.string());
        } else if (key == "stddev") {
            stats.stddev = parse_double_list(value, file.string());
        } else {
            throw data_error(file.string() + ": unknown stats key '" + key + "'");
        }
    }
    if (stats.mean.empty() || stats.mean.size() != stats.stddev.size() ||
        (channels && channels != stats.mean.size())) {
        throw data_error(file.string() + ": incomplete or inconsistent stats");
    }
    for (double sd : stats.stddev) {
        if (!(sd > 0.0)) throw data_error(file.string() + ": stddev must be positive");
    }
    return stats;
}

DatasetSplit balanced_subset(const DatasetSplit& split, std::size_t per_class,
                             std::uint64_t seed) {
    if (per_class == 0) return split;
    std::vector<std::vector<std::size_t>> by_class(kCifarClasses);
    for (std::size_t i = 0; i < split.records.size(); ++i) {
        const int label = split.records[i].label;
        if (label < 0 || label >= static_cast<int>(kCifarClasses)) {
            throw data_error("subset: record " + std::to_string(i) + " has label out of range");
        }
        by_class[static_cast<std::size_t>(label)].push_back(i);
    }
    std::vector<std::size_t> chosen;
    chosen.reserve(per_class * kCifarClasses);
    for (std::size_t c = 0; c < kCifarClasses; ++c) {
        auto& pool = by_class[c];
        if (pool.size() < per_class) {
            throw config_error("subset: class " + std::to_string(c) + " has only " +
                               std::to_string(pool.size()) + " records, need " +
                               std::to_string(per_class));
        }
        std::mt19937_64 gen(derive_seed(seed, c));
        for (std::size_t i = pool.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(gen() % (i + 1));
            std::swap(pool[i], pool[j]);
        }
        chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(per_class));
    }
    std::sort(chosen.begin(), chosen.end());
    DatasetSplit out;
    out.role = split.role;
    out.records.reserve(chosen.size());
    for (std::size_t idx : chosen) out.records.push_back(split.records[idx]);
    return out;
}

}  // namespace ssimnet
