#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ssimnet/tensor.hpp"

namespace ssimnet {

inline constexpr std::size_t kCifarClasses = 10;
inline constexpr std::size_t kCifarChannels = 3;
inline constexpr std::size_t kCifarDim = 32;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarChannels * kCifarDim * kCifarDim;
inline constexpr std::size_t kCifarRecordsPerBatch = 10000;

// One labeled image, pixels (C, H, W) scaled to [0, 1].
struct ImageRecord {
    int label = 0;
    Tensor pixels;
};

enum class SplitRole { train, validation };
std::string to_string(SplitRole role);

struct DatasetSplit {
    SplitRole role = SplitRole::train;
    std::vector<ImageRecord> records;
};

// Decodes CIFAR-10 binary records: 3073 bytes each, a label byte then
// R/G/B planes row-major. Throws data_error on bad length or label;
// `origin` names the source in messages.
std::vector<ImageRecord> decode_cifar_records(std::span<const std::uint8_t> bytes,
                                              const std::string& origin);
std::vector<ImageRecord> load_cifar_batch(const std::filesystem::path& file);

// Exact inverse of decoding for byte-valued pixels (x -> round(255 x)).
std::vector<std::uint8_t> encode_cifar_records(const std::vector<ImageRecord>& records);

extern const char* const kCifarTrainFiles[5];
extern const char* const kCifarValidationFile;
bool cifar_dataset_present(const std::filesystem::path& dir);

DatasetSplit load_cifar_train(const std::filesystem::path& dir);
DatasetSplit load_cifar_validation(const std::filesystem::path& dir);

// Mirrors each row; applying twice returns the original bit for bit.
Tensor horizontal_flip(const Tensor& image);

// Per-channel mean and population standard deviation.
struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;
    bool operator==(const ChannelStats&) const = default;
};

// Computed over every pixel of the split; a zero-spread channel is a
// data error (normalization would divide by zero).
ChannelStats compute_channel_stats(const DatasetSplit& split);
Tensor normalize_image(const Tensor& image, const ChannelStats& stats);
void normalize_split(DatasetSplit& split, const ChannelStats& stats);

// Plain-text key=value persistence; values round-trip exactly.
void save_channel_stats(const std::filesystem::path& file, const ChannelStats& stats);
ChannelStats load_channel_stats(const std::filesystem::path& file);

// Deterministically samples `per_class` records of each class (0 keeps
// everything). Result is ordered by original index; short classes are a
// usage error.
DatasetSplit balanced_subset(const DatasetSplit& split, std::size_t per_class,
                             std::uint64_t seed);

}  // namespace ssimnet
