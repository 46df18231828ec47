#include "ssimnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "ssimnet/error.hpp"

namespace ssimnet {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_string(std::string& out, const std::string& s) {
    put_u64(out, s.size());
    out += s;
}

class Reader {
  public:
    Reader(const std::string& bytes, std::string origin)
        : bytes_(bytes), origin_(std::move(origin)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_ + static_cast<std::size_t>(i)]);
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) {
            v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_ + static_cast<std::size_t>(i)]);
        }
        pos_ += 8;
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    std::string str() {
        const std::uint64_t len = u64();
        need(len);
        std::string s = bytes_.substr(pos_, len);
        pos_ += len;
        return s;
    }

    void raw(char* dst, std::size_t len) {
        need(len);
        std::memcpy(dst, bytes_.data() + pos_, len);
        pos_ += len;
    }

    bool at_end() const { return pos_ == bytes_.size(); }

  private:
    void need(std::uint64_t len) {
        if (pos_ + len > bytes_.size()) {
            throw data_error(origin_ + ": truncated checkpoint (needed " + std::to_string(len) +
                             " more bytes at offset " + std::to_string(pos_) + ")");
        }
    }

    const std::string& bytes_;
    std::string origin_;
    std::size_t pos_ = 0;
};

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const NamedTensor& t : tensors) {
        if (t.name == name) return &t.value;
    }
    return nullptr;
}

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt) {
    std::string out;
    out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_u32(out, ckpt.version);
    put_string(out, ckpt.fingerprint);
    put_string(out, ckpt.config_text);
    put_u64(out, ckpt.epoch);
    put_f64(out, ckpt.best_metric);
    put_u64(out, ckpt.tensors.size());
    for (const NamedTensor& t : ckpt.tensors) {
        put_string(out, t.name);
        put_u64(out, t.value.rank());
        for (std::size_t d : t.value.shape()) put_u64(out, d);
        // Raw little-endian f64 payload; on LE hosts this is a straight
        // copy, and put_f64 keeps it byte-stable elsewhere.
        for (std::size_t i = 0; i < t.value.size(); ++i) put_f64(out, t.value.data()[i]);
    }
    std::ofstream f(file, std::ios::binary | std::ios::trunc);
    if (!f) throw data_error("cannot write checkpoint " + file.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    f.flush();
    if (!f) throw data_error("failed writing checkpoint " + file.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
    std::ifstream f(file, std::ios::binary);
    if (!f) throw data_error("cannot open checkpoint " + file.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r(bytes, file.string());

    char magic[sizeof(kCheckpointMagic)];
    r.raw(magic, sizeof(magic));
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw data_error(file.string() + ": not a checkpoint (bad magic)");
    }
    Checkpoint ckpt;
    ckpt.version = r.u32();
    if (ckpt.version != kCheckpointVersion) {
        throw data_error(file.string() + ": unsupported checkpoint version " +
                         std::to_string(ckpt.version));
    }
    ckpt.fingerprint = r.str();
    ckpt.config_text = r.str();
    if (fnv1a_hex(ckpt.config_text) != ckpt.fingerprint) {
        throw data_error(file.string() +
                         ": fingerprint does not match the embedded config (corrupt file?)");
    }
    ckpt.epoch = r.u64();
    ckpt.best_metric = r.f64();
    const std::uint64_t count = r.u64();
    ckpt.tensors.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name = r.str();
        const std::uint64_t rank = r.u64();
        if (rank > 8) throw data_error(file.string() + ": implausible tensor rank");
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = r.u64();
        t.value = Tensor(shape);
        for (std::size_t j = 0; j < t.value.size(); ++j) t.value.data()[j] = r.f64();
        ckpt.tensors.push_back(std::move(t));
    }
    if (!r.at_end()) throw data_error(file.string() + ": trailing bytes after checkpoint data");
    return ckpt;
}

Checkpoint snapshot_checkpoint(const ExperimentConfig& config, Model& model,
                               const SgdOptimizer* optimizer, std::uint64_t epoch,
                               double best_metric) {
    Checkpoint ckpt;
    ckpt.config_text = serialize_config(config);
    ckpt.fingerprint = fnv1a_hex(ckpt.config_text);
    ckpt.epoch = epoch;
    ckpt.best_metric = best_metric;
    for (const ParamRef& p : model.params()) {
        ckpt.tensors.push_back({p.name, *p.value});
    }
    if (optimizer) {
        for (std::size_t i = 0; i < optimizer->size(); ++i) {
            ckpt.tensors.push_back({"velocity." + optimizer->name(i), optimizer->velocity(i)});
        }
    }
    return ckpt;
}

ExperimentConfig checkpoint_config(const Checkpoint& ckpt) {
    return parse_config(ckpt.config_text);
}

void restore_checkpoint(const Checkpoint& ckpt, Model& model, SgdOptimizer* optimizer) {
    for (const ParamRef& p : model.params()) {
        const Tensor* stored = ckpt.find(p.name);
        if (!stored) throw data_error("checkpoint is missing tensor " + p.name);
        if (stored->shape() != p.value->shape()) {
            throw data_error("checkpoint tensor " + p.name + " has the wrong shape");
        }
        *p.value = *stored;
        p.grad->fill(0.0);
    }
    if (optimizer) {
        for (std::size_t i = 0; i < optimizer->size(); ++i) {
            const std::string name = "velocity." + optimizer->name(i);
            const Tensor* stored = ckpt.find(name);
            if (!stored) throw data_error("checkpoint is missing tensor " + name);
            if (stored->shape() != optimizer->velocity(i).shape()) {
                throw data_error("checkpoint tensor " + name + " has the wrong shape");
            }
            optimizer->velocity(i) = *stored;
        }
    }
}

}  // namespace ssimnet
