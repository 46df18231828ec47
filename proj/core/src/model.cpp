#include "ssimnet/model.hpp"

#include <string>
#include <utility>

#include "im2col.hpp"
#include "ssimnet/error.hpp"
#include "ssimnet/ssim_layer.hpp"

namespace ssimnet {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    // splitmix64 step keyed by the salt; decorrelates per-layer streams
    // drawn from one run seed.
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

Shape4 apply_layer_shape(const LayerSpec& spec, const Shape4& in, std::size_t index) {
    const std::string where = "layer " + std::to_string(index) + " (" + to_string(spec.kind) + ")";
    switch (spec.kind) {
        case LayerKind::conv:
        case LayerKind::ssim: {
            const auto g = detail::ConvGeometry::compute(in.c, in.h, in.w, spec.kernel_h,
                                                         spec.kernel_w, spec.stride, spec.padding);
            if (spec.kind == LayerKind::ssim && g.patch_len() < 2) {
                throw config_error(where + ": patch length must be at least 2");
            }
            return {in.n, spec.out_channels, g.out_h, g.out_w};
        }
        case LayerKind::relu:
            return in;
        case LayerKind::maxpool: {
            if (in.h < spec.kernel_h || in.w < spec.kernel_w) {
                throw config_error(where + ": window larger than input " + std::to_string(in.h) +
                                   "x" + std::to_string(in.w));
            }
            return {in.n, in.c, (in.h - spec.kernel_h) / spec.stride + 1,
                    (in.w - spec.kernel_w) / spec.stride + 1};
        }
        case LayerKind::fc:
            return {in.n, spec.out_channels, 1, 1};
        case LayerKind::softmax_xent:
            return in;
    }
    throw config_error(where + ": unknown kind");
}

}  // namespace

Shape4 validate_model(const ModelSpec& spec, const Shape4& input) {
    if (spec.layers.empty()) throw config_error("model '" + spec.name + "' has no layers");
    Shape4 cur = input;
    bool seen_fc = false;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& layer = spec.layers[i];
        layer.validate();
        if (layer.kind == LayerKind::softmax_xent && i + 1 != spec.layers.size()) {
            throw config_error("model '" + spec.name + "': softmax-xent must be the last entry");
        }
        if (seen_fc && layer.kind != LayerKind::fc && layer.kind != LayerKind::softmax_xent) {
            throw config_error("model '" + spec.name + "': only fc or softmax-xent may follow fc");
        }
        cur = apply_layer_shape(layer, cur, i);
        if (layer.kind == LayerKind::fc) seen_fc = true;
    }
    const LayerKind last = spec.layers.back().kind;
    if (last != LayerKind::fc && last != LayerKind::softmax_xent) {
        throw config_error("model '" + spec.name + "' must end in an fc classifier");
    }
    if (!seen_fc) {
        throw config_error("model '" + spec.name + "' must contain an fc classifier");
    }
    return cur;
}

Model::Model(const ModelSpec& spec, const Shape4& input, std::uint64_t seed,
             const SsimConstants& constants)
    : spec_(spec), input_shape_(input), seed_(seed), constants_(constants) {
    input_shape_.n = 1;
    output_shape_ = validate_model(spec_, input_shape_);
    Shape4 cur = input_shape_;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const LayerSpec& layer = spec_.layers[i];
        const std::uint64_t layer_seed = derive_seed(seed_, i);
        switch (layer.kind) {
            case LayerKind::conv:
                layers_.push_back(std::make_unique<Conv2dLayer>(layer, cur.c, layer_seed));
                break;
            case LayerKind::ssim:
                layers_.push_back(
                    std::make_unique<SsimLayer>(layer, cur.c, layer_seed, constants_));
                break;
            case LayerKind::relu:
                layers_.push_back(std::make_unique<ReluLayer>());
                break;
            case LayerKind::maxpool:
                layers_.push_back(std::make_unique<MaxPoolLayer>(layer));
                break;
            case LayerKind::fc:
                layers_.push_back(
                    std::make_unique<FcLayer>(layer, cur.c * cur.h * cur.w, layer_seed));
                break;
            case LayerKind::softmax_xent:
                break;  // loss marker, not an executable layer
        }
        if (layer.kind != LayerKind::softmax_xent) {
            layer_names_.push_back("layer" + std::to_string(i) + "." + to_string(layer.kind));
        }
        cur = apply_layer_shape(layer, cur, i);
    }
}

Model::Model(const Model& other)
    : spec_(other.spec_),
      input_shape_(other.input_shape_),
      output_shape_(other.output_shape_),
      seed_(other.seed_),
      constants_(other.constants_),
      layer_names_(other.layer_names_) {
    layers_.reserve(other.layers_.size());
    for (const auto& layer : other.layers_) layers_.push_back(layer->clone());
}

Model& Model::operator=(const Model& other) {
    if (this != &other) {
        Model tmp(other);
        *this = std::move(tmp);
    }
    return *this;
}

Tensor Model::forward(const Tensor& input, bool cache) {
    const Shape4 in = Shape4::from_tensor(input);
    if (in.c != input_shape_.c || in.h != input_shape_.h || in.w != input_shape_.w) {
        throw shape_error("model expects (n, " + std::to_string(input_shape_.c) + ", " +
                          std::to_string(input_shape_.h) + ", " + std::to_string(input_shape_.w) +
                          ") input");
    }
    Tensor cur = input;
    for (auto& layer : layers_) cur = layer->forward(cur, cache);
    return cur;
}

Tensor Model::backward(const Tensor& grad_logits) {
    Tensor cur = grad_logits;
    for (std::size_t i = layers_.size(); i-- > 0;) cur = layers_[i]->backward(cur);
    return cur;
}

std::vector<ParamRef> Model::params() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        layers_[i]->collect_params(layer_names_[i], out);
    }
    return out;
}

void Model::zero_grads() {
    for (ParamRef& p : params()) p.grad->fill(0.0);
}

void Model::copy_params_from(const Model& other) {
    if (spec_ != other.spec_) {
        throw state_error("copy_params_from: models were built from different specs");
    }
    // clone() preserves values, so pull tensors layer by layer.
    auto dst = params();
    auto src = const_cast<Model&>(other).params();
    if (dst.size() != src.size()) {
        throw state_error("copy_params_from: parameter lists differ");
    }
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (dst[i].name != src[i].name) {
            throw state_error("copy_params_from: parameter order differs");
        }
        *dst[i].value = *src[i].value;
        dst[i].grad->fill(0.0);
    }
}

}  // namespace ssimnet
