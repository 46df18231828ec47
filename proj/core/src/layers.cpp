#include "ssimnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "im2col.hpp"
#include "ssimnet/error.hpp"

namespace ssimnet {

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::ssim: return "ssim";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::fc: return "fc";
        case LayerKind::softmax_xent: return "softmax-xent";
    }
    throw config_error("unknown layer kind");
}

LayerKind layer_kind_from_string(const std::string& name) {
    if (name == "conv") return LayerKind::conv;
    if (name == "ssim") return LayerKind::ssim;
    if (name == "relu") return LayerKind::relu;
    if (name == "maxpool") return LayerKind::maxpool;
    if (name == "fc") return LayerKind::fc;
    if (name == "softmax-xent" || name == "softmax_xent") return LayerKind::softmax_xent;
    throw config_error("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::conv(std::size_t out_channels, std::size_t kernel, std::size_t stride,
                          std::size_t padding) {
    LayerSpec s;
    s.kind = LayerKind::conv;
    s.out_channels = out_channels;
    s.kernel_h = s.kernel_w = kernel;
    s.stride = stride;
    s.padding = padding;
    return s;
}

LayerSpec LayerSpec::ssim(std::size_t out_channels, std::size_t kernel, std::size_t stride,
                          std::size_t padding) {
    LayerSpec s = conv(out_channels, kernel, stride, padding);
    s.kind = LayerKind::ssim;
    return s;
}

LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::relu;
    return s;
}

LayerSpec LayerSpec::maxpool(std::size_t window, std::size_t stride) {
    LayerSpec s;
    s.kind = LayerKind::maxpool;
    s.kernel_h = s.kernel_w = window;
    s.stride = stride;
    return s;
}

LayerSpec LayerSpec::fc(std::size_t out_channels) {
    LayerSpec s;
    s.kind = LayerKind::fc;
    s.out_channels = out_channels;
    return s;
}

LayerSpec LayerSpec::softmax_xent() {
    LayerSpec s;
    s.kind = LayerKind::softmax_xent;
    return s;
}

void LayerSpec::validate() const {
    const bool windowed = kind == LayerKind::conv || kind == LayerKind::ssim ||
                          kind == LayerKind::maxpool;
    const bool parameterized =
        kind == LayerKind::conv || kind == LayerKind::ssim || kind == LayerKind::fc;
    const std::string label = to_string(kind);
    if (windowed) {
        if (kernel_h == 0 || kernel_w == 0) {
            throw config_error(label + " layer: kernel size must be positive");
        }
        if (stride == 0) throw config_error(label + " layer: stride must be positive");
        if (kind == LayerKind::maxpool && padding != 0) {
            throw config_error("maxpool layer runs unpadded (padding must be 0)");
        }
    } else {
        if (kernel_h != 0 || kernel_w != 0 || stride != 0 || padding != 0) {
            throw config_error(label + " layer takes no kernel/stride/padding");
        }
    }
    if (parameterized) {
        if (out_channels == 0) {
            throw config_error(label + " layer: out_channels must be positive");
        }
    } else if (out_channels != 0) {
        throw config_error(label + " layer takes no out_channels");
    }
}

void Layer::collect_params(const std::string&, std::vector<ParamRef>&) {}

namespace {

detail::ConvGeometry geometry_for(const LayerSpec& spec, const Shape4& in) {
    return detail::ConvGeometry::compute(in.c, in.h, in.w, spec.kernel_h, spec.kernel_w,
                                         spec.stride, spec.padding);
}

void require_cache(bool has_cache, const char* what) {
    if (!has_cache) {
        throw state_error(std::string(what) + ": backward called without a cached forward");
    }
}

}  // namespace

Conv2dLayer::Conv2dLayer(const LayerSpec& spec, std::size_t in_channels, std::uint64_t seed)
    : spec_(spec), in_channels_(in_channels) {
    spec_.validate();
    if (spec_.kind != LayerKind::conv) throw config_error("Conv2dLayer needs a conv spec");
    if (in_channels == 0) throw config_error("conv layer: in_channels must be positive");
    const std::size_t fan_in = in_channels * spec_.kernel_h * spec_.kernel_w;
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    weights_ = Tensor::randn_scaled({spec_.out_channels, in_channels, spec_.kernel_h,
                                     spec_.kernel_w},
                                    seed, stddev);
    bias_ = Tensor::zeros({spec_.out_channels});
    grad_weights_ = Tensor::zeros(weights_.shape());
    grad_bias_ = Tensor::zeros(bias_.shape());
}

Tensor Conv2dLayer::forward(const Tensor& input, bool cache) {
    const Shape4 in = Shape4::from_tensor(input);
    if (in.c != in_channels_) {
        throw shape_error("conv layer: expected " + std::to_string(in_channels_) +
                          " input channels, got " + std::to_string(in.c));
    }
    const auto g = geometry_for(spec_, in);
    const std::size_t F = spec_.out_channels;
    const std::size_t np = g.patch_len();
    const std::size_t pos = g.positions();

    Tensor out({in.n, F, g.out_h, g.out_w});
    std::vector<double> col(pos * np);
    const double* w = weights_.data();
    for (std::size_t n = 0; n < in.n; ++n) {
        const double* img = input.data() + n * in.c * in.h * in.w;
        detail::im2col(img, g, col.data());
        double* out_img = out.data() + n * F * pos;
        for (std::size_t f = 0; f < F; ++f) {
            const double* wf = w + f * np;
            const double b = bias_.data()[f];
            double* of = out_img + f * pos;
            for (std::size_t p = 0; p < pos; ++p) {
                const double* patch = col.data() + p * np;
                double acc = 0.0;
                for (std::size_t i = 0; i < np; ++i) acc += wf[i] * patch[i];
                of[p] = acc + b;
            }
        }
    }
    if (cache) {
        cached_input_ = input;
        has_cache_ = true;
    }
    return out;
}

Tensor Conv2dLayer::backward(const Tensor& grad_out) {
    require_cache(has_cache_, "conv layer");
    const Shape4 in = Shape4::from_tensor(cached_input_);
    const auto g = geometry_for(spec_, in);
    const std::size_t F = spec_.out_channels;
    const std::size_t np = g.patch_len();
    const std::size_t pos = g.positions();
    const Shape4 go = Shape4::from_tensor(grad_out);
    if (go.n != in.n || go.c != F || go.h != g.out_h || go.w != g.out_w) {
        throw shape_error("conv layer: grad_out shape does not match the cached forward");
    }

    Tensor grad_in(cached_input_.shape());
    std::vector<double> col(pos * np);
    std::vector<double> gcol(pos * np);
    const double* w = weights_.data();
    double* gw = grad_weights_.data();
    double* gb = grad_bias_.data();
    for (std::size_t n = 0; n < in.n; ++n) {
        const double* img = cached_input_.data() + n * in.c * in.h * in.w;
        detail::im2col(img, g, col.data());
        std::fill(gcol.begin(), gcol.end(), 0.0);
        const double* go_img = grad_out.data() + n * F * pos;
        for (std::size_t f = 0; f < F; ++f) {
            const double* wf = w + f * np;
            double* gwf = gw + f * np;
            const double* gof = go_img + f * pos;
            double gb_acc = 0.0;
            for (std::size_t p = 0; p < pos; ++p) {
                const double gval = gof[p];
                if (gval == 0.0) continue;
                const double* patch = col.data() + p * np;
                double* gpatch = gcol.data() + p * np;
                for (std::size_t i = 0; i < np; ++i) {
                    gwf[i] += gval * patch[i];
                    gpatch[i] += gval * wf[i];
                }
            }
            for (std::size_t p = 0; p < pos; ++p) gb_acc += gof[p];
            gb[f] += gb_acc;
        }
        detail::col2im_add(gcol.data(), g, grad_in.data() + n * in.c * in.h * in.w);
    }
    cached_input_ = Tensor();
    has_cache_ = false;
    return grad_in;
}

void Conv2dLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".weights", &weights_, &grad_weights_, true});
    out.push_back({prefix + ".bias", &bias_, &grad_bias_, false});
}

std::unique_ptr<Layer> Conv2dLayer::clone() const {
    return std::make_unique<Conv2dLayer>(*this);
}

Tensor ReluLayer::forward(const Tensor& input, bool cache) {
    Tensor out(input.shape());
    const double* x = input.data();
    double* y = out.data();
    const std::size_t n = input.size();
    if (cache) {
        mask_.assign(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const bool on = x[i] > 0.0;
            mask_[i] = on ? 1 : 0;
            y[i] = on ? x[i] : 0.0;
        }
        cached_shape_ = input.shape();
        has_cache_ = true;
    } else {
        for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    }
    return out;
}

Tensor ReluLayer::backward(const Tensor& grad_out) {
    require_cache(has_cache_, "relu layer");
    if (grad_out.shape() != cached_shape_) {
        throw shape_error("relu layer: grad_out shape does not match the cached forward");
    }
    Tensor grad_in(cached_shape_);
    const double* go = grad_out.data();
    double* gi = grad_in.data();
    for (std::size_t i = 0; i < grad_in.size(); ++i) gi[i] = mask_[i] ? go[i] : 0.0;
    mask_.clear();
    has_cache_ = false;
    return grad_in;
}

std::unique_ptr<Layer> ReluLayer::clone() const { return std::make_unique<ReluLayer>(*this); }

MaxPoolLayer::MaxPoolLayer(const LayerSpec& spec) : spec_(spec) {
    spec_.validate();
    if (spec_.kind != LayerKind::maxpool) throw config_error("MaxPoolLayer needs a maxpool spec");
}

Tensor MaxPoolLayer::forward(const Tensor& input, bool cache) {
    const Shape4 in = Shape4::from_tensor(input);
    if (in.h < spec_.kernel_h || in.w < spec_.kernel_w) {
        throw shape_error("maxpool layer: window larger than input");
    }
    // Trailing rows/columns that do not fill a window are dropped.
    const std::size_t out_h = (in.h - spec_.kernel_h) / spec_.stride + 1;
    const std::size_t out_w = (in.w - spec_.kernel_w) / spec_.stride + 1;
    Tensor out({in.n, in.c, out_h, out_w});
    std::vector<std::size_t> argmax;
    if (cache) argmax.resize(out.size());

    const double* x = input.data();
    double* y = out.data();
    std::size_t oi = 0;
    for (std::size_t n = 0; n < in.n; ++n) {
        for (std::size_t c = 0; c < in.c; ++c) {
            const double* plane = x + (n * in.c + c) * in.h * in.w;
            const std::size_t plane_base = (n * in.c + c) * in.h * in.w;
            for (std::size_t oh = 0; oh < out_h; ++oh) {
                for (std::size_t ow = 0; ow < out_w; ++ow, ++oi) {
                    const std::size_t top = oh * spec_.stride;
                    const std::size_t left = ow * spec_.stride;
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = 0;
                    for (std::size_t i = 0; i < spec_.kernel_h; ++i) {
                        for (std::size_t j = 0; j < spec_.kernel_w; ++j) {
                            const std::size_t idx = (top + i) * in.w + (left + j);
                            // Strict > keeps the first occurrence on ties.
                            if (plane[idx] > best) {
                                best = plane[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    y[oi] = best;
                    if (cache) argmax[oi] = plane_base + best_idx;
                }
            }
        }
    }
    if (cache) {
        argmax_ = std::move(argmax);
        cached_in_shape_ = input.shape();
        cached_out_shape_ = out.shape();
        has_cache_ = true;
    }
    return out;
}

Tensor MaxPoolLayer::backward(const Tensor& grad_out) {
    require_cache(has_cache_, "maxpool layer");
    if (grad_out.shape() != cached_out_shape_) {
        throw shape_error("maxpool layer: grad_out shape does not match the cached forward");
    }
    Tensor grad_in(cached_in_shape_);
    const double* go = grad_out.data();
    double* gi = grad_in.data();
    for (std::size_t i = 0; i < grad_out.size(); ++i) gi[argmax_[i]] += go[i];
    argmax_.clear();
    has_cache_ = false;
    return grad_in;
}

std::unique_ptr<Layer> MaxPoolLayer::clone() const {
    return std::make_unique<MaxPoolLayer>(*this);
}

FcLayer::FcLayer(const LayerSpec& spec, std::size_t in_features, std::uint64_t seed)
    : spec_(spec), in_features_(in_features) {
    spec_.validate();
    if (spec_.kind != LayerKind::fc) throw config_error("FcLayer needs an fc spec");
    if (in_features == 0) throw config_error("fc layer: in_features must be positive");
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_features));
    weights_ = Tensor::randn_scaled({spec_.out_channels, in_features}, seed, stddev);
    bias_ = Tensor::zeros({spec_.out_channels});
    grad_weights_ = Tensor::zeros(weights_.shape());
    grad_bias_ = Tensor::zeros(bias_.shape());
}

Tensor FcLayer::forward(const Tensor& input, bool cache) {
    if (input.rank() < 2) throw shape_error("fc layer: input must have a leading batch axis");
    const std::size_t n = input.shape()[0];
    const std::size_t features = input.size() / n;
    if (features != in_features_) {
        throw shape_error("fc layer: expected " + std::to_string(in_features_) +
                          " input features, got " + std::to_string(features));
    }
    const std::size_t out_n = spec_.out_channels;
    Tensor out({n, out_n});
    const double* x = input.data();
    const double* w = weights_.data();
    const double* b = bias_.data();
    double* y = out.data();
    for (std::size_t s = 0; s < n; ++s) {
        const double* xs = x + s * features;
        double* ys = y + s * out_n;
        for (std::size_t o = 0; o < out_n; ++o) {
            const double* wo = w + o * features;
            double acc = 0.0;
            for (std::size_t i = 0; i < features; ++i) acc += xs[i] * wo[i];
            ys[o] = acc + b[o];
        }
    }
    if (cache) {
        cached_input_ = input;
        cached_in_shape_ = input.shape();
        has_cache_ = true;
    }
    return out;
}

Tensor FcLayer::backward(const Tensor& grad_out) {
    require_cache(has_cache_, "fc layer");
    const std::size_t n = cached_in_shape_[0];
    if (grad_out.rank() != 2 || grad_out.shape()[0] != n ||
        grad_out.shape()[1] != spec_.out_channels) {
        throw shape_error("fc layer: grad_out shape does not match the cached forward");
    }
    const std::size_t features = in_features_;
    const std::size_t out_n = spec_.out_channels;
    Tensor grad_in(cached_in_shape_);
    const double* x = cached_input_.data();
    const double* w = weights_.data();
    const double* go = grad_out.data();
    double* gw = grad_weights_.data();
    double* gb = grad_bias_.data();
    double* gi = grad_in.data();
    for (std::size_t s = 0; s < n; ++s) {
        const double* xs = x + s * features;
        const double* gs = go + s * out_n;
        double* gis = gi + s * features;
        for (std::size_t o = 0; o < out_n; ++o) {
            const double gval = gs[o];
            gb[o] += gval;
            if (gval == 0.0) continue;
            const double* wo = w + o * features;
            double* gwo = gw + o * features;
            for (std::size_t i = 0; i < features; ++i) {
                gwo[i] += gval * xs[i];
                gis[i] += gval * wo[i];
            }
        }
    }
    cached_input_ = Tensor();
    has_cache_ = false;
    return grad_in;
}

void FcLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".weights", &weights_, &grad_weights_, true});
    out.push_back({prefix + ".bias", &bias_, &grad_bias_, false});
}

std::unique_ptr<Layer> FcLayer::clone() const { return std::make_unique<FcLayer>(*this); }

SoftmaxXentResult softmax_xent(const Tensor& logits, std::span<const int> targets) {
    if (logits.rank() != 2) throw shape_error("softmax-xent: logits must be (batch, classes)");
    const std::size_t n = logits.shape()[0];
    const std::size_t k = logits.shape()[1];
    if (n == 0) throw shape_error("softmax-xent: empty batch");
    if (targets.size() != n) {
        throw shape_error("softmax-xent: got " + std::to_string(targets.size()) +
                          " targets for a batch of " + std::to_string(n));
    }
    SoftmaxXentResult res;
    res.grad_logits = Tensor(logits.shape());
    const double* z = logits.data();
    double* g = res.grad_logits.data();
    const double inv_n = 1.0 / static_cast<double>(n);
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const int t = targets[s];
        if (t < 0 || static_cast<std::size_t>(t) >= k) {
            throw data_error("softmax-xent: target " + std::to_string(t) +
                             " outside [0, " + std::to_string(k) + ")");
        }
        const double* zs = z + s * k;
        double* gs = g + s * k;
        double zmax = zs[0];
        for (std::size_t j = 1; j < k; ++j) zmax = std::max(zmax, zs[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < k; ++j) denom += std::exp(zs[j] - zmax);
        const double log_denom = std::log(denom);
        loss_sum += log_denom - (zs[static_cast<std::size_t>(t)] - zmax);
        for (std::size_t j = 0; j < k; ++j) {
            const double p = std::exp(zs[j] - zmax) / denom;
            gs[j] = (p - (j == static_cast<std::size_t>(t) ? 1.0 : 0.0)) * inv_n;
        }
    }
    res.loss = loss_sum * inv_n;
    return res;
}

}  // namespace ssimnet
