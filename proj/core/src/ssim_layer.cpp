#include "ssimnet/ssim_layer.hpp"

#include <algorithm>
#include <string>

#include "im2col.hpp"
#include "ssimnet/error.hpp"

namespace ssimnet {

namespace {

detail::ConvGeometry geometry_for(const LayerSpec& spec, const Shape4& in) {
    return detail::ConvGeometry::compute(in.c, in.h, in.w, spec.kernel_h, spec.kernel_w,
                                         spec.stride, spec.padding);
}

}  // namespace

SsimLayer::SsimLayer(const LayerSpec& spec, std::size_t in_channels, std::uint64_t seed,
                     const SsimConstants& constants)
    : spec_(spec), in_channels_(in_channels), constants_(constants) {
    spec_.validate();
    if (spec_.kind != LayerKind::ssim) throw config_error("SsimLayer needs an ssim spec");
    if (in_channels == 0) throw config_error("ssim layer: in_channels must be positive");
    const std::size_t np = in_channels * spec_.kernel_h * spec_.kernel_w;
    if (np < 2) throw config_error("ssim layer: patch length must be at least 2");
    filters_ = Tensor::randn({spec_.out_channels, np}, seed);
    grad_filters_ = Tensor::zeros(filters_.shape());
}

std::size_t SsimLayer::patch_len() const {
    return in_channels_ * spec_.kernel_h * spec_.kernel_w;
}

Tensor SsimLayer::forward(const Tensor& input, bool cache) {
    const Shape4 in = Shape4::from_tensor(input);
    if (in.c != in_channels_) {
        throw shape_error("ssim layer: expected " + std::to_string(in_channels_) +
                          " input channels, got " + std::to_string(in.c));
    }
    const auto g = geometry_for(spec_, in);
    const std::size_t F = spec_.out_channels;
    const std::size_t np = g.patch_len();
    const std::size_t pos = g.positions();
    const double inv_np = 1.0 / static_cast<double>(np);

    // Filter statistics depend only on the parameters, not the input.
    std::vector<double> mu_y(F), var_y(F);
    for (std::size_t f = 0; f < F; ++f) {
        const double* y = filters_.data() + f * np;
        double sum = 0.0;
        for (std::size_t i = 0; i < np; ++i) sum += y[i];
        const double mu = sum * inv_np;
        double ss = 0.0;
        for (std::size_t i = 0; i < np; ++i) {
            const double d = y[i] - mu;
            ss += d * d;
        }
        mu_y[f] = mu;
        var_y[f] = ss * inv_np;
    }

    Tensor out({in.n, F, g.out_h, g.out_w});
    std::vector<double> col(pos * np);
    std::vector<double> mu_x(cache ? in.n * pos : pos);
    std::vector<double> var_x(cache ? in.n * pos : pos);
    std::vector<double> cov(cache ? in.n * pos * F : 0);

    for (std::size_t n = 0; n < in.n; ++n) {
        detail::im2col(input.data() + n * in.c * in.h * in.w, g, col.data());
        double* mu_xs = mu_x.data() + (cache ? n * pos : 0);
        double* var_xs = var_x.data() + (cache ? n * pos : 0);
        for (std::size_t p = 0; p < pos; ++p) {
            const double* x = col.data() + p * np;
            double sum = 0.0;
            for (std::size_t i = 0; i < np; ++i) sum += x[i];
            const double mu = sum * inv_np;
            double ss = 0.0;
            for (std::size_t i = 0; i < np; ++i) {
                const double d = x[i] - mu;
                ss += d * d;
            }
            mu_xs[p] = mu;
            var_xs[p] = ss * inv_np;
        }
        double* out_img = out.data() + n * F * pos;
        for (std::size_t f = 0; f < F; ++f) {
            const double* y = filters_.data() + f * np;
            const double myf = mu_y[f];
            double* of = out_img + f * pos;
            for (std::size_t p = 0; p < pos; ++p) {
                const double* x = col.data() + p * np;
                const double mx = mu_xs[p];
                double sxy = 0.0;
                for (std::size_t i = 0; i < np; ++i) sxy += (x[i] - mx) * (y[i] - myf);
                const double c = sxy * inv_np;
                const PatchStatistics st{.mu_x = mx,
                                         .mu_y = myf,
                                         .var_x = var_xs[p],
                                         .var_y = var_y[f],
                                         .cov_xy = c,
                                         .n = np};
                of[p] = ssim_simplified(st, constants_);
                if (cache) cov[(n * pos + p) * F + f] = c;
            }
        }
    }

    if (cache) {
        cached_input_ = input;
        cached_mu_x_ = std::move(mu_x);
        cached_var_x_ = std::move(var_x);
        cached_mu_y_ = std::move(mu_y);
        cached_var_y_ = std::move(var_y);
        cached_cov_ = std::move(cov);
        has_cache_ = true;
    }
    return out;
}

Tensor SsimLayer::backward(const Tensor& grad_out) {
    if (!has_cache_) throw state_error("ssim layer: backward called without a cached forward");
    const Shape4 in = Shape4::from_tensor(cached_input_);
    const auto g = geometry_for(spec_, in);
    const std::size_t F = spec_.out_channels;
    const std::size_t np = g.patch_len();
    const std::size_t pos = g.positions();
    const Shape4 go = Shape4::from_tensor(grad_out);
    if (go.n != in.n || go.c != F || go.h != g.out_h || go.w != g.out_w) {
        throw shape_error("ssim layer: grad_out shape does not match the cached forward");
    }
    const double dn = static_cast<double>(np);

    Tensor grad_in(cached_input_.shape());
    std::vector<double> col(pos * np);
    std::vector<double> gcol(pos * np);
    double* gfilters = grad_filters_.data();
    for (std::size_t n = 0; n < in.n; ++n) {
        detail::im2col(cached_input_.data() + n * in.c * in.h * in.w, g, col.data());
        std::fill(gcol.begin(), gcol.end(), 0.0);
        const double* go_img = grad_out.data() + n * F * pos;
        for (std::size_t p = 0; p < pos; ++p) {
            const double* x = col.data() + p * np;
            double* gx = gcol.data() + p * np;
            const double mx = cached_mu_x_[n * pos + p];
            const double vx = cached_var_x_[n * pos + p];
            for (std::size_t f = 0; f < F; ++f) {
                const double gval = go_img[f * pos + p];
                if (gval == 0.0) continue;
                const double* y = filters_.data() + f * np;
                double* gy = gfilters + f * np;
                const PatchStatistics st{.mu_x = mx,
                                         .mu_y = cached_mu_y_[f],
                                         .var_x = vx,
                                         .var_y = cached_var_y_[f],
                                         .cov_xy = cached_cov_[(n * pos + p) * F + f],
                                         .n = np};
                const auto t = SsimGradTerms::from_stats(st, constants_);
                const double scale = 2.0 / (dn * t.b1 * t.b1 * t.b2 * t.b2);
                // Affine form of the analytic gradient: the derivative wrt
                // either vector is cx*(other) + cy*(self) + offset, with the
                // offset's means swapped between the two directions.
                const double cx = scale * t.a1 * t.b1 * t.b2;
                const double cy = -(scale * t.a1 * t.b1 * t.a2);
                const double mean_term_x = scale * t.b1 * t.b2 * (t.a2 - t.a1);
                const double mean_term_y = scale * t.a1 * t.a2 * (t.b1 - t.b2);
                const double off_y = mean_term_x * st.mu_x + mean_term_y * st.mu_y;
                const double off_x = mean_term_x * st.mu_y + mean_term_y * st.mu_x;
                const double gcx = gval * cx;
                const double gcy = gval * cy;
                const double goff_y = gval * off_y;
                const double goff_x = gval * off_x;
                for (std::size_t i = 0; i < np; ++i) {
                    gy[i] += gcx * x[i] + gcy * y[i] + goff_y;
                    gx[i] += gcx * y[i] + gcy * x[i] + goff_x;
                }
            }
        }
        detail::col2im_add(gcol.data(), g, grad_in.data() + n * in.c * in.h * in.w);
    }

    cached_input_ = Tensor();
    cached_mu_x_.clear();
    cached_var_x_.clear();
    cached_mu_y_.clear();
    cached_var_y_.clear();
    cached_cov_.clear();
    has_cache_ = false;
    return grad_in;
}

void SsimLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".filters", &filters_, &grad_filters_, true});
}

std::unique_ptr<Layer> SsimLayer::clone() const { return std::make_unique<SsimLayer>(*this); }

}  // namespace ssimnet
