#include "ssimnet/ssim.hpp"

#include <cmath>
#include <string>

namespace ssimnet {

SsimConstants SsimConstants::with_range(double dynamic_range) {
    if (dynamic_range <= 0.0) {
        throw config_error("ssim dynamic range must be positive");
    }
    SsimConstants k;
    k.c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
    k.c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
    k.c3 = k.c2 / 2.0;
    return k;
}

PatchStatistics patch_stats(std::span<const double> x, std::span<const double> y,
                            VarianceMode mode) {
    if (x.size() != y.size()) {
        throw shape_error("patch_stats: patch and filter lengths differ");
    }
    const std::size_t n = x.size();
    if (n < 2) {
        throw config_error("patch_stats: patches need at least 2 elements");
    }

    double sum_x = 0.0;
    double sum_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum_x += x[i];
        sum_y += y[i];
    }
    PatchStatistics s;
    s.n = n;
    s.mu_x = sum_x / static_cast<double>(n);
    s.mu_y = sum_y / static_cast<double>(n);

    double ss_x = 0.0;
    double ss_y = 0.0;
    double ss_xy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - s.mu_x;
        const double dy = y[i] - s.mu_y;
        ss_x += dx * dx;
        ss_y += dy * dy;
        ss_xy += dx * dy;
    }
    const double denom = (mode == VarianceMode::biased) ? static_cast<double>(n)
                                                        : static_cast<double>(n - 1);
    s.var_x = ss_x / denom;
    s.var_y = ss_y / denom;
    s.cov_xy = ss_xy / denom;
    return s;
}

SsimComponents ssim_components(const PatchStatistics& stats, const SsimConstants& k,
                               StructureForm form) {
    SsimComponents c;
    c.luminance = (2.0 * stats.mu_x * stats.mu_y + k.c1) /
                  (stats.mu_x * stats.mu_x + stats.mu_y * stats.mu_y + k.c1);
    const double sigma_x = std::sqrt(stats.var_x);
    const double sigma_y = std::sqrt(stats.var_y);
    c.contrast = (2.0 * sigma_x * sigma_y + k.c2) / (stats.var_x + stats.var_y + k.c2);
    const double cov_scale = (form == StructureForm::doubled_covariance) ? 2.0 : 1.0;
    c.structure = (cov_scale * stats.cov_xy + k.c3) / (sigma_x * sigma_y + k.c3);
    return c;
}

double ssim_from_components(const SsimComponents& components, const SsimConstants& k) {
    auto signed_pow = [](double base, double exponent) {
        if (exponent == 1.0) {
            return base;
        }
        // Negative structure terms with fractional exponents have no real
        // power; keep the sign and raise the magnitude.
        const double magnitude = std::pow(std::abs(base), exponent);
        return base < 0.0 ? -magnitude : magnitude;
    };
    return signed_pow(components.luminance, k.alpha) *
           signed_pow(components.contrast, k.beta) *
           signed_pow(components.structure, k.gamma);
}

double ssim_simplified(const PatchStatistics& stats, const SsimConstants& k) {
    const SsimGradTerms t = SsimGradTerms::from_stats(stats, k);
    return (t.a1 * t.a2) / (t.b1 * t.b2);
}

SsimGradTerms SsimGradTerms::from_stats(const PatchStatistics& stats, const SsimConstants& k) {
    SsimGradTerms t;
    t.a1 = 2.0 * stats.mu_x * stats.mu_y + k.c1;
    t.a2 = 2.0 * stats.cov_xy + k.c2;
    t.b1 = stats.mu_x * stats.mu_x + stats.mu_y * stats.mu_y + k.c1;
    t.b2 = stats.var_x + stats.var_y + k.c2;
    return t;
}

void ssim_closed_form_grad(std::span<const double> x, std::span<const double> y,
                           const PatchStatistics& stats, const SsimConstants& k,
                           std::span<double> grad_out) {
    const std::size_t n = x.size();
    if (y.size() != n || grad_out.size() != n || stats.n != n) {
        throw shape_error("ssim_closed_form_grad: length mismatch");
    }
    const SsimGradTerms t = SsimGradTerms::from_stats(stats, k);
    const double denom = static_cast<double>(n) * t.b1 * t.b1 * t.b2 * t.b2;
    const double scale = 2.0 / denom;
    // Gradient is affine in (x_i, y_i): coef_x * x_i + coef_y * y_i + offset.
    // Factor order matches between the two coefficients so that at y == x
    // (where a2 == b2 bitwise) they cancel exactly and the gradient is the
    // zero vector, not merely small.
    const double coef_x = scale * t.a1 * t.b1 * t.b2;
    const double coef_y = -(scale * t.a1 * t.b1 * t.a2);
    const double offset = scale * (t.b1 * t.b2 * (t.a2 - t.a1) * stats.mu_x +
                                   t.a1 * t.a2 * (t.b1 - t.b2) * stats.mu_y);
    for (std::size_t i = 0; i < n; ++i) {
        grad_out[i] = coef_x * x[i] + coef_y * y[i] + offset;
    }
}

Tensor ssim_closed_form_grad(const Tensor& x, const Tensor& y,
                             const PatchStatistics& stats, const SsimConstants& k) {
    Tensor grad(std::vector<std::size_t>{x.size()});
    ssim_closed_form_grad(x.values(), y.values(), stats, k, grad.values());
    return grad;
}

}  // namespace ssimnet
