#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ssimnet/tensor.hpp"

namespace ssimnet {

// Stability constants and component exponents of the structural
// similarity index. Defaults are the conventional (0.01*L)^2 / (0.03*L)^2
// choice over unit dynamic range L = 1, with c3 = c2 / 2 and all
// exponents 1.
struct SsimConstants {
    double c1 = 1e-4;
    double c2 = 9e-4;
    double c3 = 4.5e-4;
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 1.0;

    static SsimConstants defaults() { return SsimConstants{}; }
    static SsimConstants with_range(double dynamic_range);

    bool operator==(const SsimConstants&) const = default;
};

// Denominator convention for sample variance and covariance.
// `biased` (1/N) is the canonical mode: under it the closed-form filter
// gradient is the exact derivative of the implemented forward.
// `unbiased` (1/(N-1)) matches the textbook component definitions and is
// kept for inspection and tests.
enum class VarianceMode { biased, unbiased };

// First and second moments of one aligned patch/filter pair.
struct PatchStatistics {
    double mu_x = 0.0;
    double mu_y = 0.0;
    double var_x = 0.0;
    double var_y = 0.0;
    double cov_xy = 0.0;
    std::size_t n = 0;
};

PatchStatistics patch_stats(std::span<const double> x, std::span<const double> y,
                            VarianceMode mode);

// Form of the structure comparison term. `doubled_covariance` keeps the
// factor 2 on the covariance, which makes s(x,x) exceed 1 and is not
// consistent with the simplified product; `standard` drops it. The
// simplified forward below is authoritative either way.
enum class StructureForm { standard, doubled_covariance };

struct SsimComponents {
    double luminance = 0.0;
    double contrast = 0.0;
    double structure = 0.0;
};

// Luminance, contrast and structure comparisons. Evaluation/inspection
// path only; training always goes through ssim_simplified.
SsimComponents ssim_components(const PatchStatistics& stats, const SsimConstants& k,
                               StructureForm form = StructureForm::standard);

// l^alpha * c^beta * s^gamma.
double ssim_from_components(const SsimComponents& components, const SsimConstants& k);

// Canonical activation:
//   (2 mu_x mu_y + C1)(2 cov_xy + C2)
//   ---------------------------------
//   (mu_x^2 + mu_y^2 + C1)(var_x + var_y + C2)
// Equals 1 exactly when x == y and lies in [-1, 1] for finite inputs.
double ssim_simplified(const PatchStatistics& stats, const SsimConstants& k);

// The four grouped terms the closed-form gradient is written in.
struct SsimGradTerms {
    double a1 = 0.0;  // 2 mu_x mu_y + C1
    double a2 = 0.0;  // 2 cov_xy + C2
    double b1 = 0.0;  // mu_x^2 + mu_y^2 + C1
    double b2 = 0.0;  // var_x + var_y + C2

    static SsimGradTerms from_stats(const PatchStatistics& stats, const SsimConstants& k);
};

// Analytic d SSIM / d y for one patch/filter pair:
//
//   2 [ A1 B1 (B2 x - A2 y) + B1 B2 (A2 - A1) mu_x 1 + A1 A2 (B1 - B2) mu_y 1 ]
//   ---------------------------------------------------------------------------
//                                N B1^2 B2^2
//
// Exact for biased-mode statistics; `stats` must have been computed in
// that mode over the same (x, y).
void ssim_closed_form_grad(std::span<const double> x, std::span<const double> y,
                           const PatchStatistics& stats, const SsimConstants& k,
                           std::span<double> grad_out);

Tensor ssim_closed_form_grad(const Tensor& x, const Tensor& y,
                             const PatchStatistics& stats, const SsimConstants& k);

}  // namespace ssimnet
