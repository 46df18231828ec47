#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gradcheck.hpp"
#include "ssimnet/ssim.hpp"

using namespace ssimnet;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& gen, double mean = 0.0,
                               double sd = 1.0) {
    std::normal_distribution<double> dist(mean, sd);
    std::vector<double> v(n);
    for (double& x : v) x = dist(gen);
    return v;
}

double ssim_of(std::span<const double> x, std::span<const double> y, const SsimConstants& k) {
    return ssim_simplified(patch_stats(x, y, VarianceMode::biased), k);
}

}  // namespace

TEST_CASE("patch statistics match hand-computed moments") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> y{4.0, 3.0, 2.0, 1.0};

    const PatchStatistics biased = patch_stats(x, y, VarianceMode::biased);
    CHECK(biased.n == 4);
    CHECK(biased.mu_x == 2.5);
    CHECK(biased.mu_y == 2.5);
    CHECK(biased.var_x == 1.25);  // (2.25+0.25+0.25+2.25)/4
    CHECK(biased.var_y == 1.25);
    CHECK(biased.cov_xy == -1.25);

    const PatchStatistics unbiased = patch_stats(x, y, VarianceMode::unbiased);
    CHECK(unbiased.var_x == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
    CHECK(unbiased.var_y == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
    CHECK(unbiased.cov_xy == doctest::Approx(-5.0 / 3.0).epsilon(1e-15));

    const std::vector<double> shorter{1.0, 2.0};
    CHECK_THROWS_AS(patch_stats(x, shorter, VarianceMode::biased), shape_error);
    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(patch_stats(one, one, VarianceMode::biased), config_error);
}

TEST_CASE("default constants follow the (0.01 L)^2 / (0.03 L)^2 convention") {
    const SsimConstants k = SsimConstants::defaults();
    CHECK(k.c1 == 1e-4);
    CHECK(k.c2 == 9e-4);
    CHECK(k.c3 == 4.5e-4);
    CHECK(k.alpha == 1.0);
    CHECK(k.beta == 1.0);
    CHECK(k.gamma == 1.0);

    const SsimConstants wide = SsimConstants::with_range(255.0);
    CHECK(wide.c1 == doctest::Approx(6.5025).epsilon(1e-12));
    CHECK(wide.c2 == doctest::Approx(58.5225).epsilon(1e-12));
    CHECK(wide.c3 == doctest::Approx(29.26125).epsilon(1e-12));
    CHECK_THROWS_AS(SsimConstants::with_range(0.0), config_error);
    CHECK_THROWS_AS(SsimConstants::with_range(-1.0), config_error);
}

TEST_CASE("identical signals score exactly 1") {
    std::mt19937_64 gen(99);
    const SsimConstants k = SsimConstants::defaults();
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = random_vec(9 + 2 * trial % 30, gen, trial * 0.1, 0.5 + trial * 0.05);
        CHECK(ssim_of(x, x, k) == 1.0);
    }
}

TEST_CASE("the similarity is symmetric in its arguments") {
    std::mt19937_64 gen(123);
    const SsimConstants k = SsimConstants::defaults();
    for (int trial = 0; trial < 200; ++trial) {
        const auto x = random_vec(25, gen);
        const auto y = random_vec(25, gen, 0.3);
        CHECK(ssim_of(x, y, k) == ssim_of(y, x, k));
    }
}

TEST_CASE("random pairs stay inside [-1, 1]") {
    std::mt19937_64 gen(2024);
    const SsimConstants k = SsimConstants::defaults();
    double lo = 1.0, hi = -1.0;
    for (int trial = 0; trial < 5000; ++trial) {
        const std::size_t n = (trial % 3 == 0) ? 9 : (trial % 3 == 1 ? 25 : 75);
        const auto x = random_vec(n, gen, (trial % 7) * 0.2, 0.3 + (trial % 5) * 0.4);
        const auto y = random_vec(n, gen, (trial % 3) * -0.4, 0.2 + (trial % 4) * 0.5);
        const double v = ssim_of(x, y, k);
        CHECK(std::abs(v) <= 1.0);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(hi <= 1.0);
    CHECK(lo >= -1.0);
}

TEST_CASE("a mean-preserving reversal approaches -1 as the constants shrink") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> y{4.0, 3.0, 2.0, 1.0};  // same mean, anti-correlated

    // Defaults: luminance is exactly 1 (equal means), structure is
    // (2 cov + c2)/(2 var + c2) = (-2.5 + 9e-4)/(2.5 + 9e-4).
    const double v = ssim_of(x, y, SsimConstants::defaults());
    CHECK(v == doctest::Approx((-2.5 + 9e-4) / (2.5 + 9e-4)).epsilon(1e-12));
    CHECK(v < -0.999);

    SsimConstants tiny;
    tiny.c1 = 1e-12;
    tiny.c2 = 1e-12;
    tiny.c3 = 5e-13;
    CHECK(ssim_of(x, y, tiny) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("component form agrees with the textbook factorization") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> y{2.0, 2.5, 3.5, 5.0};
    const SsimConstants k = SsimConstants::defaults();
    const PatchStatistics st = patch_stats(x, y, VarianceMode::unbiased);

    const SsimComponents c = ssim_components(st, k, StructureForm::standard);
    const double sx = std::sqrt(st.var_x), sy = std::sqrt(st.var_y);
    CHECK(c.luminance ==
          doctest::Approx((2 * st.mu_x * st.mu_y + k.c1) /
                          (st.mu_x * st.mu_x + st.mu_y * st.mu_y + k.c1)).epsilon(1e-15));
    CHECK(c.contrast ==
          doctest::Approx((2 * sx * sy + k.c2) / (st.var_x + st.var_y + k.c2)).epsilon(1e-15));
    CHECK(c.structure ==
          doctest::Approx((st.cov_xy + k.c3) / (sx * sy + k.c3)).epsilon(1e-15));
    CHECK(ssim_from_components(c, k) ==
          doctest::Approx(c.luminance * c.contrast * c.structure).epsilon(1e-15));
}

TEST_CASE("identical signals have unit components; the doubled form overshoots") {
    const std::vector<double> x{0.2, 0.5, 0.9, 0.4};
    const SsimConstants k = SsimConstants::defaults();
    const PatchStatistics st = patch_stats(x, x, VarianceMode::biased);

    const SsimComponents std_form = ssim_components(st, k, StructureForm::standard);
    CHECK(std_form.luminance == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std_form.contrast == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std_form.structure == doctest::Approx(1.0).epsilon(1e-9));

    // Keeping the factor 2 on the covariance pushes s(x,x) toward 2,
    // which is why the simplified product does not use this form.
    const SsimComponents doubled = ssim_components(st, k, StructureForm::doubled_covariance);
    CHECK(doubled.structure > 1.5);
}

TEST_CASE("fractional exponents keep the sign of a negative structure term") {
    SsimComponents c;
    c.luminance = 1.0;
    c.contrast = 1.0;
    c.structure = -0.5;
    SsimConstants k = SsimConstants::defaults();
    k.gamma = 0.5;
    CHECK(ssim_from_components(c, k) == doctest::Approx(-std::sqrt(0.5)).epsilon(1e-15));
}

TEST_CASE("grouped gradient terms match their definitions") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> y{4.0, 3.0, 2.0, 1.0};
    const SsimConstants k = SsimConstants::defaults();
    const PatchStatistics st = patch_stats(x, y, VarianceMode::biased);
    const SsimGradTerms t = SsimGradTerms::from_stats(st, k);
    CHECK(t.a1 == 2.0 * 2.5 * 2.5 + 1e-4);
    CHECK(t.a2 == 2.0 * -1.25 + 9e-4);
    CHECK(t.b1 == 2.5 * 2.5 + 2.5 * 2.5 + 1e-4);
    CHECK(t.b2 == 1.25 + 1.25 + 9e-4);
}

TEST_CASE("closed-form gradient matches central differences in both arguments") {
    std::mt19937_64 gen(31337);
    const SsimConstants k = SsimConstants::defaults();
    double worst = 0.0;
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = (trial % 3 == 0) ? 9 : (trial % 3 == 1 ? 25 : 75);
        auto x = random_vec(n, gen, (trial % 5) * 0.15, 0.4 + (trial % 3) * 0.3);
        auto y = random_vec(n, gen, (trial % 4) * -0.2, 0.3 + (trial % 5) * 0.25);

        // d/dy: the gradient is taken wrt the second argument.
        std::vector<double> grad_y(n);
        ssim_closed_form_grad(x, y, patch_stats(x, y, VarianceMode::biased), k, grad_y);
        const auto fd_y = gradcheck::fd_gradient(y, [&] { return ssim_of(x, y, k); });
        worst = std::max(worst, gradcheck::max_rel_error(grad_y, fd_y));

        // d/dx by swapping the roles of the arguments.
        std::vector<double> grad_x(n);
        ssim_closed_form_grad(y, x, patch_stats(y, x, VarianceMode::biased), k, grad_x);
        const auto fd_x = gradcheck::fd_gradient(x, [&] { return ssim_of(x, y, k); });
        worst = std::max(worst, gradcheck::max_rel_error(grad_x, fd_x));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("the gradient at y = x is exactly zero") {
    std::mt19937_64 gen(555);
    const SsimConstants k = SsimConstants::defaults();
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = random_vec(25, gen, trial * 0.1, 0.8);
        std::vector<double> grad(25);
        ssim_closed_form_grad(x, x, patch_stats(x, x, VarianceMode::biased), k, grad);
        for (double g : grad) CHECK(g == 0.0);
    }
}

TEST_CASE("gradient length mismatches are rejected") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> y{4.0, 3.0, 2.0, 1.0};
    const SsimConstants k = SsimConstants::defaults();
    const PatchStatistics st = patch_stats(x, y, VarianceMode::biased);

    std::vector<double> wrong(3);
    CHECK_THROWS_AS(ssim_closed_form_grad(x, y, st, k, wrong), shape_error);

    PatchStatistics bad = st;
    bad.n = 5;
    std::vector<double> grad(4);
    CHECK_THROWS_AS(ssim_closed_form_grad(x, y, bad, k, grad), shape_error);
}

TEST_CASE("tensor overload returns the same gradient") {
    const Tensor x = Tensor::randn({16}, 8);
    const Tensor y = Tensor::randn({16}, 9);
    const SsimConstants k = SsimConstants::defaults();
    const PatchStatistics st = patch_stats(x.values(), y.values(), VarianceMode::biased);

    const Tensor g = ssim_closed_form_grad(x, y, st, k);
    std::vector<double> g2(16);
    ssim_closed_form_grad(x.values(), y.values(), st, k, g2);
    for (std::size_t i = 0; i < 16; ++i) CHECK(g[i] == g2[i]);
}
