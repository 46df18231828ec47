#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <vector>

#include "gradcheck.hpp"
#include "ssimnet/model.hpp"
#include "ssimnet/ssim_layer.hpp"

using namespace ssimnet;

namespace {

ModelSpec tiny_stack() {
    ModelSpec spec;
    spec.name = "tiny";
    spec.layers = {LayerSpec::ssim(4, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool(),
                   LayerSpec::conv(6, 3, 1, 1), LayerSpec::relu(), LayerSpec::maxpool(),
                   LayerSpec::fc(10), LayerSpec::softmax_xent()};
    return spec;
}

}  // namespace

TEST_CASE("seed derivation is deterministic and salt-sensitive") {
    CHECK(derive_seed(1, 0) == derive_seed(1, 0));
    std::set<std::uint64_t> seen;
    for (std::uint64_t salt = 0; salt < 64; ++salt) seen.insert(derive_seed(42, salt));
    CHECK(seen.size() == 64);
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("shape validation walks the stack") {
    const Shape4 in = Shape4::of(1, 3, 32, 32);
    const Shape4 out = validate_model(tiny_stack(), in);
    CHECK(out == Shape4::of(1, 10, 1, 1));

    SUBCASE("empty model") {
        ModelSpec spec;
        spec.name = "empty";
        CHECK_THROWS_AS(validate_model(spec, in), config_error);
    }
    SUBCASE("loss marker must be terminal") {
        ModelSpec spec = tiny_stack();
        std::swap(spec.layers[6], spec.layers[7]);
        CHECK_THROWS_AS(validate_model(spec, in), config_error);
    }
    SUBCASE("nothing but classifiers after fc") {
        ModelSpec spec = tiny_stack();
        spec.layers.insert(spec.layers.end() - 1, LayerSpec::relu());
        CHECK_THROWS_AS(validate_model(spec, in), config_error);
    }
    SUBCASE("the stack must end in a classifier") {
        ModelSpec spec;
        spec.name = "headless";
        spec.layers = {LayerSpec::conv(4, 3, 1, 1), LayerSpec::relu()};
        CHECK_THROWS_AS(validate_model(spec, in), config_error);
    }
    SUBCASE("oversized pooling window") {
        ModelSpec spec;
        spec.name = "bigpool";
        spec.layers = {LayerSpec::maxpool(64, 64), LayerSpec::fc(10)};
        CHECK_THROWS_AS(validate_model(spec, in), config_error);
    }
    SUBCASE("non-integral striding") {
        ModelSpec spec;
        spec.name = "badstride";
        spec.layers = {LayerSpec::conv(4, 4, 3, 0), LayerSpec::fc(10)};
        // (32 - 4) = 28 is not divisible by 3.
        CHECK_THROWS_AS(validate_model(spec, in), config_error);
    }
}

TEST_CASE("parameter names carry the layer index and kind") {
    Model model(tiny_stack(), Shape4::of(1, 3, 32, 32), 7);
    const auto params = model.params();
    REQUIRE(params.size() == 5);  // ssim filters, conv w+b, fc w+b
    CHECK(params[0].name == "layer0.ssim.filters");
    CHECK(params[1].name == "layer3.conv.weights");
    CHECK(params[2].name == "layer3.conv.bias");
    CHECK(params[3].name == "layer6.fc.weights");
    CHECK(params[4].name == "layer6.fc.bias");
    CHECK(model.layer_count() == 7);  // the loss marker is not executable
    CHECK(model.output_shape() == Shape4::of(1, 10, 1, 1));
}

TEST_CASE("construction is deterministic in the seed and batch size is free") {
    const ModelSpec spec = tiny_stack();
    Model a(spec, Shape4::of(8, 3, 32, 32), 11);
    Model b(spec, Shape4::of(1, 3, 32, 32), 11);
    const Tensor x = Tensor::randn({2, 3, 32, 32}, 12);
    const Tensor ya = a.forward(x, false);
    const Tensor yb = b.forward(x, false);
    CHECK(ya == yb);
    CHECK(ya.shape() == std::vector<std::size_t>{2, 10});

    Model c(spec, Shape4::of(1, 3, 32, 32), 13);
    CHECK(c.forward(x, false) != ya);

    CHECK_THROWS_AS(a.forward(Tensor::randn({1, 1, 32, 32}, 14), false), shape_error);
}

TEST_CASE("copies are deep and parameter sync requires matching specs") {
    const ModelSpec spec = tiny_stack();
    Model a(spec, Shape4::of(1, 3, 32, 32), 21);
    Model b(a);
    const Tensor x = Tensor::randn({1, 3, 32, 32}, 22);
    CHECK(a.forward(x, false) == b.forward(x, false));

    // Perturb a, then pull its values back into b.
    a.params()[0].value->fill(0.5);
    CHECK(a.forward(x, false) != b.forward(x, false));
    b.copy_params_from(a);
    CHECK(a.forward(x, false) == b.forward(x, false));

    ModelSpec other = tiny_stack();
    other.layers[0] = LayerSpec::ssim(5, 3, 1, 1);
    Model c(other, Shape4::of(1, 3, 32, 32), 23);
    CHECK_THROWS_AS(c.copy_params_from(a), state_error);
}

TEST_CASE("zero_grads clears every accumulator") {
    Model model(tiny_stack(), Shape4::of(1, 3, 32, 32), 31);
    const Tensor x = Tensor::randn({1, 3, 32, 32}, 32);
    const Tensor logits = model.forward(x, true);
    std::vector<int> target{3};
    const auto sm = softmax_xent(logits, target);
    model.backward(sm.grad_logits);

    bool any_nonzero = false;
    for (const auto& p : model.params()) {
        for (std::size_t i = 0; i < p.grad->size(); ++i) any_nonzero |= (*p.grad)[i] != 0.0;
    }
    CHECK(any_nonzero);
    model.zero_grads();
    for (const auto& p : model.params()) {
        for (std::size_t i = 0; i < p.grad->size(); ++i) CHECK((*p.grad)[i] == 0.0);
    }
}

TEST_CASE("whole-model gradients match finite differences") {
    // Small enough to difference every parameter: ssim -> fc on an 8x8 input.
    ModelSpec spec;
    spec.name = "probe";
    spec.layers = {LayerSpec::ssim(2, 3, 1, 1), LayerSpec::fc(4), LayerSpec::softmax_xent()};
    Model model(spec, Shape4::of(1, 1, 8, 8), 41);
    Tensor x = Tensor::randn({1, 1, 8, 8}, 42);
    std::vector<int> target{1};

    auto loss_of = [&] { return softmax_xent(model.forward(x, false), target).loss; };

    model.zero_grads();
    const auto sm = softmax_xent(model.forward(x, true), target);
    const Tensor grad_in = model.backward(sm.grad_logits);

    double worst = 0.0;
    for (const auto& p : model.params()) {
        const auto fd = gradcheck::fd_gradient(p.value->data(), p.value->size(), loss_of);
        worst = std::max(worst, gradcheck::max_rel_error(p.grad->values(), fd));
    }
    const auto fd_x = gradcheck::fd_gradient(x.data(), x.size(), loss_of);
    worst = std::max(worst, gradcheck::max_rel_error(grad_in.values(), fd_x));
    CHECK(worst < 1e-5);
}
