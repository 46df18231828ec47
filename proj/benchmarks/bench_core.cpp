#include <benchmark/benchmark.h>

#include <vector>

#include "ssimnet/adversarial.hpp"
#include "ssimnet/layers.hpp"
#include "ssimnet/model.hpp"
#include "ssimnet/ssim.hpp"
#include "ssimnet/ssim_layer.hpp"
#include "ssimnet/tensor.hpp"

using namespace ssimnet;

namespace {

void bm_patch_stats(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const Tensor x = Tensor::randn({n}, 1);
    const Tensor y = Tensor::randn({n}, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(patch_stats(x.values(), y.values(), VarianceMode::biased));
    }
}
BENCHMARK(bm_patch_stats)->Arg(9)->Arg(75);

void bm_ssim_grad(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const Tensor x = Tensor::randn({n}, 1);
    const Tensor y = Tensor::randn({n}, 2);
    const SsimConstants k = SsimConstants::defaults();
    const PatchStatistics stats = patch_stats(x.values(), y.values(), VarianceMode::biased);
    std::vector<double> grad(n);
    for (auto _ : state) {
        ssim_closed_form_grad(x.values(), y.values(), stats, k, grad);
        benchmark::DoNotOptimize(grad.data());
    }
}
BENCHMARK(bm_ssim_grad)->Arg(9)->Arg(75);

// First layer of the shallow stacks on one CIFAR image: 32 filters, 7x7
// window, stride 1, pad 3.
void bm_ssim_layer_forward(benchmark::State& state) {
    SsimLayer layer(LayerSpec::ssim(32, 7, 1, 3), 3, 5);
    const Tensor x = Tensor::randn({1, 3, 32, 32}, 6);
    for (auto _ : state) {
        benchmark::DoNotOptimize(layer.forward(x, false));
    }
}
BENCHMARK(bm_ssim_layer_forward);

void bm_ssim_layer_backward(benchmark::State& state) {
    SsimLayer layer(LayerSpec::ssim(32, 7, 1, 3), 3, 5);
    const Tensor x = Tensor::randn({1, 3, 32, 32}, 6);
    const Tensor grad = Tensor::randn({1, 32, 32, 32}, 7);
    for (auto _ : state) {
        layer.forward(x, true);
        benchmark::DoNotOptimize(layer.backward(grad));
    }
}
BENCHMARK(bm_ssim_layer_backward);

void bm_conv_layer_forward(benchmark::State& state) {
    Conv2dLayer layer(LayerSpec::conv(32, 7, 1, 3), 3, 5);
    const Tensor x = Tensor::randn({1, 3, 32, 32}, 6);
    for (auto _ : state) {
        benchmark::DoNotOptimize(layer.forward(x, false));
    }
}
BENCHMARK(bm_conv_layer_forward);

void bm_fgsm_batch(benchmark::State& state) {
    ModelSpec spec;
    spec.name = "bench";
    spec.layers = {LayerSpec::conv(8, 3, 1, 1), LayerSpec::relu(), LayerSpec::fc(10),
                   LayerSpec::softmax_xent()};
    Model model(spec, Shape4::of(1, 3, 16, 16), 8);
    const Tensor x = Tensor::randn({8, 3, 16, 16}, 9);
    std::vector<int> targets(8);
    for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = static_cast<int>(i % 10);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fgsm(model, x, targets, 0.01));
    }
}
BENCHMARK(bm_fgsm_batch);

}  // namespace

BENCHMARK_MAIN();
