#include <benchmark/benchmark.h>

#include "lvsr/conv.hpp"
#include "lvsr/cost_model.hpp"
#include "lvsr/ghost.hpp"
#include "lvsr/random.hpp"

using namespace lvsr;

namespace {

Tensor<float> random_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(numel(shape));
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return {std::move(shape), std::move(v)};
}

// Arg(0) = channels, Arg(1) = spatial size.
void BM_Conv2d(benchmark::State& state, ConvAlgo algo) {
  const auto c = static_cast<std::size_t>(state.range(0)), s = static_cast<std::size_t>(state.range(1));
  const auto desc = conv2d(c, c, 3, 3);
  const auto x = random_tensor({1, c, s, s}, 1);
  const auto w = random_tensor(desc.weight_shape(), 2);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv(x, desc, w, Tensor<float>{}, algo));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c * c * 9 * s * s));
}
BENCHMARK_CAPTURE(BM_Conv2d, direct, ConvAlgo::kDirect)->Args({16, 32})->Args({64, 16});
BENCHMARK_CAPTURE(BM_Conv2d, im2col, ConvAlgo::kIm2col)->Args({16, 32})->Args({64, 16});

void BM_CausalConv1d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto desc = conv1d(c, c, 3, 4);
  const auto x = random_tensor({4, c, 29}, 3);
  const auto w = random_tensor(desc.weight_shape(), 4);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv(x, desc, w, Tensor<float>{}));
}
BENCHMARK(BM_CausalConv1d)->Arg(64)->Arg(256);

void BM_GhostForward(benchmark::State& state) {
  GhostConfig cfg;
  cfg.in_channels = 32;
  cfg.out_channels = 64;
  Rng rng(5);
  GhostModule<float> ghost(cfg, rng);
  const auto x = random_tensor({2, 32, 16, 16}, 6);
  ForwardContext ctx;
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ghost.forward(x, ctx));
}
BENCHMARK(BM_GhostForward);

// The analytic counter must stay cheap enough to sweep whole tables interactively.
void BM_CountFullModel(benchmark::State& state) {
  ModelSpec spec;
  spec.seq_model = SeqModel::kDCTCN;
  for (auto _ : state) benchmark::DoNotOptimize(count_model(spec));
}
BENCHMARK(BM_CountFullModel);

}  // namespace
BENCHMARK_MAIN();
