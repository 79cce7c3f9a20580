#include <benchmark/benchmark.h>

#include "fppformer/attention.hpp"
#include "fppformer/model.hpp"

using namespace fppformer;

namespace {

constexpr std::size_t kPatch = 6;

Tensor random_tensor(Shape shape, Rng& rng) {
  std::normal_distribution<double> n;
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = n(rng);
  return Tensor(std::move(shape), std::move(v));
}

void BM_ElementWiseAttention(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 32;
  Rng rng(1);
  auto params = AttentionBlockParams::init(d, 0.0, true, rng);
  Tensor x = random_tensor({len / kPatch, kPatch, d}, rng);
  NoGradGuard no_grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dm_element_wise_self_attention(x, params, {}).data().data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ElementWiseAttention)->Arg(96)->Arg(192)->Arg(384)->Arg(768)->Complexity();

void BM_PatchWiseAttention(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 32;
  Rng rng(2);
  auto params = AttentionBlockParams::init(kPatch * d, 0.0, true, rng);
  Tensor x = random_tensor({len / kPatch, kPatch * d}, rng);
  NoGradGuard no_grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(dm_patch_wise_self_attention(x, params, {}).data().data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PatchWiseAttention)->Arg(96)->Arg(192)->Arg(384)->Complexity();

void BM_ModelForward(benchmark::State& state) {
  ModelConfig c;
  c.input_len = static_cast<std::size_t>(state.range(0));
  c.pred_len = 96;
  c.embed_dim = static_cast<std::size_t>(state.range(1));
  Model m(c, 3);
  Rng rng(4);
  Tensor x = random_tensor({c.input_len}, rng);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(x).data().data());
}
BENCHMARK(BM_ModelForward)->Args({96, 8})->Args({96, 32})->Args({192, 32})->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  ModelConfig c;
  c.input_len = 96;
  c.pred_len = 48;
  c.embed_dim = 8;
  Model m(c, 5);
  Rng rng(6);
  const auto batch = static_cast<std::size_t>(state.range(0));
  Tensor x = random_tensor({batch, c.input_len}, rng);
  Tensor y = random_tensor({batch, c.pred_len}, rng);
  for (auto _ : state) {
    m.zero_grad();
    backward(forecast_loss(m.forward(x, {true, &rng, nullptr}), y));
  }
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
