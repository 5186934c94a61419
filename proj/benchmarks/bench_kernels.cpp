#include <benchmark/benchmark.h>

#include "pipesim/nn.hpp"
#include "pipesim/partition.hpp"
#include "pipesim/rng.hpp"
#include "pipesim/tensor.hpp"

using namespace pipesim;

namespace {

Tensor filled(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = filled({n, n}, rng);
  const Tensor b = filled({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(32, 256);

void BM_ForwardBackward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  const ModelSpec spec = ModelSpec::stacked(width, {width, width, width}, 10, Activation::relu);
  Rng rng(2);
  const Params p = init_params(spec, rng);
  const Tensor x = filled({128, width}, rng);
  Tensor y({128});
  for (std::size_t i = 0; i < 128; ++i) y[i] = static_cast<double>(i % 10);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(spec, p, x, y));
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(256);

void BM_BalancePartition(benchmark::State& state) {
  Rng rng(3);
  std::vector<double> costs(static_cast<std::size_t>(state.range(0)));
  for (double& c : costs) c = rng.uniform(1.0, 100.0);
  for (auto _ : state) benchmark::DoNotOptimize(balance_costs(costs, 8));
}
BENCHMARK(BM_BalancePartition)->Arg(32)->Arg(256);

}  // namespace
