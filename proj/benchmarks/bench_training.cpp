#include <benchmark/benchmark.h>

#include "pipesim/data.hpp"
#include "pipesim/executor.hpp"
#include "pipesim/partition.hpp"

using namespace pipesim;

namespace {

// Simulated cost of 50 training steps per strategy on a small blobs task.
void BM_Strategy(benchmark::State& state) {
  const auto strategy = static_cast<Strategy>(state.range(0));
  const Dataset data = make_blobs({.seed = 1, .n = 1024, .dim = 16, .classes = 4, .noise = 0.6});
  const ModelSpec spec = ModelSpec::stacked(16, {64, 64, 64}, 4, Activation::relu);
  Rng rng(2);
  const Params init = init_params(spec, rng);
  TrainOptions opts;
  opts.eta = 0.05;
  opts.steps = 50;
  for (auto _ : state) {
    BatchStream stream(data, 64, 3, true);
    switch (strategy) {
      case Strategy::single:
        benchmark::DoNotOptimize(train_single(spec, init, stream, opts));
        break;
      case Strategy::data_parallel:
        benchmark::DoNotOptimize(run_data_parallel(spec, 4, init, stream, opts));
        break;
      default:
        benchmark::DoNotOptimize(
            run_schedule(spec, balance_partition(spec, 4, 64), strategy, init, stream, opts));
    }
  }
  state.SetLabel(std::string(to_string(strategy)));
}
BENCHMARK(BM_Strategy)->DenseRange(0, 4);

}  // namespace
