#include <algorithm>
#include <chrono>
#include <limits>

#include "doctest.h"
#include "oracles.hpp"
#include "pipesim/error.hpp"
#include "pipesim/partition.hpp"

using namespace pipesim;

namespace {

// Bottleneck of the best contiguous split, by enumerating every cut set.
double brute_force_bottleneck(const std::vector<double>& costs, std::size_t devices) {
  const std::size_t n = costs.size();
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != devices - 1) continue;
    double worst = 0, run = 0;
    for (std::size_t l = 0; l < n; ++l) {
      run += costs[l];
      if (l + 1 == n || (mask & (1u << l))) {
        worst = std::max(worst, run);
        run = 0;
      }
    }
    best = std::min(best, worst);
  }
  return best;
}

double bottleneck_of(const std::vector<double>& costs, const std::vector<std::size_t>& cuts) {
  double worst = 0;
  std::size_t start = 0;
  auto bounds = cuts;
  bounds.push_back(costs.size());
  for (std::size_t end : bounds) {
    double run = 0;
    for (std::size_t l = start; l < end; ++l) run += costs[l];
    worst = std::max(worst, run);
    start = end;
  }
  return worst;
}

}  // namespace

TEST_CASE("layer cost proxy") {
  CHECK(estimate_layer_cost({1, 1, Activation::none}, 1) == 1.0);
  const LayerSpec l{7, 9, Activation::relu};
  CHECK(estimate_layer_cost(l, 64) == 2 * estimate_layer_cost(l, 32));
}

TEST_CASE("balance_partition degenerate and symmetric cases") {
  const ModelSpec spec = ModelSpec::stacked(8, {8, 8, 8}, 8);
  const StagePlan one = balance_partition(spec, 1, 4);
  CHECK(one.device_count == 1);
  CHECK(one.cuts.empty());
  CHECK(one.stage(0, 4) == StageRange{0, 4});

  const StagePlan two = balance_partition(spec, 2, 4);
  CHECK(two.cuts == std::vector<std::size_t>{2});
  const double total = 4 * estimate_layer_cost(spec.layers[0], 4);
  CHECK(two.bottleneck_cost() == total / 2);
  CHECK(two.boundary_dims == std::vector<std::size_t>{8});

  CHECK_THROWS_AS(balance_partition(spec, 5, 4), InputError);
  CHECK_THROWS_AS(balance_partition(spec, 0, 4), InputError);
}

TEST_CASE("balance_costs matches exhaustive enumeration") {
  Rng rng(17);
  {
    std::vector<double> costs(8);
    for (double& c : costs) c = rng.uniform(1, 100);
    const auto cuts = balance_costs(costs, 3);
    CHECK(cuts.size() == 2);
    CHECK(bottleneck_of(costs, cuts) == brute_force_bottleneck(costs, 3));
  }
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(10);
    std::vector<double> costs(n);
    for (double& c : costs) c = std::floor(rng.uniform(1, 50));
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t d = 1; d <= std::min<std::size_t>(4, n); ++d) {
      const auto cuts = balance_costs(costs, d);
      REQUIRE(cuts.size() == d - 1);
      CHECK(std::is_sorted(cuts.begin(), cuts.end()));
      CHECK(std::adjacent_find(cuts.begin(), cuts.end()) == cuts.end());
      const double got = bottleneck_of(costs, cuts);
      CHECK(got == brute_force_bottleneck(costs, d));
      CHECK(got <= prev);
      prev = got;
    }
  }
}

TEST_CASE("plan from explicit cuts") {
  const ModelSpec spec = ModelSpec::stacked(4, {6, 5, 3}, 2);
  const StagePlan p = plan_from_cuts(spec, {1, 3}, 10);
  CHECK(p.device_count == 3);
  CHECK(p.stages(4) == std::vector<StageRange>{{0, 1}, {1, 3}, {3, 4}});
  CHECK(p.boundary_dims == std::vector<std::size_t>{6, 3});
  CHECK(p.stage_costs[1] == 10.0 * (6 * 5 + 5 * 3));
  CHECK_THROWS_AS(plan_from_cuts(spec, {2, 2}, 10), InputError);
  CHECK_THROWS_AS(plan_from_cuts(spec, {0}, 10), InputError);
  CHECK_THROWS_AS(plan_from_cuts(spec, {4}, 10), InputError);
  CHECK(p.to_json().find("\"cuts\"") != std::string::npos);
}

TEST_CASE("cost ordering agrees with measured matmul time") {
  // Sizes differ by large factors so scheduling noise cannot flip the order.
  const std::vector<LayerSpec> layers = {{16, 16, Activation::none},
                                         {64, 64, Activation::none},
                                         {256, 256, Activation::none}};
  const std::size_t batch = 32;
  Rng rng(1);
  std::vector<double> measured;
  for (const auto& l : layers) {
    const Tensor x = oracle::random_tensor({batch, l.in_dim}, rng);
    const Tensor w = oracle::random_tensor({l.in_dim, l.out_dim}, rng);
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 5; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      volatile double sink = matmul(x, w)[0];
      (void)sink;
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    measured.push_back(best);
  }
  for (std::size_t i = 1; i < layers.size(); ++i) {
    CHECK(estimate_layer_cost(layers[i], batch) > estimate_layer_cost(layers[i - 1], batch));
    CHECK(measured[i] > measured[i - 1]);
  }
}
