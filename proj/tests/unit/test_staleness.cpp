#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "pipesim/error.hpp"
#include "pipesim/staleness.hpp"

using namespace pipesim;

namespace {

std::vector<HistoryEntry> random_history(std::size_t len, std::size_t width, Rng& rng) {
  std::vector<HistoryEntry> h(len);
  for (auto& e : h) {
    e.weights.resize(width);
    e.smoothed.resize(width);
    for (double& x : e.weights) x = rng.uniform(-1, 1);
    for (double& x : e.smoothed) x = rng.uniform(-1, 1);
  }
  return h;
}

}  // namespace

TEST_CASE("record_rmse definitions") {
  Rng rng(1);
  const auto h = random_history(10, 6, rng);
  const auto zero = record_rmse(h, 0, 0.1);
  CHECK(zero.size() == 10);
  for (const auto& r : zero) {
    CHECK(r.rmse_pred == 0.0);
    CHECK(r.rmse_stale == 0.0);
  }

  const auto recs = record_rmse(h, 2, 0.1);
  REQUIRE(recs.size() == 8);
  CHECK(recs.front().step == 2);
  for (const auto& r : recs) {
    const auto& base = h[static_cast<std::size_t>(r.step) - 2];
    const auto& actual = h[static_cast<std::size_t>(r.step)];
    std::vector<double> pred(6);
    for (std::size_t i = 0; i < 6; ++i) pred[i] = base.weights[i] - 2 * 0.1 * base.smoothed[i];
    CHECK(r.rmse_pred == doctest::Approx(oracle::two_pass_rmse(pred, actual.weights)).epsilon(1e-12));
    CHECK(r.rmse_stale == doctest::Approx(oracle::two_pass_rmse(base.weights, actual.weights)).epsilon(1e-12));
    CHECK(r.rmse_pred >= 0.0);
  }

  CHECK_THROWS_AS(record_rmse(h, 10, 0.1), InputError);
  CHECK_THROWS_AS(record_rmse(h, -1, 0.1), InputError);
}

TEST_CASE("constant weights give zero error") {
  std::vector<HistoryEntry> h(8, HistoryEntry{{1.0, 2.0, 3.0}, {0.0, 0.0, 0.0}});
  for (int s = 0; s < 4; ++s) {
    for (const auto& r : record_rmse(h, s, 0.5)) {
      CHECK(r.rmse_pred == 0.0);
      CHECK(r.rmse_stale == 0.0);
    }
  }
}

TEST_CASE("summary") {
  std::vector<RmseRecord> recs = {{1, 2, 0.1, 0.2}, {2, 2, 0.3, 0.2}, {3, 2, 0.1, 0.4}};
  const RmseSummary all = summarize(recs);
  CHECK(all.count == 3);
  CHECK(all.dominance == doctest::Approx(2.0 / 3.0));
  CHECK(all.mean_pred == doctest::Approx(0.5 / 3));
  const RmseSummary late = summarize(recs, 2);
  CHECK(late.count == 2);
  CHECK(late.dominance == 0.5);
}

TEST_CASE("prediction beats staleness while training a stacked-dense net") {
  const ModelSpec spec = ModelSpec::stacked(8, {32, 32}, 4);
  const Dataset train = make_blobs({.seed = 2, .n = 512, .dim = 8, .classes = 4, .noise = 0.8});
  Rng rng(2);
  BatchStream stream(train, 32, 2);
  TrainOptions opts;
  opts.eta = 0.05;
  opts.steps = 300;
  const auto history = capture_history(spec, init_params(spec, rng), stream, opts);
  CHECK(history.size() == 301);
  CHECK(history.front().smoothed == std::vector<double>(history.front().weights.size(), 0.0));

  double prev_stale = 0.0;
  for (int s = 1; s <= 3; ++s) {
    const RmseSummary sum = summarize(record_rmse(history, s, opts.eta), 20);
    CAPTURE(s);
    CHECK(sum.mean_pred < sum.mean_stale);
    CHECK(sum.mean_stale >= prev_stale);
    prev_stale = sum.mean_stale;
  }
}

TEST_CASE("rmse csv") {
  std::ostringstream out;
  write_rmse_csv(out, {{4, 1, 0.5, 0.25}});
  CHECK(out.str() == "step,s,rmse_pred,rmse_stale\n4,1,0.5,0.25\n");
}
