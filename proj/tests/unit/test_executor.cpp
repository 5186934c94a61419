#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "pipesim/error.hpp"
#include "pipesim/executor.hpp"
#include "trace_oracle.hpp"

using namespace pipesim;

namespace {

struct Fixture {
  ModelSpec spec = ModelSpec::stacked(6, {10, 9, 8, 7}, 3, Activation::tanh);
  Dataset train = make_blobs({.seed = 5, .n = 96, .dim = 6, .classes = 3, .noise = 0.6});
  Params init;

  Fixture() {
    Rng rng(77);
    init = init_params(spec, rng);
  }

  TrainOptions options(std::size_t steps, double eta = 0.05) const {
    TrainOptions o;
    o.eta = eta;
    o.steps = steps;
    return o;
  }

  RunResult single(std::size_t steps, std::size_t batch = 16) const {
    BatchStream s(train, batch, 3);
    return train_single(spec, init, s, options(steps));
  }

  RunResult pipeline(std::size_t devices, Strategy strategy, std::size_t steps,
                     std::size_t batch = 16) const {
    BatchStream s(train, batch, 3);
    return run_schedule(spec, balance_partition(spec, devices, batch), strategy, init, s,
                        options(steps));
  }
};

constexpr Strategy kPipelined[] = {Strategy::vanilla, Strategy::stash, Strategy::spectrain};

}  // namespace

TEST_CASE("single-stage pipeline degenerates to single-device SGD") {
  Fixture f;
  const RunResult ref = f.single(40);
  for (Strategy s : kPipelined) {
    CAPTURE(to_string(s));
    const RunResult r = f.pipeline(1, s, 40);
    CHECK(r.final_params == ref.final_params);
    REQUIRE(r.trace.size() == 80);
    for (std::size_t j = 0; j < r.trace.size(); ++j) {
      const TaskEvent& e = r.trace[j];
      CHECK(e.slot == static_cast<std::int64_t>(j));
      CHECK(e.minibatch == static_cast<std::int64_t>(j / 2));
      CHECK(e.direction == (j % 2 == 0 ? PassDirection::forward : PassDirection::backward));
    }
    CHECK(emit_trace(r.trace) == emit_trace(ref.trace));
    for (std::size_t j = 0; j < ref.steps.size(); ++j) CHECK(r.steps[j].train_loss == ref.steps[j].train_loss);
  }
}

TEST_CASE("schedule respects task dependencies") {
  Fixture f;
  for (std::size_t n : {2u, 3u, 4u, 5u}) {
    for (Strategy s : kPipelined) {
      const RunResult r = f.pipeline(n, s, 24);
      CHECK(oracle::dependency_violation(r.trace, static_cast<int>(n)) == "");
      CHECK(r.steps.size() == 24);
    }
  }
}

TEST_CASE("worked example: three devices") {
  Fixture f;
  const int n = 3;
  const RunResult r = f.pipeline(n, Strategy::vanilla, 30);
  const auto idx = oracle::index_trace(r.trace);
  for (std::int64_t i = n; i < 30 - n; ++i) {
    const auto& fwd = idx.at({i, 0, PassDirection::forward});
    const auto& bwd = idx.at({i, 0, PassDirection::backward});
    // The round trip sees N consecutive versions on device 0, oldest first.
    CHECK(bwd.version_current - fwd.version_current == n - 1);
    CHECK(oracle::measured_lag(r.trace, i, 0, PassDirection::forward) == 2);
  }
}

TEST_CASE("trace-measured lags equal the version-difference formulas") {
  Fixture f;
  for (int n : {2, 3, 4}) {
    const std::int64_t steps = 32;
    const RunResult r = f.pipeline(static_cast<std::size_t>(n), Strategy::spectrain, steps);
    for (std::int64_t i = n; i < steps - n; ++i) {
      for (int k = 0; k < n; ++k) {
        for (auto d : {PassDirection::forward, PassDirection::backward}) {
          CAPTURE(n);
          CAPTURE(i);
          CAPTURE(k);
          CHECK(oracle::measured_lag(r.trace, i, k, d) == version_difference({k, n, d}));
        }
      }
    }
  }
}

TEST_CASE("spectrain targets one version per round trip") {
  Fixture f;
  const int n = 4;
  const std::int64_t steps = 30;
  const RunResult r = f.pipeline(n, Strategy::spectrain, steps);
  const auto idx = oracle::index_trace(r.trace);
  for (std::int64_t i = n; i < steps - n; ++i) {
    for (int k = 0; k < n; ++k) {
      const auto& fe = idx.at({i, k, PassDirection::forward});
      const auto& be = idx.at({i, k, PassDirection::backward});
      CHECK(fe.version_used == be.version_used);
      CHECK(fe.version_used - fe.version_current == oracle::measured_lag(r.trace, i, k, PassDirection::forward));
    }
  }
}

TEST_CASE("weight stashing and the vanilla staleness witness") {
  Fixture f;
  for (std::size_t n : {2u, 3u, 4u}) {
    const RunResult vanilla = f.pipeline(n, Strategy::vanilla, 20);
    const RunResult stash = f.pipeline(n, Strategy::stash, 20);
    const auto vi = oracle::index_trace(vanilla.trace);
    const auto si = oracle::index_trace(stash.trace);
    int vanilla_mismatch = 0, stash_mismatch = 0;
    for (std::int64_t i = 0; i < 20; ++i) {
      for (int k = 0; k < static_cast<int>(n); ++k) {
        const auto& sf = si.at({i, k, PassDirection::forward});
        const auto& sb = si.at({i, k, PassDirection::backward});
        stash_mismatch += sf.weights_digest != sb.weights_digest || sf.version_used != sb.version_used;
      }
      vanilla_mismatch += vi.at({i, 0, PassDirection::forward}).weights_digest !=
                          vi.at({i, 0, PassDirection::backward}).weights_digest;
    }
    CHECK(vanilla_mismatch > 0);
    CHECK(stash_mismatch == 0);
  }
}

TEST_CASE("choose_task_weights") {
  Fixture f;
  TrainOptions o = f.options(0, 0.1);
  Params stage = f.init.slice(0, 2);
  Params grad = Params::zeros_like(stage);
  for (auto& l : grad.layers)
    for (double& x : l.weight.data()) x = 0.3;

  SUBCASE("spectrain") {
    Device d(0, {0, 2}, stage, o);
    d.optim.step(d.params, grad);
    ++d.version;
    const ChosenWeights back = choose_task_weights(d, 5, PassDirection::backward, Strategy::spectrain, 3);
    CHECK(back.params == d.params);
    CHECK(back.version == d.version);
    const ChosenWeights fwd = choose_task_weights(d, 5, PassDirection::forward, Strategy::spectrain, 3);
    Params expect = d.params;
    axpy(-2.0 * 0.1, d.optim.smoothed(), expect);
    CHECK(fwd.params == expect);
    CHECK(fwd.version == d.version + 2);
  }

  SUBCASE("stash") {
    Device d(1, {0, 2}, stage, o);
    const ChosenWeights fwd = choose_task_weights(d, 7, PassDirection::forward, Strategy::stash, 3);
    d.optim.step(d.params, grad);
    ++d.version;
    CHECK(d.params != fwd.params);
    const ChosenWeights bwd = choose_task_weights(d, 7, PassDirection::backward, Strategy::stash, 3);
    CHECK(bwd.params == fwd.params);
    CHECK(bwd.version == 0);
    CHECK(d.stash.empty());
    CHECK_THROWS_AS(choose_task_weights(d, 7, PassDirection::backward, Strategy::stash, 3), InvariantError);
    for (int i = 0; i < 3; ++i) choose_task_weights(d, 10 + i, PassDirection::forward, Strategy::stash, 3);
    CHECK_THROWS_AS(choose_task_weights(d, 20, PassDirection::forward, Strategy::stash, 3), InvariantError);
  }

  SUBCASE("vanilla") {
    Device d(0, {0, 2}, stage, o);
    CHECK(choose_task_weights(d, 0, PassDirection::forward, Strategy::vanilla, 2).params == d.params);
  }
}

TEST_CASE("data parallel") {
  Fixture f;
  const RunResult ref = f.single(30, 16);

  SUBCASE("one replica is bit-identical") {
    BatchStream s(f.train, 16, 3);
    const RunResult r = run_data_parallel(f.spec, 1, f.init, s, f.options(30));
    CHECK(r.final_params == ref.final_params);
  }

  SUBCASE("shard-mean matches full-batch training") {
    for (std::size_t g : {2u, 4u}) {
      BatchStream s(f.train, 16, 3);
      const RunResult r = run_data_parallel(f.spec, g, f.init, s, f.options(30));
      const auto a = r.final_params.flatten();
      const auto b = ref.final_params.flatten();
      double worst = 0;
      for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
      CHECK(worst < 1e-12);
      CHECK(r.traffic.total_elements(PayloadKind::weight_sync) ==
            30 * 2 * g * f.init.element_count());
      CHECK(r.traffic.elements_for_minibatch(3) == 2 * g * f.init.element_count());
    }
  }

  SUBCASE("indivisible batch") {
    BatchStream s(f.train, 16, 3);
    CHECK_THROWS_AS(run_data_parallel(f.spec, 3, f.init, s, f.options(2)), InputError);
  }
}

TEST_CASE("model-parallel traffic equals boundary tensor sizes") {
  Fixture f;
  const std::size_t batch = 16;
  for (std::size_t n : {2u, 3u, 5u}) {
    const StagePlan plan = balance_partition(f.spec, n, batch);
    const RunResult r = f.pipeline(n, Strategy::vanilla, 10, batch);
    std::size_t expect = 0;
    for (std::size_t d : plan.boundary_dims) expect += 2 * batch * d;
    for (std::int64_t i = 0; i < 10; ++i) CHECK(r.traffic.elements_for_minibatch(i) == expect);
    CHECK(r.traffic.total_elements(PayloadKind::activation) == r.traffic.total_elements(PayloadKind::gradient));
  }
}

TEST_CASE("determinism") {
  Fixture f;
  for (Strategy s : kPipelined) {
    const RunResult a = f.pipeline(3, s, 25);
    const RunResult b = f.pipeline(3, s, 25);
    CHECK(emit_trace(a.trace) == emit_trace(b.trace));
    CHECK(a.final_params == b.final_params);
    std::ostringstream ta, tb;
    a.traffic.write_csv(ta);
    b.traffic.write_csv(tb);
    CHECK(ta.str() == tb.str());
  }
}

TEST_CASE("step callback and divergence") {
  Fixture f;
  std::vector<std::int64_t> seen;
  TrainOptions o = f.options(12);
  o.on_step = [&](const StepEvent& ev) {
    seen.push_back(ev.step);
    CHECK(ev.params().element_count() == f.init.element_count());
  };
  BatchStream s(f.train, 16, 3);
  run_schedule(f.spec, balance_partition(f.spec, 3, 16), Strategy::spectrain, f.init, s, o);
  CHECK(seen.size() == 12);
  CHECK(seen.back() == 12);

  // Features near the top of the double range overflow a relu stack.
  const ModelSpec relu_spec = ModelSpec::stacked(6, {10, 9}, 3, Activation::relu);
  Rng rng(1);
  const Params relu_init = init_params(relu_spec, rng);
  Dataset huge = f.train;
  for (double& x : huge.features.data()) x *= 1e307;
  BatchStream s2(huge, 16, 3);
  CHECK_THROWS_AS(train_single(relu_spec, relu_init, s2, f.options(5)), DivergedError);
  BatchStream s3(huge, 16, 3);
  try {
    run_schedule(relu_spec, balance_partition(relu_spec, 2, 16), Strategy::vanilla, relu_init, s3,
                 f.options(5));
    FAIL("expected divergence");
  } catch (const DivergedError& e) {
    CHECK(e.step() >= 1);
    CHECK(e.step() <= 5);
  }
}

TEST_CASE("trace and traffic text formats") {
  std::vector<TaskEvent> ev = {{0, 0, PassDirection::forward, 0, 0, 0, 0},
                               {1, 0, PassDirection::backward, 0, 2, 0, 0}};
  CHECK(emit_trace(ev) ==
        "slot,device,direction,minibatch,version_used,version_current\n0,0,F,0,0,0\n1,0,B,0,2,0\n");
  TrafficLog log;
  log.records.push_back({0, kParameterServer, 10, PayloadKind::weight_sync, 3});
  std::ostringstream out;
  log.write_csv(out);
  CHECK(out.str() == "src,dst,elements,kind,minibatch\n0,ps,10,weight_sync,3\n");
}
