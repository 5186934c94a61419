#include "pipesim/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "pipesim/error.hpp"

namespace pipesim {

void HardwareProfile::validate() const {
  if (!(compute_rate > 0.0)) throw InputError("compute_rate must be positive");
  if (!(bandwidth > 0.0)) throw InputError("bandwidth must be positive");
}

std::string_view to_string(ParallelMode m) { return m == ParallelMode::dp ? "dp" : "mp"; }

ParallelMode parse_mode(std::string_view name) {
  if (name == "dp" || name == "data_parallel") return ParallelMode::dp;
  if (name == "mp" || name == "model_parallel") return ParallelMode::mp;
  throw InputError("unknown parallel mode '" + std::string(name) + "'");
}

namespace {

std::size_t param_count(const ModelSpec& spec) {
  std::size_t n = 0;
  for (const auto& l : spec.layers) n += l.in_dim * l.out_dim + l.out_dim;
  return n;
}

double model_cost_per_sample(const ModelSpec& spec) {
  double c = 0.0;
  for (const auto& l : spec.layers) c += estimate_layer_cost(l, 1);
  return c;
}

void finish(CostReport& r) {
  r.step_time = r.breakdown.total();
  r.throughput = r.step_time > 0.0 ? static_cast<double>(r.batch) / r.step_time : 0.0;
}

}  // namespace

double Breakdown::p2p_share() const {
  const double t = total();
  return t > 0.0 ? (p2p_transfer + p2p_idle) / t : 0.0;
}

std::size_t comm_volume_dp(const ModelSpec& spec, std::size_t replicas) {
  spec.validate();
  return 2 * replicas * param_count(spec);
}

std::size_t comm_volume_mp(const StagePlan& plan, std::size_t batch) {
  std::size_t v = 0;
  for (std::size_t dim : plan.boundary_dims) v += 2 * batch * dim;
  return v;
}

std::string CostReport::to_json() const {
  nlohmann::json j;
  j["mode"] = std::string(to_string(mode));
  j["workers"] = workers;
  j["batch"] = batch;
  j["comm_elements"] = comm_elements;
  j["step_time"] = step_time;
  j["breakdown"] = {{"computing", breakdown.compute},
                    {"p2p_transfer", breakdown.p2p_transfer},
                    {"p2p_idle", breakdown.p2p_idle},
                    {"imbalance_idle", breakdown.imbalance_idle}};
  j["p2p_share"] = breakdown.p2p_share();
  j["overlapped_transfer"] = overlapped_transfer;
  j["throughput"] = throughput;
  return j.dump(2);
}

CostReport estimate_dp(const ModelSpec& spec, std::size_t replicas, std::size_t batch,
                       const HardwareProfile& hw) {
  hw.validate();
  if (replicas == 0) throw InputError("replica count must be positive");
  if (batch < replicas) throw InputError("batch smaller than replica count");

  CostReport r;
  r.mode = ParallelMode::dp;
  r.workers = replicas;
  r.batch = batch;
  r.comm_elements = comm_volume_dp(spec, replicas);

  const double per_sample = model_cost_per_sample(spec) / hw.compute_rate;
  const std::size_t base = batch / replicas;
  const std::size_t extra = batch % replicas;
  const double slowest = static_cast<double>(base + (extra ? 1 : 0)) * per_sample;
  const double mean = static_cast<double>(batch) / static_cast<double>(replicas) * per_sample;

  const double own = 2.0 * static_cast<double>(param_count(spec)) / hw.bandwidth;
  r.breakdown.compute = mean;
  r.breakdown.imbalance_idle = slowest - mean;
  r.breakdown.p2p_transfer = own;
  // The server's link carries every replica's traffic back to back.
  r.breakdown.p2p_idle = static_cast<double>(r.comm_elements) / hw.bandwidth - own;
  finish(r);
  return r;
}

CostReport estimate_mp(const ModelSpec& spec, const StagePlan& plan, std::size_t batch,
                       const HardwareProfile& hw) {
  hw.validate();
  spec.validate();
  if (batch == 0) throw InputError("batch must be positive");

  CostReport r;
  r.mode = ParallelMode::mp;
  r.workers = plan.device_count;
  r.batch = batch;
  r.comm_elements = comm_volume_mp(plan, batch);

  std::vector<double> stage_time;
  for (const StageRange& s : plan.stages(spec.layers.size())) {
    double c = 0.0;
    for (std::size_t l = s.first; l < s.last; ++l) c += estimate_layer_cost(spec.layers[l], batch);
    stage_time.push_back(c / hw.compute_rate);
  }
  const double bottleneck = *std::max_element(stage_time.begin(), stage_time.end());
  const double mean = std::accumulate(stage_time.begin(), stage_time.end(), 0.0) /
                      static_cast<double>(stage_time.size());

  double transfer = 0.0;
  for (std::size_t dim : plan.boundary_dims) {
    const double t = 2.0 * static_cast<double>(batch * dim) / hw.bandwidth;
    transfer = hw.simultaneous_p2p ? std::max(transfer, t) : transfer + t;
  }

  r.breakdown.compute = mean;
  r.breakdown.imbalance_idle = bottleneck - mean;
  r.breakdown.p2p_transfer = 0.0;
  r.breakdown.p2p_idle = std::max(0.0, transfer - bottleneck);
  r.overlapped_transfer = std::min(transfer, bottleneck);
  finish(r);
  return r;
}

}  // namespace pipesim
