#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "pipesim/nn.hpp"
#include "pipesim/partition.hpp"

namespace pipesim {

// Closed-form device/link model. Compute is measured in the same work units
// as estimate_layer_cost (one unit per multiply-accumulate of a dense layer).
struct HardwareProfile {
  double compute_rate = 1.0e10;  // work units per time unit, per device
  double bandwidth = 1.0e9;      // elements per time unit, per link
  // Transfers between disjoint device pairs proceed concurrently.
  bool simultaneous_p2p = true;

  void validate() const;
};

enum class ParallelMode { dp, mp };
std::string_view to_string(ParallelMode m);
ParallelMode parse_mode(std::string_view name);

// Elements moved per mini-batch.
//   dp: 2 * G * |params| (gradients up, weights down)
//   mp: sum over cuts of 2 * batch * boundary width (activations forward,
//       gradients backward)
std::size_t comm_volume_dp(const ModelSpec& spec, std::size_t replicas);
std::size_t comm_volume_mp(const StagePlan& plan, std::size_t batch);

// All components are time per mini-batch and sum to the step time.
struct Breakdown {
  double compute = 0.0;
  double p2p_transfer = 0.0;
  double p2p_idle = 0.0;
  double imbalance_idle = 0.0;

  double total() const { return compute + p2p_transfer + p2p_idle + imbalance_idle; }
  double p2p_share() const;
};

struct CostReport {
  ParallelMode mode = ParallelMode::dp;
  std::size_t workers = 1;
  std::size_t batch = 0;
  std::size_t comm_elements = 0;
  double step_time = 0.0;
  Breakdown breakdown;
  // Transfer time hidden under compute (mp only).
  double overlapped_transfer = 0.0;
  double throughput = 0.0;  // samples per time unit

  // {mode, comm_elements, step_time, breakdown{...}, throughput, ...}
  std::string to_json() const;
};

// Data parallelism over `replicas` shards of the mini-batch. Every replica
// exchanges |params| elements each way with a single parameter server whose
// link serializes them; waiting for the shared link is p2p-induced idle.
// Uneven shards show up as imbalance-induced idle.
CostReport estimate_dp(const ModelSpec& spec, std::size_t replicas, std::size_t batch,
                       const HardwareProfile& hw);

// Pipelined model parallelism: the steady-state period is set by the slowest
// stage. Boundary transfers run in the background and only the part that
// exceeds the bottleneck compute time is exposed, as p2p-induced idle.
CostReport estimate_mp(const ModelSpec& spec, const StagePlan& plan, std::size_t batch,
                       const HardwareProfile& hw);

}  // namespace pipesim
