#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "pipesim/data.hpp"
#include "pipesim/nn.hpp"
#include "pipesim/optim.hpp"
#include "pipesim/partition.hpp"

namespace pipesim {

enum class Strategy { single, data_parallel, vanilla, stash, spectrain };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);
bool is_pipelined(Strategy s);

// One unit of work in the schedule. Slots are half time units: every device
// runs at most one task per slot.
struct TaskEvent {
  std::int64_t slot = 0;
  int device = 0;
  PassDirection direction = PassDirection::forward;
  std::int64_t minibatch = 0;
  std::int64_t version_used = 0;     // version the computation is based on
  std::int64_t version_current = 0;  // device's own version when the task ran
  std::uint64_t weights_digest = 0;  // FNV-1a of the weights actually used
};

enum class PayloadKind { activation, gradient, weight_sync };
std::string_view to_string(PayloadKind k);

inline constexpr int kParameterServer = -1;

struct Transfer {
  int src = 0;
  int dst = 0;  // kParameterServer for the data-parallel aggregator
  std::size_t elements = 0;
  PayloadKind kind = PayloadKind::activation;
  std::int64_t minibatch = 0;
};

struct TrafficLog {
  std::vector<Transfer> records;

  std::size_t total_elements() const;
  std::size_t total_elements(PayloadKind kind) const;
  std::size_t elements_for_minibatch(std::int64_t minibatch) const;
  // src,dst,elements,kind,minibatch
  void write_csv(std::ostream& out) const;
};

// One line per event: slot,device,direction,minibatch,version_used,version_current
void write_trace(std::ostream& out, const std::vector<TaskEvent>& events);
std::string emit_trace(const std::vector<TaskEvent>& events);

// Per-iteration record: the training loss of the mini-batch that completed.
struct StepRecord {
  std::int64_t step = 0;  // 1-based count of completed mini-batches
  double train_loss = 0.0;
};

struct StepEvent {
  std::int64_t step = 0;
  double train_loss = 0.0;
  // Whole-model weights as of this step's completion.
  std::function<Params()> params;
  // Whole-model smoothed gradient matching `params` (single-device runs only;
  // pipelined runs concatenate each device's own state).
  std::function<Params()> smoothed;
};

struct TrainOptions {
  double eta = 0.01;
  double gamma = kDefaultGamma;
  UpdateRule rule = UpdateRule::momentum;
  std::size_t steps = 0;
  std::function<void(const StepEvent&)> on_step;
};

struct RunResult {
  Params final_params;
  std::vector<StepRecord> steps;
  TrafficLog traffic;
  std::vector<TaskEvent> trace;
};

// Stashed forward weights for one in-flight mini-batch.
struct StashEntry {
  std::int64_t version = 0;
  Params params;
};

// A simulated worker owning one pipeline stage.
struct Device {
  int index = 0;
  StageRange range;
  Params params;
  std::int64_t version = 0;
  OptimState optim;
  std::map<std::int64_t, StashEntry> stash;

  Device(int index, StageRange range, Params params, const TrainOptions& opts);
};

struct ChosenWeights {
  Params params;
  std::int64_t version = 0;
};

// Weights a task computes with:
//   vanilla   - the device's current weights
//   stash     - forward stores the current weights keyed by mini-batch;
//               backward removes and reuses them
//   spectrain - predict_weights(current, optim, version_difference(...))
// single and data_parallel behave like vanilla.
ChosenWeights choose_task_weights(Device& device, std::int64_t minibatch, PassDirection direction,
                                  Strategy strategy, int device_count);

// Reference single-device momentum/plain SGD loop.
RunResult train_single(const ModelSpec& spec, Params init, BatchStream& stream,
                       const TrainOptions& opts);

// Pipelined model parallelism over plan.device_count simulated devices using
// the vanilla, stash, or spectrain strategy. Each device alternates forward
// and backward work; a backward task wins when both are ready; device 0
// keeps at most N mini-batches in flight.
RunResult run_schedule(const ModelSpec& spec, const StagePlan& plan, Strategy strategy,
                       Params init, BatchStream& stream, const TrainOptions& opts);

// Synchronous data parallelism: the mini-batch is split into `replicas`
// equal shards, shard gradients are averaged at a parameter server, and the
// updated weights are broadcast back.
RunResult run_data_parallel(const ModelSpec& spec, std::size_t replicas, Params init,
                            BatchStream& stream, const TrainOptions& opts);

std::uint64_t weights_digest(const Params& params);

}  // namespace pipesim
