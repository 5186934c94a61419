#include "pipesim/partition.hpp"

#include <algorithm>
#include <limits>

#include "json.hpp"
#include "pipesim/error.hpp"

namespace pipesim {

StageRange StagePlan::stage(std::size_t k, std::size_t layer_count) const {
  if (k >= device_count) throw InputError("stage index out of range");
  const std::size_t first = k == 0 ? 0 : cuts[k - 1];
  const std::size_t last = k + 1 == device_count ? layer_count : cuts[k];
  return {first, last};
}

std::vector<StageRange> StagePlan::stages(std::size_t layer_count) const {
  std::vector<StageRange> out;
  out.reserve(device_count);
  for (std::size_t k = 0; k < device_count; ++k) out.push_back(stage(k, layer_count));
  return out;
}

double StagePlan::bottleneck_cost() const {
  return stage_costs.empty() ? 0.0 : *std::max_element(stage_costs.begin(), stage_costs.end());
}

std::string StagePlan::to_json() const {
  nlohmann::json j;
  j["devices"] = device_count;
  j["cuts"] = cuts;
  j["stage_costs"] = stage_costs;
  j["boundary_dims"] = boundary_dims;
  j["bottleneck_cost"] = bottleneck_cost();
  return j.dump(2);
}

double estimate_layer_cost(const LayerSpec& layer, std::size_t batch) {
  return static_cast<double>(batch) * static_cast<double>(layer.in_dim) *
         static_cast<double>(layer.out_dim);
}

std::vector<std::size_t> balance_costs(const std::vector<double>& layer_costs,
                                       std::size_t device_count) {
  const std::size_t n = layer_costs.size();
  if (device_count == 0) throw InputError("device count must be at least 1");
  if (device_count > n) {
    throw InputError("cannot split " + std::to_string(n) + " layers across " +
                     std::to_string(device_count) + " devices");
  }
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + layer_costs[i];
  auto range_cost = [&](std::size_t a, std::size_t b) { return prefix[b] - prefix[a]; };

  // best[s][i]: minimal bottleneck splitting layers [i, n) into s stages.
  // Solving suffixes lets the reconstruction pick the earliest optimal cut.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best(device_count + 1, std::vector<double>(n + 1, kInf));
  best[0][n] = 0.0;
  for (std::size_t s = 1; s <= device_count; ++s) {
    for (std::size_t i = 0; i + s <= n; ++i) {
      double b = kInf;
      for (std::size_t j = i + 1; j + (s - 1) <= n; ++j) {
        b = std::min(b, std::max(range_cost(i, j), best[s - 1][j]));
      }
      best[s][i] = b;
    }
  }

  std::vector<std::size_t> cuts;
  std::size_t i = 0;
  const double target = best[device_count][0];
  for (std::size_t s = device_count; s > 1; --s) {
    for (std::size_t j = i + 1; j + (s - 1) <= n; ++j) {
      if (std::max(range_cost(i, j), best[s - 1][j]) <= target) {
        cuts.push_back(j);
        i = j;
        break;
      }
    }
  }
  return cuts;
}

namespace {

StagePlan make_plan(const ModelSpec& spec, std::vector<std::size_t> cuts, std::size_t batch) {
  StagePlan plan;
  plan.device_count = cuts.size() + 1;
  plan.cuts = std::move(cuts);
  for (std::size_t k = 0; k < plan.device_count; ++k) {
    const StageRange r = plan.stage(k, spec.layers.size());
    double cost = 0.0;
    for (std::size_t l = r.first; l < r.last; ++l) cost += estimate_layer_cost(spec.layers[l], batch);
    plan.stage_costs.push_back(cost);
  }
  for (std::size_t c : plan.cuts) plan.boundary_dims.push_back(spec.layers[c].in_dim);
  return plan;
}

}  // namespace

StagePlan balance_partition(const ModelSpec& spec, std::size_t device_count, std::size_t batch) {
  spec.validate();
  std::vector<double> costs;
  costs.reserve(spec.layers.size());
  for (const auto& l : spec.layers) costs.push_back(estimate_layer_cost(l, batch));
  return make_plan(spec, balance_costs(costs, device_count), batch);
}

StagePlan plan_from_cuts(const ModelSpec& spec, std::vector<std::size_t> cuts, std::size_t batch) {
  spec.validate();
  std::size_t prev = 0;
  for (std::size_t c : cuts) {
    if (c <= prev || c >= spec.layers.size()) {
      throw InputError("cuts must be strictly increasing and inside (0, " +
                       std::to_string(spec.layers.size()) + ")");
    }
    prev = c;
  }
  return make_plan(spec, std::move(cuts), batch);
}

}  // namespace pipesim
