#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pipesim/nn.hpp"

namespace pipesim {

// Contiguous assignment of layers to N devices. cuts[j] is the index of the
// first layer of stage j+1.
struct StagePlan {
  std::size_t device_count = 1;
  std::vector<std::size_t> cuts;
  std::vector<double> stage_costs;
  // Elements per sample crossing each cut (the cut layer's input width).
  std::vector<std::size_t> boundary_dims;

  StageRange stage(std::size_t k, std::size_t layer_count) const;
  std::vector<StageRange> stages(std::size_t layer_count) const;
  double bottleneck_cost() const;

  // {"devices":..,"cuts":[..],"stage_costs":[..],"boundary_dims":[..]}
  std::string to_json() const;
};

// Dense FLOP proxy: batch * in_dim * out_dim work units.
double estimate_layer_cost(const LayerSpec& layer, std::size_t batch);

// Minimizes the largest stage cost over all contiguous partitions into
// device_count stages. Among optimal partitions the one with the earliest
// cuts wins.
std::vector<std::size_t> balance_costs(const std::vector<double>& layer_costs,
                                       std::size_t device_count);

StagePlan balance_partition(const ModelSpec& spec, std::size_t device_count, std::size_t batch);

// Plan with caller-chosen cuts; validates ordering and range.
StagePlan plan_from_cuts(const ModelSpec& spec, std::vector<std::size_t> cuts, std::size_t batch);

}  // namespace pipesim
