#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <vector>

#include "pipesim/data.hpp"
#include "pipesim/executor.hpp"

namespace pipesim {

// Flattened weights W_t together with the smoothed gradient that was current
// while W_t was the latest version (v_{t-1}; zero for t = 0).
struct HistoryEntry {
  std::vector<double> weights;
  std::vector<double> smoothed;
};

struct RmseRecord {
  std::int64_t step = 0;
  int s = 0;
  double rmse_pred = 0.0;   // rmse(W_{t-s} - s*eta*v_{t-s-1}, W_t)
  double rmse_stale = 0.0;  // rmse(W_{t-s}, W_t)
};

// One record per t in [s, history.size()).
std::vector<RmseRecord> record_rmse(const std::vector<HistoryEntry>& history, int s, double eta);

struct RmseSummary {
  int s = 0;
  std::size_t count = 0;
  double mean_pred = 0.0;
  double mean_stale = 0.0;
  // Fraction of records with rmse_pred < rmse_stale.
  double dominance = 0.0;
};

// Summarizes records with step >= first_step.
RmseSummary summarize(const std::vector<RmseRecord>& records, std::int64_t first_step = 0);

// Runs single-device training and keeps (W_t, v_{t-1}) for t = 0..steps.
std::vector<HistoryEntry> capture_history(const ModelSpec& spec, Params init, BatchStream& stream,
                                          const TrainOptions& opts);

// step,s,rmse_pred,rmse_stale
void write_rmse_csv(std::ostream& out, const std::vector<RmseRecord>& records);

}  // namespace pipesim
