#include "pipesim/staleness.hpp"

#include <string>

#include "pipesim/csv.hpp"
#include "pipesim/error.hpp"

namespace pipesim {

std::vector<RmseRecord> record_rmse(const std::vector<HistoryEntry>& history, int s, double eta) {
  if (s < 0) throw InputError("version difference must be non-negative");
  if (static_cast<std::size_t>(s) >= history.size()) {
    throw InputError("history of " + std::to_string(history.size()) +
                     " versions is too short for s = " + std::to_string(s));
  }
  std::vector<RmseRecord> out;
  out.reserve(history.size() - static_cast<std::size_t>(s));
  std::vector<double> predicted;
  for (std::size_t t = static_cast<std::size_t>(s); t < history.size(); ++t) {
    const HistoryEntry& base = history[t - static_cast<std::size_t>(s)];
    const HistoryEntry& actual = history[t];
    if (base.smoothed.size() != base.weights.size()) {
      throw ShapeError("history entry has mismatched weights and smoothed gradient");
    }
    predicted.resize(base.weights.size());
    const double step = static_cast<double>(s) * eta;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      predicted[i] = base.weights[i] - step * base.smoothed[i];
    }
    out.push_back({static_cast<std::int64_t>(t), s, rmse(predicted, actual.weights),
                   rmse(base.weights, actual.weights)});
  }
  return out;
}

RmseSummary summarize(const std::vector<RmseRecord>& records, std::int64_t first_step) {
  RmseSummary sum;
  std::size_t wins = 0;
  for (const auto& r : records) {
    if (r.step < first_step) continue;
    sum.s = r.s;
    ++sum.count;
    sum.mean_pred += r.rmse_pred;
    sum.mean_stale += r.rmse_stale;
    if (r.rmse_pred < r.rmse_stale) ++wins;
  }
  if (sum.count) {
    const double n = static_cast<double>(sum.count);
    sum.mean_pred /= n;
    sum.mean_stale /= n;
    sum.dominance = static_cast<double>(wins) / n;
  }
  return sum;
}

std::vector<HistoryEntry> capture_history(const ModelSpec& spec, Params init, BatchStream& stream,
                                          const TrainOptions& opts) {
  std::vector<HistoryEntry> history;
  history.reserve(opts.steps + 1);
  history.push_back({init.flatten(), std::vector<double>(init.element_count(), 0.0)});
  TrainOptions local = opts;
  local.on_step = [&history, &opts](const StepEvent& ev) {
    history.push_back({ev.params().flatten(), ev.smoothed().flatten()});
    if (opts.on_step) opts.on_step(ev);
  };
  train_single(spec, std::move(init), stream, local);
  return history;
}

void write_rmse_csv(std::ostream& out, const std::vector<RmseRecord>& records) {
  out << "step,s,rmse_pred,rmse_stale\n";
  for (const auto& r : records) {
    out << r.step << ',' << r.s << ',' << format_double(r.rmse_pred) << ','
        << format_double(r.rmse_stale) << '\n';
  }
}

}  // namespace pipesim
