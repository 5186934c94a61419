#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "pipesim/data.hpp"
#include "pipesim/executor.hpp"
#include "pipesim/partition.hpp"
#include "pipesim/run_config.hpp"
#include "pipesim/staleness.hpp"

namespace pipesim::cli {

struct Datasets {
  Dataset train;
  Dataset val;
};

Datasets make_datasets(const RunConfig& c);

struct EvalRow {
  std::int64_t step = 0;
  double train_loss = 0.0;  // mean over the steps since the previous row
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate(const ModelSpec& spec, const Params& params, const Dataset& data);

struct TrainOutcome {
  Strategy strategy = Strategy::single;
  ModelSpec spec;
  std::optional<StagePlan> plan;
  std::vector<EvalRow> metrics;
  RunResult run;
  Evaluation final_eval;
};

// One full run of `strategy` under config c. Metrics rows land every
// c.eval_every completed steps.
TrainOutcome run_training(const RunConfig& c, Strategy strategy);

// step,train_loss,val_loss,val_acc
void write_metrics_csv(std::ostream& out, const std::vector<EvalRow>& rows);
// strategy,step,train_loss,val_loss,val_acc
void write_compare_csv(std::ostream& out, const std::vector<TrainOutcome>& runs);

nlohmann::json summary_json(const RunConfig& c, const TrainOutcome& o);

struct RmseOutcome {
  std::vector<RmseRecord> records;
  std::vector<RmseSummary> summaries;
};
RmseOutcome run_rmse(const RunConfig& c);

nlohmann::json costmodel_json(const RunConfig& c);

// Subcommands write their files under c.out and a short report to `log`.
// Return the process exit code.
int cmd_train(const RunConfig& c, std::ostream& log);
int cmd_compare(const RunConfig& c, std::ostream& log);
int cmd_rmse(const RunConfig& c, std::ostream& log);
int cmd_costmodel(const RunConfig& c, std::ostream& log);
// Writes the event trace of c.strategy to `out`.
int cmd_trace(const RunConfig& c, std::ostream& out);

}  // namespace pipesim::cli
