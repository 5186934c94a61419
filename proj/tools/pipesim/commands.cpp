#include "pipesim/commands.hpp"

#include <filesystem>
#include <fstream>

#include "pipesim/costmodel.hpp"
#include "pipesim/csv.hpp"
#include "pipesim/error.hpp"

namespace pipesim::cli {

using nlohmann::json;

namespace {

constexpr std::uint64_t kDataStream = 0;
constexpr std::uint64_t kBatchStream = 10;
constexpr std::uint64_t kInitStream = 20;

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

std::uint64_t data_seed(const RunConfig& c) { return c.data.seed.value_or(c.seed); }

}  // namespace

Datasets make_datasets(const RunConfig& c) {
  if (c.data.kind == "csv") {
    Dataset train = load_csv_dataset(c.data.train_csv, Split::train);
    Dataset val = c.data.val_csv.empty() ? train : load_csv_dataset(c.data.val_csv, Split::val);
    val.split = Split::val;
    const std::size_t classes = std::max(train.classes, val.classes);
    train.classes = val.classes = classes;
    if (train.dim() != val.dim()) throw InputError("train and val csv files differ in width");
    return {std::move(train), std::move(val)};
  }
  const std::uint64_t seed = Rng(data_seed(c)).split(kDataStream).next_u64();
  if (c.data.kind == "moons") {
    return {make_moons(seed, c.data.n_train, c.data.noise, Split::train),
            make_moons(seed, c.data.n_val, c.data.noise, Split::val)};
  }
  BlobsParams p{.seed = seed, .n = c.data.n_train, .dim = c.data.dim, .classes = c.data.classes,
                .noise = c.data.noise};
  Dataset train = make_blobs(p, Split::train);
  p.n = c.data.n_val;
  return {std::move(train), make_blobs(p, Split::val)};
}

Evaluation evaluate(const ModelSpec& spec, const Params& params, const Dataset& data) {
  const Tensor out = forward(spec, params, data.features).output;
  Evaluation e;
  e.loss = loss_head(spec.loss, out, data.label_tensor()).loss;
  const auto pred = predict_classes(out);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i];
  e.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return e;
}

TrainOutcome run_training(const RunConfig& c, Strategy strategy) {
  c.validate();
  const Datasets data = make_datasets(c);
  TrainOutcome o;
  o.strategy = strategy;
  o.spec = c.resolved_model(data.train.dim(), data.train.classes);

  Rng init_rng = Rng(c.seed).split(kInitStream);
  Params init = init_params(o.spec, init_rng);
  BatchStream stream(data.train, c.batch, Rng(c.seed).split(kBatchStream).next_u64(), true);

  double window = 0.0;
  std::size_t window_count = 0;
  TrainOptions opts;
  opts.eta = c.lr;
  opts.gamma = c.gamma;
  opts.rule = c.update_rule;
  opts.steps = c.steps;
  opts.on_step = [&](const StepEvent& ev) {
    window += ev.train_loss;
    ++window_count;
    if (ev.step % static_cast<std::int64_t>(c.eval_every) != 0) return;
    const Evaluation e = evaluate(o.spec, ev.params(), data.val);
    o.metrics.push_back({ev.step, window / static_cast<double>(window_count), e.loss, e.accuracy});
    window = 0.0;
    window_count = 0;
  };

  switch (strategy) {
    case Strategy::single:
      o.run = train_single(o.spec, std::move(init), stream, opts);
      break;
    case Strategy::data_parallel:
      if (c.batch % c.devices != 0) {
        throw InputError("batch " + std::to_string(c.batch) + " is not divisible by " +
                         std::to_string(c.devices) + " replicas");
      }
      o.run = run_data_parallel(o.spec, c.devices, std::move(init), stream, opts);
      break;
    case Strategy::vanilla:
    case Strategy::stash:
    case Strategy::spectrain:
      o.plan = c.cuts ? plan_from_cuts(o.spec, *c.cuts, c.batch)
                      : balance_partition(o.spec, c.devices, c.batch);
      o.run = run_schedule(o.spec, *o.plan, strategy, std::move(init), stream, opts);
      break;
  }
  o.final_eval = evaluate(o.spec, o.run.final_params, data.val);
  return o;
}

void write_metrics_csv(std::ostream& out, const std::vector<EvalRow>& rows) {
  out << "step,train_loss,val_loss,val_acc\n";
  for (const auto& r : rows) {
    out << r.step << ',' << format_double(r.train_loss) << ',' << format_double(r.val_loss) << ','
        << format_double(r.val_acc) << '\n';
  }
}

void write_compare_csv(std::ostream& out, const std::vector<TrainOutcome>& runs) {
  out << "strategy,step,train_loss,val_loss,val_acc\n";
  for (const auto& o : runs) {
    for (const auto& r : o.metrics) {
      out << to_string(o.strategy) << ',' << r.step << ',' << format_double(r.train_loss) << ','
          << format_double(r.val_loss) << ',' << format_double(r.val_acc) << '\n';
    }
  }
}

json summary_json(const RunConfig& c, const TrainOutcome& o) {
  json j;
  j["strategy"] = std::string(to_string(o.strategy));
  j["devices"] = o.strategy == Strategy::single ? 1 : c.devices;
  j["steps"] = o.run.steps.size();
  j["final_train_loss"] = o.run.steps.empty() ? json(nullptr) : json(o.run.steps.back().train_loss);
  j["final_val_loss"] = o.final_eval.loss;
  j["final_val_acc"] = o.final_eval.accuracy;
  j["traffic_elements"] = o.run.traffic.total_elements();
  if (o.plan) j["plan"] = json::parse(o.plan->to_json());
  j["config"] = config_to_json(c);
  return j;
}

RmseOutcome run_rmse(const RunConfig& c) {
  c.validate();
  const Datasets data = make_datasets(c);
  const ModelSpec spec = c.resolved_model(data.train.dim(), data.train.classes);
  Rng init_rng = Rng(c.seed).split(kInitStream);
  BatchStream stream(data.train, c.batch, Rng(c.seed).split(kBatchStream).next_u64(), true);
  TrainOptions opts;
  opts.eta = c.lr;
  opts.gamma = c.gamma;
  opts.rule = c.update_rule;
  opts.steps = c.steps;
  const auto history = capture_history(spec, init_params(spec, init_rng), stream, opts);

  RmseOutcome out;
  for (int s : c.rmse_s) {
    auto recs = record_rmse(history, s, c.lr);
    out.summaries.push_back(summarize(recs));
    out.records.insert(out.records.end(), recs.begin(), recs.end());
  }
  return out;
}

json costmodel_json(const RunConfig& c) {
  c.validate();
  const ModelSpec spec = c.model ? *c.model : c.resolved_model(c.data.dim, c.data.classes);
  const StagePlan plan =
      c.cuts ? plan_from_cuts(spec, *c.cuts, c.batch) : balance_partition(spec, c.devices, c.batch);
  const CostReport dp = estimate_dp(spec, c.devices, c.batch, c.hardware);
  const CostReport mp = estimate_mp(spec, plan, c.batch, c.hardware);
  json j;
  j["dp"] = json::parse(dp.to_json());
  j["mp"] = json::parse(mp.to_json());
  j["plan"] = json::parse(plan.to_json());
  j["dp_to_mp_volume_ratio"] =
      mp.comm_elements ? json(static_cast<double>(dp.comm_elements) / static_cast<double>(mp.comm_elements))
                       : json(nullptr);
  return j;
}

int cmd_train(const RunConfig& c, std::ostream& log) {
  const TrainOutcome o = run_training(c, c.strategy);
  {
    auto out = open_output(c.out / "metrics.csv");
    write_metrics_csv(out, o.metrics);
  }
  {
    auto out = open_output(c.out / "summary.json");
    out << summary_json(c, o).dump(2) << '\n';
  }
  if (c.trace) {
    auto trace = open_output(c.out / "trace.csv");
    write_trace(trace, o.run.trace);
    auto traffic = open_output(c.out / "traffic.csv");
    o.run.traffic.write_csv(traffic);
  }
  log << to_string(o.strategy) << ": " << o.run.steps.size() << " steps, val_loss "
      << format_double(o.final_eval.loss) << ", val_acc " << format_double(o.final_eval.accuracy)
      << '\n';
  return 0;
}

int cmd_compare(const RunConfig& c, std::ostream& log) {
  std::vector<TrainOutcome> runs;
  json summary = json::array();
  for (Strategy s : c.strategies) {
    runs.push_back(run_training(c, s));
    json entry = summary_json(c, runs.back());
    entry.erase("config");
    summary.push_back(std::move(entry));
    log << to_string(s) << ": val_acc " << format_double(runs.back().final_eval.accuracy) << '\n';
  }
  {
    auto out = open_output(c.out / "compare.csv");
    write_compare_csv(out, runs);
  }
  auto out = open_output(c.out / "compare_summary.json");
  out << json{{"runs", summary}, {"config", config_to_json(c)}}.dump(2) << '\n';
  return 0;
}

int cmd_rmse(const RunConfig& c, std::ostream& log) {
  const RmseOutcome r = run_rmse(c);
  {
    auto out = open_output(c.out / "rmse.csv");
    write_rmse_csv(out, r.records);
  }
  json summary = json::array();
  for (const auto& s : r.summaries) {
    summary.push_back({{"s", s.s},
                       {"count", s.count},
                       {"mean_rmse_pred", s.mean_pred},
                       {"mean_rmse_stale", s.mean_stale},
                       {"dominance", s.dominance}});
    log << "s=" << s.s << " mean_pred " << format_double(s.mean_pred) << " mean_stale "
        << format_double(s.mean_stale) << " dominance " << format_double(s.dominance) << '\n';
  }
  auto out = open_output(c.out / "rmse_summary.json");
  out << summary.dump(2) << '\n';
  return 0;
}

int cmd_costmodel(const RunConfig& c, std::ostream& log) {
  const json report = costmodel_json(c);
  auto out = open_output(c.out / "costmodel.json");
  out << report.dump(2) << '\n';
  log << report.dump(2) << '\n';
  return 0;
}

int cmd_trace(const RunConfig& c, std::ostream& out) {
  const TrainOutcome o = run_training(c, c.strategy);
  write_trace(out, o.run.trace);
  if (c.trace) {
    auto traffic = open_output(c.out / "traffic.csv");
    o.run.traffic.write_csv(traffic);
  }
  return 0;
}

}  // namespace pipesim::cli
