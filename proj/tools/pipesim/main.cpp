#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pipesim/commands.hpp"
#include "pipesim/error.hpp"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitDiverged = 3;

struct Overrides {
  std::string config;
  std::optional<std::string> strategy;
  std::optional<std::size_t> devices;
  std::optional<double> gamma;
  std::optional<double> lr;
  std::optional<std::size_t> batch;
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> eval_every;
  std::optional<std::string> out;
  bool trace = false;
};

void add_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "JSON run config");
  cmd->add_option("--strategy", o.strategy, "single|data_parallel|vanilla|stash|spectrain");
  cmd->add_option("--devices", o.devices, "pipeline stages or replicas");
  cmd->add_option("--gamma", o.gamma, "smoothing factor in (0, 1]");
  cmd->add_option("--lr", o.lr, "learning rate");
  cmd->add_option("--batch", o.batch, "mini-batch size");
  cmd->add_option("--steps", o.steps, "training steps");
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--eval-every", o.eval_every, "steps between metrics rows");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_flag("--trace", o.trace, "also write trace.csv and traffic.csv");
}

pipesim::cli::RunConfig resolve(const Overrides& o) {
  using namespace pipesim;
  cli::RunConfig c = o.config.empty() ? cli::RunConfig{} : cli::load_config(o.config);
  if (o.strategy) c.strategy = parse_strategy(*o.strategy);
  if (o.devices) c.devices = *o.devices;
  if (o.gamma) c.gamma = *o.gamma;
  if (o.lr) c.lr = *o.lr;
  if (o.batch) c.batch = *o.batch;
  if (o.steps) c.steps = *o.steps;
  if (o.seed) c.seed = *o.seed;
  if (o.eval_every) c.eval_every = *o.eval_every;
  if (o.out) c.out = *o.out;
  if (o.trace) c.trace = true;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pipesim: logical-time simulator of pipelined DNN training"};
  app.require_subcommand(1);
  Overrides o;
  auto* train = app.add_subcommand("train", "train one strategy");
  auto* compare = app.add_subcommand("compare", "train every configured strategy");
  auto* rmse = app.add_subcommand("rmse", "prediction vs stale weight error");
  auto* cost = app.add_subcommand("costmodel", "data vs model parallel step breakdown");
  auto* trace = app.add_subcommand("trace", "print the event trace as csv");
  for (auto* cmd : {train, compare, rmse, cost, trace}) add_flags(cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    const auto c = resolve(o);
    using namespace pipesim::cli;
    if (*train) return cmd_train(c, std::cout);
    if (*compare) return cmd_compare(c, std::cout);
    if (*rmse) return cmd_rmse(c, std::cout);
    if (*cost) return cmd_costmodel(c, std::cout);
    return cmd_trace(c, std::cout);
  } catch (const pipesim::DivergedError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
