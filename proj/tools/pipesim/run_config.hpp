#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pipesim/costmodel.hpp"
#include "pipesim/data.hpp"
#include "pipesim/executor.hpp"
#include "pipesim/nn.hpp"
#include "pipesim/optim.hpp"

namespace pipesim::cli {

struct DataConfig {
  std::string kind = "blobs";  // blobs | moons | csv
  std::optional<std::uint64_t> seed;  // defaults to the run seed
  std::size_t n_train = 2048;
  std::size_t n_val = 512;
  std::size_t dim = 16;
  std::size_t classes = 4;
  double noise = 0.6;
  std::string train_csv;
  std::string val_csv;
};

// Everything that determines a run. Loaded from a JSON file, then individual
// fields may be overridden from the command line.
struct RunConfig {
  std::optional<ModelSpec> model;  // default: input -> 64 -> 64 -> 64 -> classes, relu
  DataConfig data;
  Strategy strategy = Strategy::spectrain;
  std::vector<Strategy> strategies = {Strategy::data_parallel, Strategy::vanilla, Strategy::stash,
                                      Strategy::spectrain};
  std::size_t devices = 4;  // pipeline stages, or replicas for data_parallel
  std::size_t batch = 128;
  double lr = 0.05;
  double gamma = kDefaultGamma;
  UpdateRule update_rule = UpdateRule::momentum;
  std::size_t steps = 1000;
  std::uint64_t seed = 0;
  std::size_t eval_every = 20;
  std::optional<std::vector<std::size_t>> cuts;
  std::vector<int> rmse_s = {1, 2, 3};
  HardwareProfile hardware;
  std::filesystem::path out = "out";
  bool trace = false;

  // Model the run trains: the explicit one, or the default stack sized to
  // the data.
  ModelSpec resolved_model(std::size_t input_dim, std::size_t classes) const;
  void validate() const;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace pipesim::cli
