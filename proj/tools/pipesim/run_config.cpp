#include "pipesim/run_config.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "pipesim/error.hpp"

namespace pipesim::cli {

using nlohmann::json;

namespace {

ModelSpec model_from_json(const json& j) {
  ModelSpec spec;
  spec.loss = parse_loss(j.value("loss", "softmax_xent"));
  if (j.contains("layers")) {
    for (const auto& l : j.at("layers")) {
      spec.layers.push_back({l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>(),
                             parse_activation(l.value("activation", "none"))});
    }
  } else {
    const auto hidden = j.value("hidden", std::vector<std::size_t>{});
    spec = ModelSpec::stacked(j.at("input_dim").get<std::size_t>(), hidden,
                              j.at("output_dim").get<std::size_t>(),
                              parse_activation(j.value("activation", "relu")), spec.loss);
  }
  spec.validate();
  return spec;
}

json model_to_json(const ModelSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) {
    layers.push_back({{"in", l.in_dim}, {"out", l.out_dim},
                      {"activation", std::string(to_string(l.activation))}});
  }
  return {{"layers", layers}, {"loss", std::string(to_string(spec.loss))}};
}

template <typename T>
void read(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

ModelSpec RunConfig::resolved_model(std::size_t input_dim, std::size_t classes) const {
  if (model) {
    if (model->input_dim() != input_dim) {
      throw InputError("model expects " + std::to_string(model->input_dim()) +
                       " input features but the data has " + std::to_string(input_dim));
    }
    return *model;
  }
  return ModelSpec::stacked(input_dim, {64, 64, 64}, classes, Activation::relu);
}

void RunConfig::validate() const {
  if (devices == 0) throw InputError("devices must be at least 1");
  if (batch == 0) throw InputError("batch must be positive");
  if (!(lr >= 0.0)) throw InputError("lr must be non-negative");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InputError("gamma must lie in (0, 1]");
  if (eval_every == 0) throw InputError("eval_every must be positive");
  if (data.kind != "blobs" && data.kind != "moons" && data.kind != "csv") {
    throw InputError("data.kind must be blobs, moons or csv");
  }
  if (data.kind == "csv" && data.train_csv.empty()) throw InputError("data.train_csv is required");
  if (data.kind != "csv" && (data.n_train < batch)) {
    throw InputError("data.n_train must be at least the batch size");
  }
  if (strategy == Strategy::data_parallel && batch % devices != 0) {
    throw InputError("batch " + std::to_string(batch) + " is not divisible by " +
                     std::to_string(devices) + " replicas");
  }
  if (cuts && cuts->size() + 1 != devices) {
    throw InputError("cuts must list devices - 1 boundaries");
  }
  for (int s : rmse_s)
    if (s < 0) throw InputError("rmse_s entries must be non-negative");
  if (model) model->validate();
  hardware.validate();
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  if (j.contains("model")) c.model = model_from_json(j.at("model"));
  if (j.contains("data")) {
    const json& d = j.at("data");
    read(d, "kind", c.data.kind);
    if (d.contains("seed")) c.data.seed = d.at("seed").get<std::uint64_t>();
    read(d, "n_train", c.data.n_train);
    read(d, "n_val", c.data.n_val);
    read(d, "dim", c.data.dim);
    read(d, "classes", c.data.classes);
    read(d, "noise", c.data.noise);
    read(d, "train_csv", c.data.train_csv);
    read(d, "val_csv", c.data.val_csv);
  }
  if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy").get<std::string>());
  if (j.contains("strategies")) {
    c.strategies.clear();
    for (const auto& s : j.at("strategies")) c.strategies.push_back(parse_strategy(s.get<std::string>()));
  }
  read(j, "devices", c.devices);
  read(j, "batch", c.batch);
  read(j, "lr", c.lr);
  read(j, "gamma", c.gamma);
  if (j.contains("update_rule")) c.update_rule = parse_update_rule(j.at("update_rule").get<std::string>());
  read(j, "steps", c.steps);
  read(j, "seed", c.seed);
  read(j, "eval_every", c.eval_every);
  if (j.contains("cuts")) c.cuts = j.at("cuts").get<std::vector<std::size_t>>();
  read(j, "rmse_s", c.rmse_s);
  if (j.contains("hardware")) {
    const json& h = j.at("hardware");
    read(h, "compute_rate", c.hardware.compute_rate);
    if (h.contains("bandwidth")) {
      const json& b = h.at("bandwidth");
      c.hardware.bandwidth = b.is_string() && b.get<std::string>() == "inf"
                                 ? std::numeric_limits<double>::infinity()
                                 : b.get<double>();
    }
    read(h, "simultaneous_p2p", c.hardware.simultaneous_p2p);
  }
  if (j.contains("out")) c.out = j.at("out").get<std::string>();
  read(j, "trace", c.trace);
  return c;
}

json config_to_json(const RunConfig& c) {
  json j;
  if (c.model) j["model"] = model_to_json(*c.model);
  json d = {{"kind", c.data.kind},       {"n_train", c.data.n_train}, {"n_val", c.data.n_val},
            {"dim", c.data.dim},         {"classes", c.data.classes}, {"noise", c.data.noise},
            {"train_csv", c.data.train_csv}, {"val_csv", c.data.val_csv}};
  if (c.data.seed) d["seed"] = *c.data.seed;
  j["data"] = d;
  j["strategy"] = std::string(to_string(c.strategy));
  json strategies = json::array();
  for (Strategy s : c.strategies) strategies.push_back(std::string(to_string(s)));
  j["strategies"] = strategies;
  j["devices"] = c.devices;
  j["batch"] = c.batch;
  j["lr"] = c.lr;
  j["gamma"] = c.gamma;
  j["update_rule"] = std::string(to_string(c.update_rule));
  j["steps"] = c.steps;
  j["seed"] = c.seed;
  j["eval_every"] = c.eval_every;
  if (c.cuts) j["cuts"] = *c.cuts;
  j["rmse_s"] = c.rmse_s;
  j["hardware"] = {{"compute_rate", c.hardware.compute_rate},
                   {"bandwidth", std::isinf(c.hardware.bandwidth) ? json("inf")
                                                                   : json(c.hardware.bandwidth)},
                   {"simultaneous_p2p", c.hardware.simultaneous_p2p}};
  j["out"] = c.out.string();
  j["trace"] = c.trace;
  return j;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path.string() + "'");
  try {
    return config_from_json(json::parse(in, nullptr, true, true));
  } catch (const json::exception& e) {
    throw InputError("config '" + path.string() + "': " + e.what());
  }
}

}  // namespace pipesim::cli
