#include "pipesim/executor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <optional>
#include <sstream>

#include "pipesim/error.hpp"

namespace pipesim {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::single: return "single";
    case Strategy::data_parallel: return "data_parallel";
    case Strategy::vanilla: return "vanilla";
    case Strategy::stash: return "stash";
    case Strategy::spectrain: return "spectrain";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "single") return Strategy::single;
  if (name == "data_parallel" || name == "dp") return Strategy::data_parallel;
  if (name == "vanilla") return Strategy::vanilla;
  if (name == "stash" || name == "pipedream") return Strategy::stash;
  if (name == "spectrain") return Strategy::spectrain;
  throw InputError("unknown strategy '" + std::string(name) + "'");
}

bool is_pipelined(Strategy s) {
  return s == Strategy::vanilla || s == Strategy::stash || s == Strategy::spectrain;
}

std::string_view to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::activation: return "activation";
    case PayloadKind::gradient: return "gradient";
    case PayloadKind::weight_sync: return "weight_sync";
  }
  return "?";
}

std::size_t TrafficLog::total_elements() const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.elements;
  return n;
}

std::size_t TrafficLog::total_elements(PayloadKind kind) const {
  std::size_t n = 0;
  for (const auto& r : records)
    if (r.kind == kind) n += r.elements;
  return n;
}

std::size_t TrafficLog::elements_for_minibatch(std::int64_t minibatch) const {
  std::size_t n = 0;
  for (const auto& r : records)
    if (r.minibatch == minibatch) n += r.elements;
  return n;
}

namespace {

void write_endpoint(std::ostream& out, int id) {
  if (id == kParameterServer) {
    out << "ps";
  } else {
    out << id;
  }
}

}  // namespace

void TrafficLog::write_csv(std::ostream& out) const {
  out << "src,dst,elements,kind,minibatch\n";
  for (const auto& r : records) {
    write_endpoint(out, r.src);
    out << ',';
    write_endpoint(out, r.dst);
    out << ',' << r.elements << ',' << to_string(r.kind) << ',' << r.minibatch << '\n';
  }
}

void write_trace(std::ostream& out, const std::vector<TaskEvent>& events) {
  out << "slot,device,direction,minibatch,version_used,version_current\n";
  for (const auto& e : events) {
    out << e.slot << ',' << e.device << ',' << (e.direction == PassDirection::forward ? 'F' : 'B')
        << ',' << e.minibatch << ',' << e.version_used << ',' << e.version_current << '\n';
  }
}

std::string emit_trace(const std::vector<TaskEvent>& events) {
  std::ostringstream out;
  write_trace(out, events);
  return out.str();
}

std::uint64_t weights_digest(const Params& params) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&h](const Tensor& t) {
    for (double x : t.data()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &x, sizeof x);
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001B3ULL;
      }
    }
  };
  for (const auto& l : params.layers) {
    mix(l.weight);
    mix(l.bias);
  }
  return h;
}

Device::Device(int index, StageRange range, Params params, const TrainOptions& opts)
    : index(index),
      range(range),
      params(std::move(params)),
      optim(opts.eta, opts.gamma, this->params, opts.rule) {}

ChosenWeights choose_task_weights(Device& device, std::int64_t minibatch, PassDirection direction,
                                  Strategy strategy, int device_count) {
  switch (strategy) {
    case Strategy::stash: {
      if (direction == PassDirection::forward) {
        if (device.stash.contains(minibatch)) {
          throw InvariantError("device " + std::to_string(device.index) +
                               " already stashed weights for mini-batch " +
                               std::to_string(minibatch));
        }
        device.stash.emplace(minibatch, StashEntry{device.version, device.params});
        if (static_cast<int>(device.stash.size()) > device_count) {
          throw InvariantError("stash depth on device " + std::to_string(device.index) +
                               " exceeds the pipeline depth");
        }
        return {device.params, device.version};
      }
      auto it = device.stash.find(minibatch);
      if (it == device.stash.end()) {
        throw InvariantError("device " + std::to_string(device.index) +
                             " has no stashed weights for mini-batch " + std::to_string(minibatch));
      }
      ChosenWeights chosen{std::move(it->second.params), it->second.version};
      device.stash.erase(it);
      return chosen;
    }
    case Strategy::spectrain: {
      const int s = version_difference({device.index, device_count, direction});
      return {predict_weights(device.params, device.optim, s), device.version + s};
    }
    case Strategy::single:
    case Strategy::data_parallel:
    case Strategy::vanilla:
      break;
  }
  return {device.params, device.version};
}

namespace {

double checked_loss(double loss, std::int64_t step) {
  if (!std::isfinite(loss)) {
    throw DivergedError(step, "training diverged: non-finite loss at step " + std::to_string(step));
  }
  return loss;
}

void notify(const TrainOptions& opts, std::int64_t step, double loss,
            std::function<Params()> params, std::function<Params()> smoothed) {
  if (!opts.on_step) return;
  StepEvent ev{step, loss, std::move(params), std::move(smoothed)};
  opts.on_step(ev);
}

}  // namespace

RunResult train_single(const ModelSpec& spec, Params init, BatchStream& stream,
                       const TrainOptions& opts) {
  spec.validate();
  check_params(spec, 0, init);
  if (init.layers.size() != spec.layers.size()) throw ShapeError("init params must cover the model");

  Device dev(0, {0, spec.layers.size()}, std::move(init), opts);
  RunResult result;
  for (std::size_t t = 0; t < opts.steps; ++t) {
    const auto step = static_cast<std::int64_t>(t) + 1;
    const auto mb = static_cast<std::int64_t>(t);
    const std::uint64_t digest = weights_digest(dev.params);
    result.trace.push_back({2 * mb, 0, PassDirection::forward, mb, dev.version, dev.version, digest});
    result.trace.push_back({2 * mb + 1, 0, PassDirection::backward, mb, dev.version, dev.version, digest});

    Batch batch = stream.next();
    LossAndGrad lg = loss_and_grad(spec, dev.params, batch.x, batch.y);
    checked_loss(lg.loss, step);
    dev.optim.step(dev.params, lg.grads);
    ++dev.version;
    result.steps.push_back({step, lg.loss});
    notify(opts, step, lg.loss, [&dev] { return dev.params; },
           [&dev] { return dev.optim.smoothed(); });
  }
  result.final_params = std::move(dev.params);
  return result;
}

namespace {

struct Delivery {
  int device;
  PassDirection direction;
  std::int64_t minibatch;
  Tensor payload;
};

struct DeviceQueues {
  std::map<std::int64_t, Tensor> forward_in;   // activations from the previous stage
  std::map<std::int64_t, Tensor> backward_in;  // gradients from the next stage, or own output on the last stage
  std::map<std::int64_t, ActivationPack> caches;
  std::int64_t next_forward = 0;
  std::int64_t next_backward = 0;
};

}  // namespace

RunResult run_schedule(const ModelSpec& spec, const StagePlan& plan, Strategy strategy,
                       Params init, BatchStream& stream, const TrainOptions& opts) {
  spec.validate();
  if (init.layers.size() != spec.layers.size()) throw ShapeError("init params must cover the model");
  check_params(spec, 0, init);
  if (strategy == Strategy::data_parallel) {
    throw InputError("run_schedule handles pipelined strategies; use run_data_parallel");
  }
  const int n = static_cast<int>(plan.device_count);
  if (n < 1 || plan.cuts.size() + 1 != plan.device_count) throw InputError("malformed stage plan");

  std::vector<Device> devices;
  devices.reserve(plan.device_count);
  for (int k = 0; k < n; ++k) {
    const StageRange r = plan.stage(static_cast<std::size_t>(k), spec.layers.size());
    devices.emplace_back(k, r, init.slice(r.first, r.last), opts);
  }
  std::vector<DeviceQueues> queues(plan.device_count);
  std::map<std::int64_t, Batch> batches;
  std::map<std::int64_t, double> losses;

  const auto total = static_cast<std::int64_t>(opts.steps);
  std::int64_t completed = 0;
  RunResult result;

  auto assemble = [&devices] {
    std::vector<Params> parts;
    for (const auto& d : devices) parts.push_back(d.params);
    return Params::concat(parts);
  };
  auto assemble_smoothed = [&devices] {
    std::vector<Params> parts;
    for (const auto& d : devices) parts.push_back(d.optim.smoothed());
    return Params::concat(parts);
  };

  for (std::int64_t slot = 0; completed < total; ++slot) {
    std::vector<Delivery> deliveries;
    std::vector<std::int64_t> finished;
    bool any_task = false;

    for (int k = 0; k < n; ++k) {
      Device& dev = devices[static_cast<std::size_t>(k)];
      DeviceQueues& q = queues[static_cast<std::size_t>(k)];

      const bool backward_ready =
          q.next_backward < total && q.backward_in.contains(q.next_backward);
      const bool forward_ready =
          q.next_forward < total &&
          (k == 0 ? q.next_forward - completed < n : q.forward_in.contains(q.next_forward));
      if (!backward_ready && !forward_ready) continue;
      any_task = true;

      if (backward_ready) {
        const std::int64_t mb = q.next_backward++;
        ChosenWeights w = choose_task_weights(dev, mb, PassDirection::backward, strategy, n);
        result.trace.push_back({slot, k, PassDirection::backward, mb, w.version, dev.version,
                                weights_digest(w.params)});

        auto cache = q.caches.extract(mb);
        if (cache.empty()) {
          throw InvariantError("backward of mini-batch " + std::to_string(mb) + " on device " +
                               std::to_string(k) + " has no forward cache");
        }
        Tensor grad_out = std::move(q.backward_in.extract(mb).mapped());
        if (k == n - 1) {
          LossResult head = loss_head(spec.loss, grad_out, batches.at(mb).y);
          losses[mb] = checked_loss(head.loss, mb + 1);
          grad_out = std::move(head.output_grad);
        }
        BackwardResult br = backward_stage(spec, dev.range, w.params, cache.mapped(), grad_out);
        dev.optim.step(dev.params, br.grads);
        ++dev.version;

        if (k > 0) {
          result.traffic.records.push_back(
              {k, k - 1, br.input_grad.size(), PayloadKind::gradient, mb});
          deliveries.push_back({k - 1, PassDirection::backward, mb, std::move(br.input_grad)});
        } else {
          finished.push_back(mb);
        }
        continue;
      }

      const std::int64_t mb = q.next_forward++;
      Tensor input;
      if (k == 0) {
        Batch b = stream.next();
        input = b.x;
        batches.emplace(mb, std::move(b));
      } else {
        input = std::move(q.forward_in.extract(mb).mapped());
      }
      ChosenWeights w = choose_task_weights(dev, mb, PassDirection::forward, strategy, n);
      result.trace.push_back({slot, k, PassDirection::forward, mb, w.version, dev.version,
                              weights_digest(w.params)});
      ForwardResult fr = forward_stage(spec, dev.range, w.params, input);
      q.caches.emplace(mb, std::move(fr.pack));
      if (k < n - 1) {
        result.traffic.records.push_back({k, k + 1, fr.output.size(), PayloadKind::activation, mb});
        deliveries.push_back({k + 1, PassDirection::forward, mb, std::move(fr.output)});
      } else {
        deliveries.push_back({k, PassDirection::backward, mb, std::move(fr.output)});
      }
    }

    if (!any_task) {
      throw InvariantError("pipeline stalled at slot " + std::to_string(slot));
    }

    // Messages sent in this slot become visible in the next one.
    for (auto& d : deliveries) {
      auto& q = queues[static_cast<std::size_t>(d.device)];
      auto& box = d.direction == PassDirection::forward ? q.forward_in : q.backward_in;
      box.emplace(d.minibatch, std::move(d.payload));
    }

    for (std::int64_t mb : finished) {
      ++completed;
      if (mb + 1 != completed) {
        throw InvariantError("mini-batches completed out of order");
      }
      const double loss = losses.at(mb);
      losses.erase(mb);
      batches.erase(mb);
      result.steps.push_back({completed, loss});
      notify(opts, completed, loss, assemble, assemble_smoothed);
    }
  }

  for (const auto& d : devices) {
    if (!d.stash.empty()) throw InvariantError("stash not drained at end of run");
  }
  result.final_params = assemble();
  return result;
}

RunResult run_data_parallel(const ModelSpec& spec, std::size_t replicas, Params init,
                            BatchStream& stream, const TrainOptions& opts) {
  spec.validate();
  if (init.layers.size() != spec.layers.size()) throw ShapeError("init params must cover the model");
  check_params(spec, 0, init);
  if (replicas == 0) throw InputError("data parallelism needs at least one replica");

  Device server(kParameterServer, {0, spec.layers.size()}, std::move(init), opts);
  const std::size_t param_elements = server.params.element_count();
  RunResult result;

  for (std::size_t t = 0; t < opts.steps; ++t) {
    const auto step = static_cast<std::int64_t>(t) + 1;
    const auto mb = static_cast<std::int64_t>(t);
    Batch batch = stream.next();
    const std::size_t rows = batch.rows.size();
    if (rows % replicas != 0) {
      throw InputError("mini-batch of " + std::to_string(rows) + " rows cannot be split across " +
                       std::to_string(replicas) + " replicas");
    }
    const std::size_t shard = rows / replicas;
    const std::uint64_t digest = weights_digest(server.params);

    std::optional<Params> aggregate;
    double loss = 0.0;
    for (std::size_t r = 0; r < replicas; ++r) {
      const int id = static_cast<int>(r);
      result.trace.push_back({2 * mb, id, PassDirection::forward, mb, server.version,
                              server.version, digest});
      result.trace.push_back({2 * mb + 1, id, PassDirection::backward, mb, server.version,
                              server.version, digest});

      Tensor x({shard, batch.x.cols()});
      Tensor y({shard});
      for (std::size_t i = 0; i < shard; ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) x.at(i, j) = batch.x.at(r * shard + i, j);
        y[i] = batch.y[r * shard + i];
      }
      LossAndGrad lg = loss_and_grad(spec, server.params, x, y);
      loss += lg.loss;
      if (!aggregate) {
        aggregate = std::move(lg.grads);
      } else {
        axpy(1.0, lg.grads, *aggregate);
      }
      result.traffic.records.push_back({id, kParameterServer, param_elements,
                                        PayloadKind::weight_sync, mb});
    }
    if (replicas > 1) {
      aggregate = scale(*aggregate, 1.0 / static_cast<double>(replicas));
      loss /= static_cast<double>(replicas);
    }
    checked_loss(loss, step);
    server.optim.step(server.params, *aggregate);
    ++server.version;
    for (std::size_t r = 0; r < replicas; ++r) {
      result.traffic.records.push_back({kParameterServer, static_cast<int>(r), param_elements,
                                        PayloadKind::weight_sync, mb});
    }
    result.steps.push_back({step, loss});
    notify(opts, step, loss, [&server] { return server.params; },
           [&server] { return server.optim.smoothed(); });
  }
  result.final_params = std::move(server.params);
  return result;
}

}  // namespace pipesim
