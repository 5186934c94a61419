#include "pipesim/optim.hpp"

#include <string>

#include "pipesim/error.hpp"

namespace pipesim {

std::string_view to_string(UpdateRule r) {
  return r == UpdateRule::plain ? "plain" : "momentum";
}

UpdateRule parse_update_rule(std::string_view name) {
  if (name == "plain" || name == "sgd") return UpdateRule::plain;
  if (name == "momentum") return UpdateRule::momentum;
  throw InputError("unknown update rule '" + std::string(name) + "'");
}

OptimState::OptimState(double eta, double gamma, const Params& like, UpdateRule rule)
    : eta_(eta), gamma_(gamma), rule_(rule), v_(Params::zeros_like(like)) {
  if (!(eta >= 0.0)) throw InputError("learning rate must be non-negative");
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw InputError("decay factor gamma must lie in (0, 1], got " + std::to_string(gamma));
  }
}

const Params& OptimState::update_smoothed(const Params& g) {
  require_same_shape(v_, g, "update_smoothed");
  for (std::size_t i = 0; i < v_.layers.size(); ++i) {
    auto blend = [this](Tensor& v, const Tensor& grad) {
      auto vs = v.data();
      auto gs = grad.data();
      for (std::size_t j = 0; j < vs.size(); ++j) vs[j] = gamma_ * vs[j] + (1.0 - gamma_) * gs[j];
    };
    blend(v_.layers[i].weight, g.layers[i].weight);
    blend(v_.layers[i].bias, g.layers[i].bias);
  }
  return v_;
}

void OptimState::step(Params& params, const Params& g) {
  require_same_shape(params, g, "step");
  update_smoothed(g);
  axpy(-eta_, rule_ == UpdateRule::momentum ? v_ : g, params);
}

Params sgd_step(OptimState& state, const Params& params, const Params& g) {
  require_same_shape(params, g, "sgd_step");
  state.update_smoothed(g);
  Params next = params;
  axpy(-state.eta(), g, next);
  return next;
}

int version_difference(const PredictionContext& ctx) {
  const int k = ctx.device;
  const int n = ctx.device_count;
  if (n < 1 || k < 0 || k >= n) {
    throw InputError("invalid prediction context: device " + std::to_string(k) + " of " +
                     std::to_string(n));
  }
  return ctx.direction == PassDirection::forward ? k / 2 + n - k - 1 : k / 2;
}

Params predict_weights(const Params& params, const OptimState& state, int s) {
  if (s < 0) throw InputError("version difference must be non-negative");
  if (s == 0) return params;
  Params predicted = params;
  axpy(-static_cast<double>(s) * state.eta(), state.smoothed(), predicted);
  return predicted;
}

}  // namespace pipesim
