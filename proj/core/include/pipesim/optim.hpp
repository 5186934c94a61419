#pragma once

#include <string_view>

#include "pipesim/nn.hpp"

namespace pipesim {

// Step direction used when applying an update.
//   plain:    W' = W - eta * g
//   momentum: W' = W - eta * v'   (v' is the freshly smoothed gradient)
enum class UpdateRule { plain, momentum };

std::string_view to_string(UpdateRule r);
UpdateRule parse_update_rule(std::string_view name);

inline constexpr double kDefaultGamma = 0.9;

// Learning rate, decay factor, and the smoothed gradient v for one device's
// parameters. v starts at zero.
class OptimState {
 public:
  OptimState(double eta, double gamma, const Params& like,
             UpdateRule rule = UpdateRule::momentum);

  double eta() const noexcept { return eta_; }
  double gamma() const noexcept { return gamma_; }
  UpdateRule rule() const noexcept { return rule_; }
  const Params& smoothed() const noexcept { return v_; }

  // v <- gamma * v + (1 - gamma) * g
  const Params& update_smoothed(const Params& g);

  // Applies one update to params using the configured rule. Always refreshes v.
  void step(Params& params, const Params& g);

 private:
  double eta_;
  double gamma_;
  UpdateRule rule_;
  Params v_;
};

// One plain SGD step W - eta * g. Also folds g into the smoothed gradient.
Params sgd_step(OptimState& state, const Params& params, const Params& g);

enum class PassDirection { forward, backward };

struct PredictionContext {
  int device = 0;        // k, 0-based
  int device_count = 1;  // N
  PassDirection direction = PassDirection::forward;
};

// Number of weight versions between a task on device k and the completion of
// its mini-batch's round trip:
//   forward:  floor(k/2) + N - k - 1
//   backward: floor(k/2)
int version_difference(const PredictionContext& ctx);

// W - s * eta * v: the weights expected s updates from now if the smoothed
// gradient holds steady.
Params predict_weights(const Params& params, const OptimState& state, int s);

}  // namespace pipesim
