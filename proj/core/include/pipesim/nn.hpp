#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pipesim/rng.hpp"
#include "pipesim/tensor.hpp"

namespace pipesim {

enum class Activation { none, relu, tanh };
enum class LossKind { softmax_xent, mse };

std::string_view to_string(Activation a);
std::string_view to_string(LossKind l);
Activation parse_activation(std::string_view name);
LossKind parse_loss(std::string_view name);

struct LayerSpec {
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  Activation activation = Activation::none;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelSpec {
  std::vector<LayerSpec> layers;
  LossKind loss = LossKind::softmax_xent;

  std::size_t input_dim() const { return layers.front().in_dim; }
  std::size_t output_dim() const { return layers.back().out_dim; }
  // Throws InputError unless non-empty with positive, chained dims.
  void validate() const;

  // Dense stack in -> hidden... -> out; hidden layers use `hidden_act`, the
  // output layer has no activation.
  static ModelSpec stacked(std::size_t in, const std::vector<std::size_t>& hidden,
                           std::size_t out, Activation hidden_act = Activation::relu,
                           LossKind loss = LossKind::softmax_xent);
};

struct LayerParams {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

// Parameters (or anything shaped like them: gradients, smoothed gradients)
// for a contiguous run of layers.
struct Params {
  std::vector<LayerParams> layers;

  std::size_t element_count() const;
  std::vector<double> flatten() const;
  bool all_finite() const;

  static Params zeros_like(const Params& other);
  // Layers [first, last) as an independent copy.
  Params slice(std::size_t first, std::size_t last) const;
  // Concatenates stage params back into whole-model order.
  static Params concat(const std::vector<Params>& parts);

  friend bool operator==(const Params&, const Params&) = default;
};

// Shape-checked elementwise helpers over matching Params.
void require_same_shape(const Params& a, const Params& b, const char* op);
// y += alpha * x
void axpy(double alpha, const Params& x, Params& y);
Params scale(const Params& p, double factor);
double rmse(const Params& a, const Params& b);

// Uniform(-r, r) weights with r = sqrt(6 / (in + out)); zero biases.
Params init_params(const ModelSpec& spec, Rng& rng);
// Throws ShapeError unless params match the layer range of spec.
void check_params(const ModelSpec& spec, std::size_t first_layer, const Params& params);

// Half-open layer range [first, last) owned by one pipeline stage.
struct StageRange {
  std::size_t first = 0;
  std::size_t last = 0;

  std::size_t size() const noexcept { return last - first; }
  friend bool operator==(const StageRange&, const StageRange&) = default;
};

// Per-layer values cached by the forward pass for use by backward.
struct ActivationPack {
  std::vector<Tensor> inputs;          // input to each layer, [batch x in]
  std::vector<Tensor> preactivations;  // x*W + b, [batch x out]

  std::size_t batch() const { return inputs.empty() ? 0 : inputs.front().rows(); }
};

struct ForwardResult {
  Tensor output;
  ActivationPack pack;
};

struct BackwardResult {
  Tensor input_grad;  // d loss / d stage input
  Params grads;       // d loss / d stage params
};

struct LossResult {
  double loss = 0.0;
  Tensor output_grad;  // d loss / d model output
};

ForwardResult forward_stage(const ModelSpec& spec, StageRange range, const Params& params,
                            const Tensor& x);
BackwardResult backward_stage(const ModelSpec& spec, StageRange range, const Params& params,
                              const ActivationPack& pack, const Tensor& output_grad);

// Batch-mean loss on model outputs. For softmax_xent, targets is a [batch]
// vector of integer class ids; for mse it has the output's shape.
LossResult loss_head(LossKind kind, const Tensor& output, const Tensor& targets);

ForwardResult forward(const ModelSpec& spec, const Params& params, const Tensor& x);

struct LossAndGrad {
  double loss = 0.0;
  Params grads;
};
LossAndGrad loss_and_grad(const ModelSpec& spec, const Params& params, const Tensor& x,
                          const Tensor& targets);

// Row-wise argmax of the model output.
std::vector<std::size_t> predict_classes(const Tensor& output);

}  // namespace pipesim
