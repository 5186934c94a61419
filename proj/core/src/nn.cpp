#include "pipesim/nn.hpp"

#include <algorithm>
#include <cmath>

#include "pipesim/error.hpp"

namespace pipesim {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

std::string_view to_string(LossKind l) {
  switch (l) {
    case LossKind::softmax_xent: return "softmax_xent";
    case LossKind::mse: return "mse";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "none" || name == "linear") return Activation::none;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw InputError("unknown activation '" + std::string(name) + "'");
}

LossKind parse_loss(std::string_view name) {
  if (name == "softmax_xent") return LossKind::softmax_xent;
  if (name == "mse") return LossKind::mse;
  throw InputError("unknown loss '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
  if (layers.empty()) throw InputError("model has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].in_dim == 0 || layers[i].out_dim == 0) {
      throw InputError("layer " + std::to_string(i) + " has a zero dimension");
    }
    if (i > 0 && layers[i].in_dim != layers[i - 1].out_dim) {
      throw InputError("layer " + std::to_string(i) + " expects " +
                       std::to_string(layers[i].in_dim) + " inputs but layer " +
                       std::to_string(i - 1) + " produces " +
                       std::to_string(layers[i - 1].out_dim));
    }
  }
}

ModelSpec ModelSpec::stacked(std::size_t in, const std::vector<std::size_t>& hidden,
                             std::size_t out, Activation hidden_act, LossKind loss) {
  ModelSpec spec;
  spec.loss = loss;
  std::size_t prev = in;
  for (std::size_t h : hidden) {
    spec.layers.push_back({prev, h, hidden_act});
    prev = h;
  }
  spec.layers.push_back({prev, out, Activation::none});
  spec.validate();
  return spec;
}

std::size_t Params::element_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

std::vector<double> Params::flatten() const {
  std::vector<double> flat;
  flat.reserve(element_count());
  for (const auto& l : layers) {
    flat.insert(flat.end(), l.weight.data().begin(), l.weight.data().end());
    flat.insert(flat.end(), l.bias.data().begin(), l.bias.data().end());
  }
  return flat;
}

bool Params::all_finite() const {
  return std::all_of(layers.begin(), layers.end(), [](const LayerParams& l) {
    return l.weight.all_finite() && l.bias.all_finite();
  });
}

Params Params::zeros_like(const Params& other) {
  Params out;
  out.layers.reserve(other.layers.size());
  for (const auto& l : other.layers) {
    out.layers.push_back({Tensor::zeros_like(l.weight), Tensor::zeros_like(l.bias)});
  }
  return out;
}

Params Params::slice(std::size_t first, std::size_t last) const {
  if (first > last || last > layers.size()) {
    throw InputError("Params::slice range [" + std::to_string(first) + ", " +
                     std::to_string(last) + ") out of bounds");
  }
  Params out;
  out.layers.assign(layers.begin() + static_cast<std::ptrdiff_t>(first),
                    layers.begin() + static_cast<std::ptrdiff_t>(last));
  return out;
}

Params Params::concat(const std::vector<Params>& parts) {
  Params out;
  for (const auto& p : parts) out.layers.insert(out.layers.end(), p.layers.begin(), p.layers.end());
  return out;
}

void require_same_shape(const Params& a, const Params& b, const char* op) {
  if (a.layers.size() != b.layers.size()) {
    throw ShapeError(std::string(op) + ": layer count mismatch " +
                     std::to_string(a.layers.size()) + " vs " + std::to_string(b.layers.size()));
  }
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    require_same_shape(a.layers[i].weight, b.layers[i].weight, op);
    require_same_shape(a.layers[i].bias, b.layers[i].bias, op);
  }
}

void axpy(double alpha, const Params& x, Params& y) {
  require_same_shape(x, y, "axpy");
  for (std::size_t i = 0; i < x.layers.size(); ++i) {
    axpy(alpha, x.layers[i].weight, y.layers[i].weight);
    axpy(alpha, x.layers[i].bias, y.layers[i].bias);
  }
}

Params scale(const Params& p, double factor) {
  Params out;
  out.layers.reserve(p.layers.size());
  for (const auto& l : p.layers) out.layers.push_back({scale(l.weight, factor), scale(l.bias, factor)});
  return out;
}

double rmse(const Params& a, const Params& b) {
  require_same_shape(a, b, "rmse");
  return rmse(a.flatten(), b.flatten());
}

Params init_params(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  Params params;
  params.layers.reserve(spec.layers.size());
  for (const auto& layer : spec.layers) {
    const double r = std::sqrt(6.0 / static_cast<double>(layer.in_dim + layer.out_dim));
    Tensor w({layer.in_dim, layer.out_dim});
    for (double& x : w.data()) x = rng.uniform(-r, r);
    params.layers.push_back({std::move(w), Tensor({layer.out_dim})});
  }
  return params;
}

void check_params(const ModelSpec& spec, std::size_t first_layer, const Params& params) {
  if (first_layer + params.layers.size() > spec.layers.size()) {
    throw ShapeError("params cover more layers than the model has");
  }
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const LayerSpec& ls = spec.layers[first_layer + i];
    const LayerParams& lp = params.layers[i];
    if (lp.weight.shape() != Shape{ls.in_dim, ls.out_dim} || lp.bias.shape() != Shape{ls.out_dim}) {
      throw ShapeError("layer " + std::to_string(first_layer + i) + " params " +
                       to_string(lp.weight.shape()) + "/" + to_string(lp.bias.shape()) +
                       " do not match spec [" + std::to_string(ls.in_dim) + "x" +
                       std::to_string(ls.out_dim) + "]");
    }
  }
}

namespace {

void check_range(const ModelSpec& spec, StageRange range, const Params& params) {
  if (range.first >= range.last || range.last > spec.layers.size()) {
    throw InputError("stage range [" + std::to_string(range.first) + ", " +
                     std::to_string(range.last) + ") is not a non-empty layer range");
  }
  if (params.layers.size() != range.size()) {
    throw ShapeError("stage covers " + std::to_string(range.size()) + " layers but params have " +
                     std::to_string(params.layers.size()));
  }
  check_params(spec, range.first, params);
}

Tensor activate(Activation a, const Tensor& pre) {
  switch (a) {
    case Activation::relu: return relu(pre);
    case Activation::tanh: return tanh(pre);
    case Activation::none: break;
  }
  return pre;
}

Tensor backprop_activation(Activation a, const Tensor& pre, const Tensor& grad_out) {
  switch (a) {
    case Activation::relu: return hadamard(grad_out, relu_grad(pre));
    case Activation::tanh: return hadamard(grad_out, tanh_grad(pre));
    case Activation::none: break;
  }
  return grad_out;
}

}  // namespace

ForwardResult forward_stage(const ModelSpec& spec, StageRange range, const Params& params,
                            const Tensor& x) {
  check_range(spec, range, params);
  const std::size_t in = spec.layers[range.first].in_dim;
  if (x.rank() != 2 || x.cols() != in) {
    throw ShapeError("stage input " + to_string(x.shape()) + " does not match layer " +
                     std::to_string(range.first) + " input width " + std::to_string(in));
  }
  ForwardResult result;
  result.pack.inputs.reserve(range.size());
  result.pack.preactivations.reserve(range.size());
  Tensor h = x;
  for (std::size_t i = 0; i < range.size(); ++i) {
    const LayerSpec& ls = spec.layers[range.first + i];
    const LayerParams& lp = params.layers[i];
    Tensor pre = add_row(matmul(h, lp.weight), lp.bias);
    Tensor out = activate(ls.activation, pre);
    result.pack.inputs.push_back(std::move(h));
    result.pack.preactivations.push_back(std::move(pre));
    h = std::move(out);
  }
  result.output = std::move(h);
  return result;
}

BackwardResult backward_stage(const ModelSpec& spec, StageRange range, const Params& params,
                              const ActivationPack& pack, const Tensor& output_grad) {
  check_range(spec, range, params);
  if (pack.inputs.size() != range.size() || pack.preactivations.size() != range.size()) {
    throw ShapeError("activation pack does not cover the stage's layers");
  }
  const Tensor& last_pre = pack.preactivations.back();
  if (output_grad.shape() != last_pre.shape()) {
    throw ShapeError("stage output gradient " + to_string(output_grad.shape()) +
                     " does not match stage output " + to_string(last_pre.shape()));
  }
  BackwardResult result;
  result.grads.layers.resize(range.size());
  Tensor grad = output_grad;
  for (std::size_t j = range.size(); j-- > 0;) {
    const LayerSpec& ls = spec.layers[range.first + j];
    const Tensor delta = backprop_activation(ls.activation, pack.preactivations[j], grad);
    result.grads.layers[j].weight = matmul_tn(pack.inputs[j], delta);
    result.grads.layers[j].bias = sum_rows(delta);
    grad = matmul_nt(delta, params.layers[j].weight);
  }
  result.input_grad = std::move(grad);
  return result;
}

LossResult loss_head(LossKind kind, const Tensor& output, const Tensor& targets) {
  if (output.rank() != 2) throw ShapeError("loss expects a [batch x out] output");
  const std::size_t batch = output.rows();
  const std::size_t width = output.cols();
  LossResult result;
  result.output_grad = Tensor(output.shape());

  if (kind == LossKind::mse) {
    if (targets.shape() != output.shape()) {
      throw InputError("mse targets " + to_string(targets.shape()) + " must match output " +
                       to_string(output.shape()));
    }
    const double n = static_cast<double>(output.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < output.size(); ++i) {
      const double d = output[i] - targets[i];
      acc += d * d;
      result.output_grad[i] = 2.0 * d / n;
    }
    result.loss = acc / n;
    return result;
  }

  if (targets.rank() != 1 || targets.size() != batch) {
    throw InputError("softmax_xent targets must be a [" + std::to_string(batch) +
                     "] vector of class ids, got " + to_string(targets.shape()));
  }
  const double inv_batch = 1.0 / static_cast<double>(batch);
  double acc = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const double t = targets[i];
    if (!(t >= 0.0) || t != std::floor(t) || t >= static_cast<double>(width)) {
      throw InputError("class id " + std::to_string(t) + " at row " + std::to_string(i) +
                       " is not an integer in [0, " + std::to_string(width) + ")");
    }
    const auto label = static_cast<std::size_t>(t);
    double max_logit = output.at(i, 0);
    for (std::size_t j = 1; j < width; ++j) max_logit = std::max(max_logit, output.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < width; ++j) denom += std::exp(output.at(i, j) - max_logit);
    const double log_denom = std::log(denom);
    acc += log_denom - (output.at(i, label) - max_logit);
    for (std::size_t j = 0; j < width; ++j) {
      const double p = std::exp(output.at(i, j) - max_logit - log_denom);
      result.output_grad.at(i, j) = (p - (j == label ? 1.0 : 0.0)) * inv_batch;
    }
  }
  result.loss = acc * inv_batch;
  return result;
}

ForwardResult forward(const ModelSpec& spec, const Params& params, const Tensor& x) {
  return forward_stage(spec, {0, spec.layers.size()}, params, x);
}

LossAndGrad loss_and_grad(const ModelSpec& spec, const Params& params, const Tensor& x,
                          const Tensor& targets) {
  const StageRange whole{0, spec.layers.size()};
  ForwardResult fwd = forward_stage(spec, whole, params, x);
  LossResult head = loss_head(spec.loss, fwd.output, targets);
  BackwardResult bwd = backward_stage(spec, whole, params, fwd.pack, head.output_grad);
  return {head.loss, std::move(bwd.grads)};
}

std::vector<std::size_t> predict_classes(const Tensor& output) {
  std::vector<std::size_t> classes(output.rows());
  for (std::size_t i = 0; i < output.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < output.cols(); ++j) {
      if (output.at(i, j) > output.at(i, best)) best = j;
    }
    classes[i] = best;
  }
  return classes;
}

}  // namespace pipesim
