#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "samrank/linalg.hpp"

namespace samrank::nets {

using linalg::Matrix;
using linalg::Vector;

/// Flat parameter vector. Order is fixed per network type and documented on
/// flatten().
using ParamVector = std::vector<double>;

enum class Activation { relu, tanh, abs, gelu, identity };

std::string_view to_string(Activation act);
Activation activation_from_string(std::string_view name);

/// sigma(z). The derivative at the relu/abs kink is defined as 0.
double activate(Activation act, double z);
double activate_derivative(Activation act, double z);

/// f(x) = <a, sigma(W x + b1)> + b2.
struct TwoLayerNet {
  Matrix w;                 // m x d
  Vector a;                 // m
  std::optional<Vector> b1; // m
  std::optional<double> b2;
  Activation act = Activation::relu;

  std::size_t width() const noexcept { return w.rows(); }
  std::size_t input_dim() const noexcept { return w.cols(); }
  bool has_biases() const noexcept { return b1.has_value() || b2.has_value(); }

  /// Throws if the parameter shapes are inconsistent.
  void validate() const;
};

/// Factorized weight of the last Mlp layer: effective weight u * v with
/// u (d_in x h) and v (h x d_out). The layer computes (u v)^T x + bias.
struct Bottleneck {
  Matrix u;
  Matrix v;
  std::size_t inner_dim() const noexcept { return u.cols(); }
};

struct Layer {
  Matrix weight;  // d_out x d_in; empty for a factorized last layer
  Vector bias;    // d_out
  Activation act = Activation::relu;
};

struct Mlp {
  std::vector<Layer> layers;
  std::optional<Bottleneck> bottleneck;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t layer_input_dim(std::size_t i) const;
  std::size_t layer_output_dim(std::size_t i) const;
  void validate() const;
};

struct Dataset {
  Matrix inputs;   // n x d_in
  Matrix targets;  // n x d_out

  std::size_t size() const noexcept { return inputs.rows(); }
  void validate() const;
};

// Forward passes. TwoLayerNet returns a length-1 vector.
Vector forward(const TwoLayerNet& net, std::span<const double> x);
Vector forward(const Mlp& net, std::span<const double> x);

/// Post-activation outputs of every Mlp layer for one input.
std::vector<Vector> forward_all(const Mlp& net, std::span<const double> x);

/// Per-example squared loss 0.5 * ||f(x) - y||^2.
template <class Net>
double loss(const Net& net, std::span<const double> x, std::span<const double> y) {
  const Vector out = forward(net, x);
  if (out.size() != y.size()) throw std::invalid_argument("loss: target dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += (out[i] - y[i]) * (out[i] - y[i]);
  return 0.5 * s;
}

/// Mean per-example loss over the whole dataset.
template <class Net>
double mean_loss(const Net& net, const Dataset& data) {
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    s += loss(net, data.inputs.row(i), data.targets.row(i));
  return s / static_cast<double>(data.size());
}

/// Parameter count and (un)flattening.
///
/// TwoLayerNet order: W row-major, a, b1 (if present), b2 (if present).
/// Mlp order: per layer, weight row-major then bias; a factorized last layer
/// contributes u row-major, v row-major, then bias.
std::size_t param_count(const TwoLayerNet& net);
std::size_t param_count(const Mlp& net);
ParamVector flatten(const TwoLayerNet& net);
ParamVector flatten(const Mlp& net);
/// Returns a copy of `like` carrying `params`. Throws on a length mismatch.
TwoLayerNet unflatten(const TwoLayerNet& like, std::span<const double> params);
Mlp unflatten(const Mlp& like, std::span<const double> params);

/// Adds d loss / d theta for one example into `out` (length param_count).
void accumulate_grad(const TwoLayerNet& net, std::span<const double> x,
                     std::span<const double> y, std::span<double> out, double scale = 1.0);
void accumulate_grad(const Mlp& net, std::span<const double> x, std::span<const double> y,
                     std::span<double> out, double scale = 1.0);

template <class Net>
ParamVector grad(const Net& net, std::span<const double> x, std::span<const double> y) {
  ParamVector g(param_count(net), 0.0);
  accumulate_grad(net, x, y, g);
  return g;
}

/// Mean gradient over the examples named by `indices`. Throws when the set is
/// empty or an index is out of range.
template <class Net>
ParamVector batch_grad(const Net& net, const Dataset& data,
                       std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("batch_grad: empty index set");
  ParamVector g(param_count(net), 0.0);
  const double scale = 1.0 / static_cast<double>(indices.size());
  for (std::size_t i : indices) {
    if (i >= data.size()) throw std::out_of_range("batch_grad: index out of range");
    accumulate_grad(net, data.inputs.row(i), data.targets.row(i), g, scale);
  }
  return g;
}

/// ||grad_theta f(x)|| for a bias-free two-layer net:
/// sqrt(||sigma(Wx)||^2 + ||x||^2 * ||a . sigma'(Wx)||^2).
double model_grad_norm(const TwoLayerNet& net, std::span<const double> x);

/// Pre-activations W x (+ b1) of the hidden layer.
Vector preactivations(const TwoLayerNet& net, std::span<const double> x);

/// u * v of the factorized last layer; throws if there is no bottleneck.
Matrix effective_last_weight(const Mlp& net);

}  // namespace samrank::nets
