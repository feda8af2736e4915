#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "samrank/nets.hpp"

namespace samrank::optim {

using nets::Dataset;
using nets::ParamVector;

struct OptimConfig {
  double learning_rate = 0.1;
  double weight_decay = 0.0;
  std::size_t batch_size = 1;
  std::size_t steps = 200000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SamConfig {
  double rho = 0.0;
  /// SAM (or the gradient-norm penalty) is applied while
  /// step < active_fraction * steps, plain SGD afterwards.
  double active_fraction = 0.5;
  /// Gradients with norm at or below this skip the perturbation.
  double norm_epsilon = 1e-12;

  void validate() const;
};

enum class Method { sgd, sam, gradreg };

std::string_view to_string(Method m);
Method method_from_string(std::string_view name);

/// Central-difference step for the Hessian-gradient product in gradreg_step.
inline constexpr double kHvpStep = 1e-4;

namespace detail {

inline double norm(std::span<const double> v) { return linalg::norm2(v); }

template <class Net>
Net apply_update(const Net& net, std::span<const double> grad, double lr, double weight_decay) {
  ParamVector p = nets::flatten(net);
  if (weight_decay == 0.0) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * grad[i];
  } else {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * (grad[i] + weight_decay * p[i]);
  }
  return nets::unflatten(net, p);
}

template <class Net>
Net shifted(const Net& net, std::span<const double> dir, double scale) {
  ParamVector p = nets::flatten(net);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] += scale * dir[i];
  return nets::unflatten(net, p);
}

}  // namespace detail

/// theta <- theta - lr * (batch_grad + weight_decay * theta).
template <class Net>
Net sgd_step(const Net& net, const Dataset& data, std::span<const std::size_t> batch,
             const OptimConfig& cfg) {
  const ParamVector g = nets::batch_grad(net, data, batch);
  return detail::apply_update(net, g, cfg.learning_rate, cfg.weight_decay);
}

template <class Net>
struct SamStep {
  Net net;
  ParamVector perturbation;  // epsilon; all zeros when skipped
  ParamVector outer_grad;    // gradient at theta + epsilon
  bool perturbed = false;
};

/// One SAM update. The perturbation epsilon = rho * g / ||g|| and the outer
/// gradient are both computed on `batch`. Weight decay enters the outer step
/// only. A zero rho or a gradient norm <= norm_epsilon gives a plain SGD step.
template <class Net>
SamStep<Net> sam_step(const Net& net, const Dataset& data, std::span<const std::size_t> batch,
                      const OptimConfig& cfg, const SamConfig& sam) {
  ParamVector g = nets::batch_grad(net, data, batch);
  const double gnorm = detail::norm(g);
  SamStep<Net> out;
  out.perturbation.assign(g.size(), 0.0);
  if (sam.rho == 0.0 || !(gnorm > sam.norm_epsilon)) {
    out.net = detail::apply_update(net, g, cfg.learning_rate, cfg.weight_decay);
    out.outer_grad = std::move(g);
    return out;
  }
  for (std::size_t i = 0; i < g.size(); ++i) out.perturbation[i] = sam.rho * g[i] / gnorm;
  const Net probe = detail::shifted(net, out.perturbation, 1.0);
  out.outer_grad = nets::batch_grad(probe, data, batch);
  out.net = detail::apply_update(net, out.outer_grad, cfg.learning_rate, cfg.weight_decay);
  out.perturbed = true;
  return out;
}

/// Gradient of the penalized objective loss + rho * ||grad loss|| on `batch`.
/// The Hessian-gradient product is a central difference of batch_grad along
/// g / ||g|| with step kHvpStep.
template <class Net>
ParamVector gradreg_gradient(const Net& net, const Dataset& data,
                             std::span<const std::size_t> batch, double rho,
                             double norm_epsilon = 1e-12) {
  ParamVector g = nets::batch_grad(net, data, batch);
  const double gnorm = detail::norm(g);
  if (rho == 0.0 || !(gnorm > norm_epsilon)) return g;
  ParamVector dir(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) dir[i] = g[i] / gnorm;
  const ParamVector gp = nets::batch_grad(detail::shifted(net, dir, kHvpStep), data, batch);
  const ParamVector gm = nets::batch_grad(detail::shifted(net, dir, -kHvpStep), data, batch);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += rho * (gp[i] - gm[i]) / (2.0 * kHvpStep);
  return g;
}

template <class Net>
Net gradreg_step(const Net& net, const Dataset& data, std::span<const std::size_t> batch,
                 const OptimConfig& cfg, double rho, double norm_epsilon = 1e-12) {
  const ParamVector g = gradreg_gradient(net, data, batch, rho, norm_epsilon);
  return detail::apply_update(net, g, cfg.learning_rate, cfg.weight_decay);
}

/// Per-neuron view of one SAM step on a single example for a bias-free relu
/// TwoLayerNet. Index j runs over hidden neurons.
struct SamStepReport {
  ParamVector perturbation;
  ParamVector outer_grad;
  double residual = 0.0;            // r = f(x) - y
  double model_grad_norm = 0.0;     // ||grad f||
  double effective_lr = 0.0;        // lr * (1 + rho ||grad f|| / |r|)
  std::vector<double> data_fitting;          // effective_lr * r * a_j sigma'(z_j) ||x||^2
  std::vector<double> regularization;        // lr rho |r| / ||grad f|| sigma(z_j) ||x||^2
  std::vector<double> preact_before;         // z_j
  std::vector<double> preact_after_gradreg;  // z_j after gradreg_step
  std::vector<double> preact_after_sam;      // z_j after sam_step
};

/// Throws if the net has biases or a non-relu activation, or if r == 0.
SamStepReport decompose_sam_step(const nets::TwoLayerNet& net, std::span<const double> x,
                                 double y, const OptimConfig& cfg, const SamConfig& sam);

/// Training schedule: which update rule runs while the regularizer is active.
struct Schedule {
  Method method = Method::sgd;
  SamConfig sam;

  /// Number of leading steps that use `method`; the rest are SGD.
  std::size_t active_steps(std::size_t total_steps) const;
};

template <class Net>
struct TrainResult {
  Net net;
  std::size_t steps_run = 0;
  bool diverged = false;
};

/// Runs cfg.steps updates with batches drawn uniformly with replacement from a
/// generator seeded by cfg.seed. `observer(step, net)` is called after every
/// `cadence`-th step and after the final step (when cadence > 0). The run stops
/// early and reports divergence on a non-finite parameter.
template <class Net, class Observer>
TrainResult<Net> train(Net net, const Dataset& data, const OptimConfig& cfg,
                       const Schedule& schedule, std::size_t cadence, Observer&& observer) {
  cfg.validate();
  schedule.sam.validate();
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::vector<std::size_t> batch(cfg.batch_size);
  const std::size_t active = schedule.active_steps(cfg.steps);

  TrainResult<Net> out{std::move(net), 0, false};
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (auto& b : batch) b = pick(rng);
    const bool regularized = step < active;
    switch (regularized ? schedule.method : Method::sgd) {
      case Method::sgd: out.net = sgd_step(out.net, data, batch, cfg); break;
      case Method::sam: out.net = sam_step(out.net, data, batch, cfg, schedule.sam).net; break;
      case Method::gradreg:
        out.net = gradreg_step(out.net, data, batch, cfg, schedule.sam.rho,
                               schedule.sam.norm_epsilon);
        break;
    }
    out.steps_run = step + 1;
    const ParamVector p = nets::flatten(out.net);
    for (double v : p) {
      if (!std::isfinite(v)) {
        out.diverged = true;
        return out;
      }
    }
    if (cadence > 0 && (out.steps_run % cadence == 0 || out.steps_run == cfg.steps)) {
      observer(out.steps_run, static_cast<const Net&>(out.net));
    }
  }
  return out;
}

template <class Net>
TrainResult<Net> train(Net net, const Dataset& data, const OptimConfig& cfg,
                       const Schedule& schedule) {
  return train(std::move(net), data, cfg, schedule, 0, [](std::size_t, const Net&) {});
}

}  // namespace samrank::optim
