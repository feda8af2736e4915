#include "samrank/optim.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace samrank::optim {

void OptimConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

void SamConfig::validate() const {
  if (!(rho >= 0.0)) throw std::invalid_argument("rho must be >= 0");
  if (!(active_fraction > 0.0 && active_fraction <= 1.0)) {
    throw std::invalid_argument("active_fraction must lie in (0, 1]");
  }
  if (!(norm_epsilon > 0.0)) throw std::invalid_argument("norm_epsilon must be > 0");
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::sgd: return "sgd";
    case Method::sam: return "sam";
    case Method::gradreg: return "gradreg";
  }
  return "unknown";
}

Method method_from_string(std::string_view name) {
  if (name == "sgd") return Method::sgd;
  if (name == "sam") return Method::sam;
  if (name == "gradreg") return Method::gradreg;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) +
                              "' (expected sgd, sam or gradreg)");
}

std::size_t Schedule::active_steps(std::size_t total_steps) const {
  if (method == Method::sgd) return 0;
  const double bound = std::ceil(sam.active_fraction * static_cast<double>(total_steps));
  return std::min(total_steps, static_cast<std::size_t>(bound));
}

SamStepReport decompose_sam_step(const nets::TwoLayerNet& net, std::span<const double> x,
                                 double y, const OptimConfig& cfg, const SamConfig& sam) {
  net.validate();
  if (net.has_biases()) throw std::invalid_argument("decompose_sam_step: net must be bias-free");
  if (net.act != nets::Activation::relu) {
    throw std::invalid_argument("decompose_sam_step: requires relu activation");
  }
  const double f = nets::forward(net, x)[0];
  const double r = f - y;
  if (r == 0.0) throw std::invalid_argument("decompose_sam_step: zero residual");

  SamStepReport rep;
  rep.residual = r;
  rep.model_grad_norm = nets::model_grad_norm(net, x);
  rep.preact_before = nets::preactivations(net, x);

  const double lr = cfg.learning_rate;
  const double xx = linalg::dot(x, x);
  const double abs_r = std::abs(r);
  const double gf = rep.model_grad_norm;
  // With grad f = 0 the loss gradient vanishes and SAM takes no perturbation.
  const bool degenerate = !(gf > 0.0);
  rep.effective_lr = degenerate ? lr : lr * (1.0 + sam.rho * gf / abs_r);
  const double reg_coeff = degenerate ? 0.0 : lr * sam.rho * abs_r / gf;

  const std::size_t m = net.width();
  rep.data_fitting.resize(m);
  rep.regularization.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double z = rep.preact_before[j];
    rep.data_fitting[j] =
        rep.effective_lr * r * net.a[j] * nets::activate_derivative(net.act, z) * xx;
    rep.regularization[j] = reg_coeff * nets::activate(net.act, z) * xx;
  }

  nets::Dataset single{linalg::Matrix(1, x.size(), std::vector<double>(x.begin(), x.end())),
                       linalg::Matrix(1, 1, std::vector<double>{y})};
  const std::size_t idx[] = {0};
  auto sam_out = sam_step(net, single, idx, cfg, sam);
  rep.perturbation = std::move(sam_out.perturbation);
  rep.outer_grad = std::move(sam_out.outer_grad);
  rep.preact_after_sam = nets::preactivations(sam_out.net, x);
  const auto reg_net = gradreg_step(net, single, idx, cfg, sam.rho, sam.norm_epsilon);
  rep.preact_after_gradreg = nets::preactivations(reg_net, x);
  return rep;
}

}  // namespace samrank::optim
