#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracle_values.hpp"
#include "samrank/experiments.hpp"
#include "samrank/optim.hpp"

namespace nets = samrank::nets;
namespace optim = samrank::optim;
using nets::Activation;
using nets::Dataset;
using nets::Matrix;
using nets::TwoLayerNet;
using nets::Vector;

namespace {

const std::vector<std::size_t> kFirst{0};

TwoLayerNet neuron() {
  TwoLayerNet net;
  net.w = Matrix{{1}};
  net.a = {1};
  return net;
}

Dataset point(double x, double y) { return {Matrix{{x}}, Matrix{{y}}}; }

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> dist(0.0, s);
  Matrix m(r, c);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

TwoLayerNet random_net(std::mt19937_64& rng, Activation act, bool biases, std::size_t m = 6) {
  TwoLayerNet net;
  net.w = random_matrix(m, 3, rng);
  const Matrix a = random_matrix(1, m, rng);
  net.a.assign(a.data().begin(), a.data().end());
  net.act = act;
  if (biases) {
    const Matrix b = random_matrix(1, m, rng);
    net.b1 = Vector(b.data().begin(), b.data().end());
    net.b2 = -0.1;
  }
  return net;
}

double distance(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

optim::OptimConfig lr(double v) {
  optim::OptimConfig c;
  c.learning_rate = v;
  return c;
}

optim::SamConfig rho(double v) {
  optim::SamConfig s;
  s.rho = v;
  return s;
}

}  // namespace

TEST_CASE("config validation") {
  optim::OptimConfig c;
  c.learning_rate = 0;
  CHECK_THROWS(c.validate());
  c = {};
  c.batch_size = 0;
  CHECK_THROWS(c.validate());
  c = {};
  c.weight_decay = -1;
  CHECK_THROWS(c.validate());
  optim::SamConfig s;
  s.rho = -0.1;
  CHECK_THROWS(s.validate());
  s = {};
  s.active_fraction = 1.5;
  CHECK_THROWS(s.validate());
  CHECK(optim::method_from_string("gradreg") == optim::Method::gradreg);
  CHECK_THROWS(optim::method_from_string("adam"));
}

TEST_CASE("sgd step") {
  SUBCASE("zero gradient leaves the net unchanged") {
    const TwoLayerNet out = optim::sgd_step(neuron(), point(2, 2), kFirst, lr(0.01));
    CHECK(nets::flatten(out) == Vector{1, 1});
  }
  SUBCASE("single neuron") {
    const TwoLayerNet out = optim::sgd_step(neuron(), point(2, 0), kFirst, lr(0.01));
    CHECK(nets::flatten(out)[0] == doctest::Approx(oracle::kNeuronSgdParams[0]).epsilon(1e-15));
    CHECK(nets::flatten(out)[1] == doctest::Approx(oracle::kNeuronSgdParams[1]).epsilon(1e-15));
  }
  SUBCASE("successive steps add up only for constant gradients") {
    // f = a * (w x) is bilinear, so its gradient changes after each step.
    TwoLayerNet lin = neuron();
    lin.act = Activation::identity;
    const Dataset d = point(1.5, -1);
    const TwoLayerNet two = optim::sgd_step(optim::sgd_step(lin, d, kFirst, lr(0.05)), d, kFirst,
                                            lr(0.05));
    Vector summed = nets::flatten(lin);
    const Vector g = nets::grad(lin, d.inputs.row(0), d.targets.row(0));
    for (std::size_t i = 0; i < g.size(); ++i) summed[i] -= 2 * 0.05 * g[i];
    CHECK(distance(nets::flatten(two), summed) > 1e-6);

    // Exact two-step recursion for this net.
    const double x = 1.5, y = -1, eta = 0.05;
    double w = 1, a = 1;
    for (int s = 0; s < 2; ++s) {
      const double r = a * w * x - y;
      const double gw = r * a * x, ga = r * w * x;
      w -= eta * gw;
      a -= eta * ga;
    }
    CHECK(nets::flatten(two)[0] == doctest::Approx(w).epsilon(1e-14));
    CHECK(nets::flatten(two)[1] == doctest::Approx(a).epsilon(1e-14));
  }
  SUBCASE("weight decay") {
    optim::OptimConfig c = lr(0.1);
    c.weight_decay = 0.5;
    const TwoLayerNet out = optim::sgd_step(neuron(), point(2, 2), kFirst, c);
    CHECK(nets::flatten(out) == Vector{0.95, 0.95});
  }
}

TEST_CASE("sam step") {
  SUBCASE("rho zero is bitwise sgd") {
    std::mt19937_64 rng(1);
    const TwoLayerNet net = random_net(rng, Activation::relu, true);
    const Dataset d{random_matrix(4, 3, rng), random_matrix(4, 1, rng)};
    const std::vector<std::size_t> batch{1, 3};
    const auto s = optim::sam_step(net, d, batch, lr(0.1), rho(0.0));
    CHECK_FALSE(s.perturbed);
    CHECK(nets::flatten(s.net) == nets::flatten(optim::sgd_step(net, d, batch, lr(0.1))));
  }
  SUBCASE("perfect fit is unchanged") {
    const auto s = optim::sam_step(neuron(), point(2, 2), kFirst, lr(0.1), rho(0.5));
    CHECK_FALSE(s.perturbed);
    CHECK(nets::flatten(s.net) == Vector{1, 1});
  }
  SUBCASE("single neuron") {
    const auto s = optim::sam_step(neuron(), point(2, 0), kFirst, lr(0.01), rho(0.1));
    REQUIRE(s.perturbed);
    for (int i = 0; i < 2; ++i) {
      CHECK(s.perturbation[i] == doctest::Approx(oracle::kNeuronSamEpsilon[i]).epsilon(1e-14));
      CHECK(s.outer_grad[i] == doctest::Approx(oracle::kNeuronSamOuterGrad[i]).epsilon(1e-14));
      CHECK(nets::flatten(s.net)[i] == doctest::Approx(oracle::kNeuronSamParams[i]).epsilon(1e-14));
    }
  }
  SUBCASE("weight decay enters the outer step only") {
    optim::OptimConfig c = lr(0.01);
    c.weight_decay = 0.1;
    const auto s = optim::sam_step(neuron(), point(2, 0), kFirst, c, rho(0.1));
    CHECK(s.perturbation[0] == doctest::Approx(oracle::kNeuronSamEpsilon[0]).epsilon(1e-14));
    const double want = 1 - 0.01 * (oracle::kNeuronSamOuterGrad[0] + 0.1 * 1);
    CHECK(nets::flatten(s.net)[0] == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("gradient-norm penalty") {
  SUBCASE("rho zero is sgd") {
    std::mt19937_64 rng(2);
    const TwoLayerNet net = random_net(rng, Activation::tanh, true);
    const Dataset d{random_matrix(3, 3, rng), random_matrix(3, 1, rng)};
    CHECK(nets::flatten(optim::gradreg_step(net, d, kFirst, lr(0.1), 0.0)) ==
          nets::flatten(optim::sgd_step(net, d, kFirst, lr(0.1))));
  }
  SUBCASE("matches the analytic penalty gradient on a linear model") {
    TwoLayerNet lin;
    lin.w = Matrix(2, 2, Vector(std::begin(oracle::kLinearW), std::end(oracle::kLinearW)));
    lin.a = Vector(std::begin(oracle::kLinearA), std::end(oracle::kLinearA));
    lin.act = Activation::identity;
    const Dataset d{Matrix(1, 2, Vector(std::begin(oracle::kLinearX), std::end(oracle::kLinearX))),
                    Matrix{{oracle::kLinearY}}};
    const double r = 0.3;
    const Vector g = nets::batch_grad(lin, d, kFirst);
    const Vector pen = optim::gradreg_gradient(lin, d, kFirst, r);
    for (std::size_t i = 0; i < g.size(); ++i)
      CHECK(std::abs((pen[i] - g[i]) / r - oracle::kLinearPenaltyGrad[i]) < 1e-6);
  }
  SUBCASE("differs from sam at second order in rho") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 100; ++t) {
      const TwoLayerNet net = random_net(rng, Activation::tanh, true);
      const Vector x = {0.4, -1.1, 0.8};
      const double ratio = samrank::experiments::first_order_ratio(net, x, 0.25, 0.1, 0.1);
      CHECK(ratio >= 3.0);
      CHECK(ratio <= 5.0);
    }
  }
}

TEST_CASE("step decomposition") {
  SUBCASE("single neuron") {
    const auto rep = optim::decompose_sam_step(neuron(), std::vector<double>{2}, 0, lr(0.01),
                                               rho(0.1));
    CHECK(rep.residual == 2);
    CHECK(rep.model_grad_norm == doctest::Approx(oracle::kNeuronModelGradNorm).epsilon(1e-15));
    CHECK(rep.regularization[0] == doctest::Approx(oracle::kNeuronRegComponent).epsilon(1e-14));
    CHECK(rep.effective_lr == doctest::Approx(oracle::kNeuronEffectiveLr).epsilon(1e-14));
  }
  SUBCASE("inactive neuron has an exactly zero component") {
    TwoLayerNet net;
    net.w = Matrix{{1}, {-1}};
    net.a = {1, 1};
    const auto rep = optim::decompose_sam_step(net, std::vector<double>{2}, 0, lr(0.01), rho(0.1));
    CHECK(rep.regularization[1] == 0.0);
    CHECK(rep.regularization[0] > 0.0);
  }
  SUBCASE("predicted pre-activation change matches the penalty step") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 50; ++t) {
      const TwoLayerNet net = random_net(rng, Activation::relu, false);
      const Matrix xm = random_matrix(1, 3, rng);
      const Vector x(xm.data().begin(), xm.data().end());
      const auto rep = optim::decompose_sam_step(net, x, 0.3, lr(0.01), rho(0.05));
      for (std::size_t j = 0; j < net.width(); ++j) {
        if (std::abs(rep.preact_before[j]) < 1e-3) continue;
        const double predicted = rep.preact_before[j] - rep.data_fitting[j] - rep.regularization[j];
        CHECK(std::abs(rep.preact_after_gradreg[j] - predicted) <
              1e-6 * (1 + std::abs(rep.preact_before[j])));
      }
    }
  }
  SUBCASE("preconditions") {
    TwoLayerNet b = neuron();
    b.b1 = Vector{0.0};
    CHECK_THROWS(optim::decompose_sam_step(b, std::vector<double>{2}, 0, lr(0.01), rho(0.1)));
    TwoLayerNet t = neuron();
    t.act = Activation::tanh;
    CHECK_THROWS(optim::decompose_sam_step(t, std::vector<double>{2}, 0, lr(0.01), rho(0.1)));
    CHECK_THROWS(optim::decompose_sam_step(neuron(), std::vector<double>{2}, 2, lr(0.01), rho(0.1)));
  }
}

TEST_CASE("training loop") {
  samrank::experiments::TeacherStudentSpec ts;
  ts.student_neurons = 20;
  const auto task = samrank::experiments::make_teacher_student(ts);
  const TwoLayerNet init = samrank::experiments::make_student(ts, 0);

  SUBCASE("zero steps") {
    optim::OptimConfig c;
    c.steps = 0;
    std::size_t calls = 0;
    const auto res = optim::train(init, task.train, c, optim::Schedule{}, 1,
                                  [&](std::size_t, const TwoLayerNet&) { ++calls; });
    CHECK(calls == 0);
    CHECK(res.steps_run == 0);
    CHECK(nets::flatten(res.net) == nets::flatten(init));
  }
  SUBCASE("rho zero is bitwise sgd") {
    optim::OptimConfig c;
    c.steps = 500;
    c.seed = 9;
    optim::Schedule sam{optim::Method::sam, rho(0.0)};
    const auto a = optim::train(init, task.train, c, sam);
    const auto b = optim::train(init, task.train, c, optim::Schedule{});
    CHECK(nets::flatten(a.net) == nets::flatten(b.net));
  }
  SUBCASE("observer cadence") {
    optim::OptimConfig c;
    c.steps = 25;
    std::vector<std::size_t> seen;
    (void)optim::train(init, task.train, c, optim::Schedule{}, 10,
                       [&](std::size_t s, const TwoLayerNet&) { seen.push_back(s); });
    CHECK(seen == std::vector<std::size_t>{10, 20, 25});
  }
  SUBCASE("active steps") {
    optim::Schedule s{optim::Method::sam, rho(0.1)};
    CHECK(s.active_steps(200000) == 100000);
    CHECK(s.active_steps(3) == 2);
    s.sam.active_fraction = 0;
    CHECK(s.active_steps(10) == 0);
  }
  SUBCASE("divergence is reported") {
    optim::OptimConfig c;
    c.steps = 2000;
    c.learning_rate = 50;
    const auto res = optim::train(init, task.train, c, optim::Schedule{});
    CHECK(res.diverged);
    CHECK(res.steps_run < 2000);
  }
}
