#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracle_values.hpp"
#include "samrank/linalg.hpp"
#include "samrank/nets.hpp"

namespace nets = samrank::nets;
using nets::Activation;
using nets::Matrix;
using nets::Mlp;
using nets::TwoLayerNet;
using nets::Vector;

namespace {

template <std::size_t N>
Vector vec(const double (&a)[N]) {
  return Vector(a, a + N);
}

template <std::size_t N>
Matrix mat(std::size_t rows, std::size_t cols, const double (&a)[N]) {
  return Matrix(rows, cols, vec(a));
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> dist(0.0, s);
  Matrix m(r, c);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

Vector random_vector(std::size_t n, std::mt19937_64& rng, double s = 1.0) {
  const Matrix m = random_matrix(1, n, rng, s);
  return Vector(m.data().begin(), m.data().end());
}

TwoLayerNet neuron() {
  TwoLayerNet net;
  net.w = Matrix{{1}};
  net.a = {1};
  return net;
}

TwoLayerNet random_two_layer(std::mt19937_64& rng, Activation act, bool biases) {
  TwoLayerNet net;
  net.w = random_matrix(6, 3, rng);
  net.a = random_vector(6, rng);
  net.act = act;
  if (biases) {
    net.b1 = random_vector(6, rng);
    net.b2 = 0.3;
  }
  return net;
}

Mlp oracle_mlp() {
  Mlp net;
  net.layers.push_back({mat(5, 3, oracle::kMlpW0), vec(oracle::kMlpB0), Activation::relu});
  net.layers.push_back({mat(4, 5, oracle::kMlpW1), vec(oracle::kMlpB1), Activation::tanh});
  net.layers.push_back({mat(2, 4, oracle::kMlpW2), vec(oracle::kMlpB2), Activation::identity});
  return net;
}

// Central finite differences of the per-example loss, step 1e-5.
template <class Net>
Vector numeric_grad(const Net& net, std::span<const double> x, std::span<const double> y) {
  const Vector p = nets::flatten(net);
  Vector g(p.size());
  const double h = 1e-5;
  for (std::size_t i = 0; i < p.size(); ++i) {
    Vector q = p;
    q[i] = p[i] + h;
    const double up = nets::loss(nets::unflatten(net, q), x, y);
    q[i] = p[i] - h;
    const double down = nets::loss(nets::unflatten(net, q), x, y);
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

double rel_error(const Vector& a, const Vector& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

}  // namespace

TEST_CASE("activations") {
  CHECK(nets::activate(Activation::relu, -1) == 0);
  CHECK(nets::activate(Activation::relu, 2) == 2);
  CHECK(nets::activate_derivative(Activation::relu, 0) == 0);
  CHECK(nets::activate(Activation::abs, -2) == 2);
  CHECK(nets::activate_derivative(Activation::abs, 0) == 0);
  CHECK(nets::activate(Activation::gelu, 0) == 0);
  CHECK(nets::activate(Activation::gelu, 1) == doctest::Approx(0.8413447460685429));
  for (auto act : {Activation::relu, Activation::tanh, Activation::abs, Activation::gelu,
                   Activation::identity}) {
    CHECK(nets::activation_from_string(nets::to_string(act)) == act);
  }
  CHECK_THROWS(nets::activation_from_string("sigmoid"));
}

TEST_CASE("two-layer forward") {
  TwoLayerNet dead;
  dead.w = Matrix(4, 3);
  dead.a = {1, -2, 3, 4};
  CHECK(nets::forward(dead, std::vector<double>{1, 2, 3})[0] == 0);

  const TwoLayerNet n = neuron();
  CHECK(nets::forward(n, std::vector<double>{2})[0] == 2);
  CHECK(nets::forward(n, std::vector<double>{-2})[0] == 0);
  CHECK_THROWS(nets::forward(n, std::vector<double>{1, 2}));
}

TEST_CASE("mlp forward matches an independent evaluator") {
  const Mlp net = oracle_mlp();
  const Vector out = nets::forward(net, vec(oracle::kMlpX));
  REQUIRE(out.size() == 2);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(std::abs(out[i] - oracle::kMlpOutput[i]) < 1e-12);
  const auto all = nets::forward_all(net, vec(oracle::kMlpX));
  REQUIRE(all.size() == 3);
  CHECK(all.back() == out);
}

TEST_CASE("loss") {
  const TwoLayerNet n = neuron();
  CHECK(nets::loss(n, std::vector<double>{2}, std::vector<double>{2}) == 0);
  CHECK(nets::loss(n, std::vector<double>{2}, std::vector<double>{0}) == oracle::kNeuronLoss);

  TwoLayerNet t;
  t.w = mat(4, 3, oracle::kTanhNetW);
  t.a = vec(oracle::kTanhNetA);
  t.b1 = vec(oracle::kTanhNetB1);
  t.b2 = oracle::kTanhNetB2;
  t.act = Activation::tanh;
  const std::vector<double> y{oracle::kTanhNetY};
  CHECK(nets::loss(t, vec(oracle::kTanhNetX), y) ==
        doctest::Approx(oracle::kTanhNetLoss).epsilon(1e-13));
}

TEST_CASE("gradients") {
  SUBCASE("zero residual gives zero gradient") {
    const Vector g = nets::grad(neuron(), std::vector<double>{2}, std::vector<double>{2});
    for (double v : g) CHECK(v == 0);
  }
  SUBCASE("single neuron") {
    const Vector g = nets::grad(neuron(), std::vector<double>{2}, std::vector<double>{0});
    CHECK(g == vec(oracle::kNeuronGrad));
  }
  SUBCASE("tanh net with biases matches autograd") {
    TwoLayerNet t;
    t.w = mat(4, 3, oracle::kTanhNetW);
    t.a = vec(oracle::kTanhNetA);
    t.b1 = vec(oracle::kTanhNetB1);
    t.b2 = oracle::kTanhNetB2;
    t.act = Activation::tanh;
    const Vector g = nets::grad(t, vec(oracle::kTanhNetX), std::vector<double>{oracle::kTanhNetY});
    CHECK(rel_error(g, vec(oracle::kTanhNetGrad)) < 1e-12);
  }
  SUBCASE("finite differences on random smooth nets") {
    std::mt19937_64 rng(11);
    for (auto act : {Activation::tanh, Activation::gelu, Activation::identity}) {
      for (int trial = 0; trial < 20; ++trial) {
        const TwoLayerNet net = random_two_layer(rng, act, trial % 2 == 0);
        const Vector x = random_vector(3, rng);
        const std::vector<double> y{0.5};
        CHECK(rel_error(nets::grad(net, x, y), numeric_grad(net, x, y)) < 1e-5);
      }
    }
  }
  SUBCASE("finite differences on relu nets away from kinks") {
    std::mt19937_64 rng(12);
    int tested = 0;
    while (tested < 30) {
      const TwoLayerNet net = random_two_layer(rng, Activation::relu, true);
      const Vector x = random_vector(3, rng);
      const Vector z = nets::preactivations(net, x);
      bool near_kink = false;
      for (double v : z) near_kink |= std::abs(v) < 1e-3;
      if (near_kink) continue;
      const std::vector<double> y{-0.2};
      CHECK(rel_error(nets::grad(net, x, y), numeric_grad(net, x, y)) < 1e-5);
      ++tested;
    }
  }
  SUBCASE("mlp with and without a bottleneck") {
    std::mt19937_64 rng(13);
    Mlp net;
    net.layers.push_back({random_matrix(5, 3, rng), random_vector(5, rng), Activation::tanh});
    net.layers.push_back({random_matrix(4, 5, rng), random_vector(4, rng), Activation::gelu});
    net.layers.push_back({random_matrix(2, 4, rng), random_vector(2, rng), Activation::identity});
    const Vector x = random_vector(3, rng);
    const std::vector<double> y{0.1, -0.4};
    CHECK(rel_error(nets::grad(net, x, y), numeric_grad(net, x, y)) < 1e-5);

    Mlp fact = net;
    fact.layers.back().weight = Matrix();
    fact.bottleneck = nets::Bottleneck{random_matrix(4, 2, rng), random_matrix(2, 2, rng)};
    fact.validate();
    CHECK(rel_error(nets::grad(fact, x, y), numeric_grad(fact, x, y)) < 1e-5);
  }
}

TEST_CASE("batch gradient") {
  std::mt19937_64 rng(21);
  const TwoLayerNet net = random_two_layer(rng, Activation::tanh, true);
  nets::Dataset data{random_matrix(6, 3, rng), random_matrix(6, 1, rng)};
  const std::vector<std::size_t> one{2};
  CHECK(nets::batch_grad(net, data, one) ==
        nets::grad(net, data.inputs.row(2), data.targets.row(2)));

  const std::vector<std::size_t> twice{2, 2};
  const Vector a = nets::batch_grad(net, data, twice);
  const Vector b = nets::batch_grad(net, data, one);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-15));

  const std::vector<std::size_t> batch{0, 3, 5, 3};
  Vector mean(nets::param_count(net), 0.0);
  for (std::size_t i : batch) {
    const Vector g = nets::grad(net, data.inputs.row(i), data.targets.row(i));
    for (std::size_t k = 0; k < g.size(); ++k) mean[k] += g[k] / batch.size();
  }
  const Vector got = nets::batch_grad(net, data, batch);
  for (std::size_t k = 0; k < got.size(); ++k) CHECK(std::abs(got[k] - mean[k]) < 1e-12);

  CHECK_THROWS(nets::batch_grad(net, data, std::vector<std::size_t>{}));
  CHECK_THROWS(nets::batch_grad(net, data, std::vector<std::size_t>{6}));
}

TEST_CASE("model gradient norm") {
  TwoLayerNet dead;
  dead.w = Matrix(3, 2);
  dead.a = {1, 2, 3};
  CHECK(nets::model_grad_norm(dead, std::vector<double>{1, 1}) == 0);
  CHECK(nets::model_grad_norm(neuron(), std::vector<double>{2}) ==
        doctest::Approx(oracle::kNeuronModelGradNorm).epsilon(1e-15));

  std::mt19937_64 rng(31);
  for (int t = 0; t < 50; ++t) {
    const TwoLayerNet net = random_two_layer(rng, Activation::relu, false);
    const Vector x = random_vector(3, rng);
    const std::vector<double> y{0.7};
    const double r = nets::forward(net, x)[0] - y[0];
    if (r == 0.0) continue;
    const double gnorm = samrank::linalg::norm2(nets::grad(net, x, y));
    CHECK(nets::model_grad_norm(net, x) == doctest::Approx(gnorm / std::abs(r)).epsilon(1e-10));
  }
}

TEST_CASE("flatten order and round trip") {
  TwoLayerNet net;
  net.w = Matrix{{1, 2}, {3, 4}};
  net.a = {5, 6};
  net.b1 = Vector{7, 8};
  net.b2 = 9;
  CHECK(nets::flatten(net) == Vector{1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK(nets::param_count(net) == 9);
  const TwoLayerNet back = nets::unflatten(net, nets::flatten(net));
  CHECK(back.w == net.w);
  CHECK(*back.b2 == 9);
  CHECK_THROWS(nets::unflatten(net, Vector{1, 2}));

  const Mlp m = oracle_mlp();
  CHECK(nets::flatten(nets::unflatten(m, nets::flatten(m))) == nets::flatten(m));
  CHECK(nets::param_count(m) == 5 * 3 + 5 + 4 * 5 + 4 + 2 * 4 + 2);
}

TEST_CASE("bottleneck effective weight") {
  std::mt19937_64 rng(41);
  Mlp net;
  net.layers.push_back({random_matrix(8, 3, rng), Vector(8, 0.0), Activation::relu});
  net.layers.push_back({Matrix(), Vector(8, 0.0), Activation::identity});
  net.bottleneck = nets::Bottleneck{random_matrix(8, 2, rng), random_matrix(2, 8, rng)};
  net.validate();
  const Matrix w = nets::effective_last_weight(net);
  CHECK(w == samrank::linalg::matmul(net.bottleneck->u, net.bottleneck->v));
  // Gram eigenvalues carry round-off near 1e-16 of the largest, so the cutoff
  // sits well above that.
  const auto s = samrank::linalg::sym_eigen(samrank::linalg::matmul(w.transposed(), w));
  std::size_t rank = 0;
  for (double v : s.eigenvalues) rank += v > 1e-12 * s.eigenvalues[0];
  CHECK(rank == 2);

  Mlp dense = net;
  dense.bottleneck.reset();
  dense.layers.back().weight = Matrix(8, 8);
  CHECK_THROWS(nets::effective_last_weight(dense));
}

TEST_CASE("shape validation") {
  TwoLayerNet bad;
  bad.w = Matrix(3, 2);
  bad.a = {1, 2};
  CHECK_THROWS(bad.validate());
  nets::Dataset data{Matrix(3, 2), Matrix(2, 1)};
  CHECK_THROWS(data.validate());
}
