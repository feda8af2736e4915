#include "samrank/nets.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace samrank::nets {

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::abs: return "abs";
    case Activation::gelu: return "gelu";
    case Activation::identity: return "identity";
  }
  return "unknown";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "abs") return Activation::abs;
  if (name == "gelu") return Activation::gelu;
  if (name == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

double activate(Activation act, double z) {
  switch (act) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
    case Activation::abs: return std::abs(z);
    case Activation::gelu: return 0.5 * z * (1.0 + std::erf(z * std::numbers::sqrt2 / 2.0));
    case Activation::identity: return z;
  }
  return z;
}

double activate_derivative(Activation act, double z) {
  switch (act) {
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::abs: return z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0);
    case Activation::gelu: {
      const double cdf = 0.5 * (1.0 + std::erf(z * std::numbers::sqrt2 / 2.0));
      const double pdf = std::exp(-0.5 * z * z) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
      return cdf + z * pdf;
    }
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

void TwoLayerNet::validate() const {
  if (a.size() != w.rows()) {
    throw std::invalid_argument("TwoLayerNet: a has length " + std::to_string(a.size()) +
                                " but W is " + w.shape_string());
  }
  if (b1 && b1->size() != w.rows()) {
    throw std::invalid_argument("TwoLayerNet: b1 has length " + std::to_string(b1->size()) +
                                " but W is " + w.shape_string());
  }
}

std::size_t Mlp::layer_input_dim(std::size_t i) const {
  if (bottleneck && i + 1 == layers.size()) return bottleneck->u.rows();
  return layers.at(i).weight.cols();
}

std::size_t Mlp::layer_output_dim(std::size_t i) const {
  if (bottleneck && i + 1 == layers.size()) return bottleneck->v.cols();
  return layers.at(i).weight.rows();
}

std::size_t Mlp::input_dim() const { return layers.empty() ? 0 : layer_input_dim(0); }

std::size_t Mlp::output_dim() const {
  return layers.empty() ? 0 : layer_output_dim(layers.size() - 1);
}

void Mlp::validate() const {
  if (layers.empty()) throw std::invalid_argument("Mlp: no layers");
  if (bottleneck) {
    if (bottleneck->u.cols() != bottleneck->v.rows()) {
      throw std::invalid_argument("Mlp: bottleneck factors " + bottleneck->u.shape_string() +
                                  " and " + bottleneck->v.shape_string() + " do not chain");
    }
    if (!layers.back().weight.empty()) {
      throw std::invalid_argument("Mlp: factorized last layer must not carry a dense weight");
    }
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].bias.size() != layer_output_dim(i)) {
      throw std::invalid_argument("Mlp: layer " + std::to_string(i) + " bias length mismatch");
    }
    if (i > 0 && layer_input_dim(i) != layer_output_dim(i - 1)) {
      throw std::invalid_argument("Mlp: layer " + std::to_string(i) + " expects input " +
                                  std::to_string(layer_input_dim(i)) + " but layer " +
                                  std::to_string(i - 1) + " outputs " +
                                  std::to_string(layer_output_dim(i - 1)));
    }
  }
}

void Dataset::validate() const {
  if (inputs.rows() != targets.rows()) {
    throw std::invalid_argument("Dataset: inputs " + inputs.shape_string() + " vs targets " +
                                targets.shape_string());
  }
}

namespace {

void check_input(std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw std::invalid_argument("input dimension mismatch: expected " +
                                std::to_string(expected) + ", got " + std::to_string(got));
  }
}

// Pre-activation of the given layer from the previous layer's output.
Vector layer_preactivation(const Mlp& net, std::size_t i, std::span<const double> in) {
  const Layer& layer = net.layers[i];
  Vector z(layer.bias);
  if (net.bottleneck && i + 1 == net.layers.size()) {
    const Matrix& u = net.bottleneck->u;
    const Matrix& v = net.bottleneck->v;
    Vector t(u.cols(), 0.0);
    for (std::size_t r = 0; r < u.rows(); ++r) {
      const double hr = in[r];
      for (std::size_t k = 0; k < u.cols(); ++k) t[k] += u(r, k) * hr;
    }
    for (std::size_t k = 0; k < v.rows(); ++k)
      for (std::size_t o = 0; o < v.cols(); ++o) z[o] += v(k, o) * t[k];
  } else {
    for (std::size_t o = 0; o < z.size(); ++o) z[o] += linalg::dot(layer.weight.row(o), in);
  }
  return z;
}

}  // namespace

Vector preactivations(const TwoLayerNet& net, std::span<const double> x) {
  check_input(net.input_dim(), x.size());
  Vector z(net.width());
  for (std::size_t j = 0; j < z.size(); ++j) {
    z[j] = linalg::dot(net.w.row(j), x) + (net.b1 ? (*net.b1)[j] : 0.0);
  }
  return z;
}

Vector forward(const TwoLayerNet& net, std::span<const double> x) {
  check_input(net.input_dim(), x.size());
  double f = net.b2.value_or(0.0);
  for (std::size_t j = 0; j < net.width(); ++j) {
    const double z = linalg::dot(net.w.row(j), x) + (net.b1 ? (*net.b1)[j] : 0.0);
    f += net.a[j] * activate(net.act, z);
  }
  return {f};
}

std::vector<Vector> forward_all(const Mlp& net, std::span<const double> x) {
  check_input(net.input_dim(), x.size());
  std::vector<Vector> outs;
  outs.reserve(net.layers.size());
  std::span<const double> in = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Vector z = layer_preactivation(net, i, in);
    for (double& v : z) v = activate(net.layers[i].act, v);
    outs.push_back(std::move(z));
    in = outs.back();
  }
  return outs;
}

Vector forward(const Mlp& net, std::span<const double> x) {
  auto outs = forward_all(net, x);
  return std::move(outs.back());
}

std::size_t param_count(const TwoLayerNet& net) {
  return net.w.size() + net.a.size() + (net.b1 ? net.b1->size() : 0) + (net.b2 ? 1 : 0);
}

std::size_t param_count(const Mlp& net) {
  std::size_t n = 0;
  for (const Layer& l : net.layers) n += l.weight.size() + l.bias.size();
  if (net.bottleneck) n += net.bottleneck->u.size() + net.bottleneck->v.size();
  return n;
}

ParamVector flatten(const TwoLayerNet& net) {
  ParamVector p;
  p.reserve(param_count(net));
  p.insert(p.end(), net.w.data().begin(), net.w.data().end());
  p.insert(p.end(), net.a.begin(), net.a.end());
  if (net.b1) p.insert(p.end(), net.b1->begin(), net.b1->end());
  if (net.b2) p.push_back(*net.b2);
  return p;
}

ParamVector flatten(const Mlp& net) {
  ParamVector p;
  p.reserve(param_count(net));
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    if (net.bottleneck && i + 1 == net.layers.size()) {
      p.insert(p.end(), net.bottleneck->u.data().begin(), net.bottleneck->u.data().end());
      p.insert(p.end(), net.bottleneck->v.data().begin(), net.bottleneck->v.data().end());
    } else {
      p.insert(p.end(), l.weight.data().begin(), l.weight.data().end());
    }
    p.insert(p.end(), l.bias.begin(), l.bias.end());
  }
  return p;
}

namespace {

class Reader {
 public:
  explicit Reader(std::span<const double> src) : src_(src) {}
  void into(std::span<double> dst) {
    for (double& d : dst) d = src_[pos_++];
  }
  double next() { return src_[pos_++]; }

 private:
  std::span<const double> src_;
  std::size_t pos_ = 0;
};

void check_length(std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw std::invalid_argument("unflatten: expected " + std::to_string(expected) +
                                " parameters, got " + std::to_string(got));
  }
}

}  // namespace

TwoLayerNet unflatten(const TwoLayerNet& like, std::span<const double> params) {
  check_length(param_count(like), params.size());
  TwoLayerNet net = like;
  Reader rd(params);
  rd.into(net.w.data());
  rd.into(net.a);
  if (net.b1) rd.into(*net.b1);
  if (net.b2) net.b2 = rd.next();
  return net;
}

Mlp unflatten(const Mlp& like, std::span<const double> params) {
  check_length(param_count(like), params.size());
  Mlp net = like;
  Reader rd(params);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Layer& l = net.layers[i];
    if (net.bottleneck && i + 1 == net.layers.size()) {
      rd.into(net.bottleneck->u.data());
      rd.into(net.bottleneck->v.data());
    } else {
      rd.into(l.weight.data());
    }
    rd.into(l.bias);
  }
  return net;
}

void accumulate_grad(const TwoLayerNet& net, std::span<const double> x,
                     std::span<const double> y, std::span<double> out, double scale) {
  check_input(net.input_dim(), x.size());
  if (y.size() != 1) throw std::invalid_argument("TwoLayerNet target must be scalar");
  const std::size_t m = net.width();
  const std::size_t d = net.input_dim();
  if (out.size() != param_count(net)) throw std::invalid_argument("gradient buffer size");

  const Vector z = preactivations(net, x);
  double f = net.b2.value_or(0.0);
  for (std::size_t j = 0; j < m; ++j) f += net.a[j] * activate(net.act, z[j]);
  const double r = (f - y[0]) * scale;

  const std::size_t a_off = m * d;
  const std::size_t b1_off = a_off + m;
  for (std::size_t j = 0; j < m; ++j) {
    const double back = r * net.a[j] * activate_derivative(net.act, z[j]);
    double* gw = out.data() + j * d;
    for (std::size_t k = 0; k < d; ++k) gw[k] += back * x[k];
    out[a_off + j] += r * activate(net.act, z[j]);
    if (net.b1) out[b1_off + j] += back;
  }
  if (net.b2) out[out.size() - 1] += r;
}

void accumulate_grad(const Mlp& net, std::span<const double> x, std::span<const double> y,
                     std::span<double> out, double scale) {
  check_input(net.input_dim(), x.size());
  if (y.size() != net.output_dim()) throw std::invalid_argument("Mlp target dimension mismatch");
  if (out.size() != param_count(net)) throw std::invalid_argument("gradient buffer size");
  const std::size_t depth = net.layers.size();

  std::vector<Vector> pre(depth);
  std::vector<Vector> post(depth);
  std::span<const double> in = x;
  for (std::size_t i = 0; i < depth; ++i) {
    pre[i] = layer_preactivation(net, i, in);
    post[i] = pre[i];
    for (double& v : post[i]) v = activate(net.layers[i].act, v);
    in = post[i];
  }

  std::vector<std::size_t> offset(depth + 1, 0);
  for (std::size_t i = 0; i < depth; ++i) {
    std::size_t n = net.layers[i].weight.size() + net.layers[i].bias.size();
    if (net.bottleneck && i + 1 == depth) n += net.bottleneck->u.size() + net.bottleneck->v.size();
    offset[i + 1] = offset[i] + n;
  }

  Vector delta(post.back().size());
  for (std::size_t o = 0; o < delta.size(); ++o) {
    delta[o] = scale * (post.back()[o] - y[o]) *
               activate_derivative(net.layers.back().act, pre.back()[o]);
  }

  for (std::size_t li = depth; li-- > 0;) {
    std::span<const double> h = li == 0 ? x : std::span<const double>(post[li - 1]);
    double* g = out.data() + offset[li];
    Vector dh(h.size(), 0.0);

    if (net.bottleneck && li + 1 == depth) {
      const Matrix& u = net.bottleneck->u;
      const Matrix& v = net.bottleneck->v;
      Vector t(u.cols(), 0.0);
      for (std::size_t r = 0; r < u.rows(); ++r)
        for (std::size_t k = 0; k < u.cols(); ++k) t[k] += u(r, k) * h[r];
      Vector dt(v.rows(), 0.0);
      for (std::size_t k = 0; k < v.rows(); ++k)
        for (std::size_t o = 0; o < v.cols(); ++o) dt[k] += v(k, o) * delta[o];
      for (std::size_t r = 0; r < u.rows(); ++r)
        for (std::size_t k = 0; k < u.cols(); ++k) {
          g[r * u.cols() + k] += h[r] * dt[k];
          dh[r] += u(r, k) * dt[k];
        }
      g += u.size();
      for (std::size_t k = 0; k < v.rows(); ++k)
        for (std::size_t o = 0; o < v.cols(); ++o) g[k * v.cols() + o] += t[k] * delta[o];
      g += v.size();
    } else {
      const Matrix& w = net.layers[li].weight;
      for (std::size_t o = 0; o < w.rows(); ++o) {
        const double d = delta[o];
        for (std::size_t c = 0; c < w.cols(); ++c) {
          g[o * w.cols() + c] += d * h[c];
          dh[c] += w(o, c) * d;
        }
      }
      g += w.size();
    }
    for (std::size_t o = 0; o < delta.size(); ++o) g[o] += delta[o];

    if (li > 0) {
      for (std::size_t c = 0; c < dh.size(); ++c)
        dh[c] *= activate_derivative(net.layers[li - 1].act, pre[li - 1][c]);
      delta = std::move(dh);
    }
  }
}

double model_grad_norm(const TwoLayerNet& net, std::span<const double> x) {
  const Vector z = preactivations(net, x);
  const double xx = linalg::dot(x, x);
  double act_sq = 0.0;
  double back_sq = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    const double s = activate(net.act, z[j]);
    const double b = net.a[j] * activate_derivative(net.act, z[j]);
    act_sq += s * s;
    back_sq += b * b;
  }
  double total = act_sq + xx * back_sq;
  if (net.b1) total += back_sq;
  if (net.b2) total += 1.0;
  return std::sqrt(total);
}

Matrix effective_last_weight(const Mlp& net) {
  if (!net.bottleneck) throw std::invalid_argument("effective_last_weight: no bottleneck layer");
  return linalg::matmul(net.bottleneck->u, net.bottleneck->v);
}

}  // namespace samrank::nets
