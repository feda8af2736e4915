#include "samrank/diagnostics.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace samrank::diag {

Matrix feature_matrix(const nets::TwoLayerNet& net, const nets::Dataset& data,
                      std::size_t block) {
  if (block != 0) {
    throw std::invalid_argument("feature_matrix: TwoLayerNet has only block 0, got " +
                                std::to_string(block));
  }
  Matrix out(data.size(), net.width());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto z = nets::preactivations(net, data.inputs.row(i));
    auto row = out.row(i);
    for (std::size_t j = 0; j < z.size(); ++j) row[j] = nets::activate(net.act, z[j]);
  }
  return out;
}

Matrix feature_matrix(const nets::Mlp& net, const nets::Dataset& data, std::size_t block) {
  if (block >= net.layers.size()) {
    throw std::invalid_argument("feature_matrix: block " + std::to_string(block) +
                                " out of range for an Mlp with " +
                                std::to_string(net.layers.size()) + " layers");
  }
  Matrix out(data.size(), net.layer_output_dim(block));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto outs = nets::forward_all(net, data.inputs.row(i));
    std::copy(outs[block].begin(), outs[block].end(), out.row(i).begin());
  }
  return out;
}

std::size_t rank_at(const linalg::EigenSpectrum& spectrum, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("rank threshold must lie in (0, 1]");
  }
  if (!(spectrum.total > 0.0)) return 0;
  double cumulative = 0.0;
  const auto& ev = spectrum.eigenvalues;
  for (std::size_t k = 0; k < ev.size(); ++k) {
    cumulative += ev[k];
    if (cumulative / spectrum.total >= threshold) return k + 1;
  }
  return ev.size();
}

RankReport feature_rank(const Matrix& features, std::span<const double> thresholds,
                        bool center) {
  RankReport rep;
  rep.spectrum = linalg::covariance_spectrum(features, center);
  rep.thresholds.assign(thresholds.begin(), thresholds.end());
  rep.ranks.reserve(thresholds.size());
  for (double t : thresholds) rep.ranks.push_back(rank_at(rep.spectrum, t));
  return rep;
}

ActivityReport active_units(const Matrix& features, ActivityMode mode) {
  if (features.rows() == 0) throw std::invalid_argument("active_units: empty feature matrix");
  ActivityReport rep;
  rep.total_units = features.cols();
  rep.mode = mode;

  double cutoff = 0.0;
  bool strict = true;
  if (const auto* rel = std::get_if<RelativeThreshold>(&mode)) {
    double max_value = -std::numeric_limits<double>::infinity();
    for (double v : features.data()) max_value = std::max(max_value, v);
    if (!(max_value > 0.0)) return rep;
    cutoff = rel->fraction * max_value;
    strict = false;
  }
  for (std::size_t c = 0; c < features.cols(); ++c) {
    for (std::size_t r = 0; r < features.rows(); ++r) {
      const double v = features(r, c);
      if (strict ? v > cutoff : v >= cutoff) {
        ++rep.active_units;
        break;
      }
    }
  }
  return rep;
}

double knn_error(const Matrix& train_features, std::span<const int> train_labels,
                 const Matrix& test_features, std::span<const int> test_labels, std::size_t k) {
  if (train_features.rows() == 0 || test_features.rows() == 0) {
    throw std::invalid_argument("knn_error: empty train or test set");
  }
  if (train_labels.size() != train_features.rows() || test_labels.size() != test_features.rows()) {
    throw std::invalid_argument("knn_error: label count does not match feature rows");
  }
  if (train_features.cols() != test_features.cols()) {
    throw std::invalid_argument("knn_error: feature dimensions differ");
  }
  if (k < 1 || k > train_features.rows()) {
    throw std::invalid_argument("knn_error: k must lie in [1, n_train]");
  }

  const std::size_t n = train_features.rows();
  std::vector<std::pair<double, std::size_t>> dist(n);
  std::size_t wrong = 0;
  for (std::size_t t = 0; t < test_features.rows(); ++t) {
    const auto q = test_features.row(t);
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = train_features.row(i);
      double d = 0.0;
      for (std::size_t c = 0; c < q.size(); ++c) d += (q[c] - p[c]) * (q[c] - p[c]);
      dist[i] = {d, i};
    }
    // Lexicographic pair order breaks distance ties by lower index.
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::map<int, std::size_t> votes;
    for (std::size_t i = 0; i < k; ++i) ++votes[train_labels[dist[i].second]];
    int best = 0;
    std::size_t best_count = 0;
    for (const auto& [label, count] : votes) {
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    }
    if (best != test_labels[t]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(test_features.rows());
}

}  // namespace samrank::diag
