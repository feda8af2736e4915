#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "samrank/linalg.hpp"
#include "samrank/nets.hpp"

namespace samrank::diag {

using linalg::Matrix;

struct RankReport {
  linalg::EigenSpectrum spectrum;
  std::vector<double> thresholds;
  std::vector<std::size_t> ranks;  // aligned with thresholds
};

/// Counts columns with any strictly positive entry.
struct AnyNonzero {};
/// Counts columns with any entry >= fraction * (global max of the matrix).
struct RelativeThreshold {
  double fraction = 0.05;
};
using ActivityMode = std::variant<AnyNonzero, RelativeThreshold>;

struct ActivityReport {
  std::size_t total_units = 0;
  std::size_t active_units = 0;
  ActivityMode mode;
};

/// Hidden features sigma(W x + b1), one row per example. Block 0 is the only
/// valid block of a TwoLayerNet.
Matrix feature_matrix(const nets::TwoLayerNet& net, const nets::Dataset& data,
                      std::size_t block = 0);
/// Post-activation outputs of Mlp layer `block` (0-based), one row per example.
Matrix feature_matrix(const nets::Mlp& net, const nets::Dataset& data, std::size_t block);

/// Minimal k whose top-k eigenvalues reach `threshold` of the total; 0 when
/// the total variance is 0.
std::size_t rank_at(const linalg::EigenSpectrum& spectrum, double threshold);

RankReport feature_rank(const Matrix& features, std::span<const double> thresholds,
                        bool center = true);

ActivityReport active_units(const Matrix& features, ActivityMode mode = AnyNonzero{});

/// l2 norm of all trainable parameters.
template <class Net>
double weight_norm(const Net& net) {
  return linalg::norm2(nets::flatten(net));
}

/// Fraction of test rows whose k-nearest-neighbour majority label (Euclidean)
/// differs from the true label. Distance ties go to the lower train index,
/// vote ties to the smaller label.
double knn_error(const Matrix& train_features, std::span<const int> train_labels,
                 const Matrix& test_features, std::span<const int> test_labels,
                 std::size_t k = 5);

}  // namespace samrank::diag
