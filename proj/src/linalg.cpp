#include "samrank/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace samrank::linalg {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("matrix data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_string());
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw std::invalid_argument("matrix entries must be finite");
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw std::invalid_argument("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: dimension mismatch " + a.shape_string() + " * " +
                                b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  // i-k-j order keeps the inner loop contiguous in both b and out.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Vector matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    throw std::invalid_argument("matvec: dimension mismatch " + a.shape_string() + " * " +
                                std::to_string(x.size()));
  }
  Vector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double frobenius_norm(const Matrix& a) { return norm2(a.data()); }

namespace {

double off_diagonal_norm(const Matrix& s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j)
      if (i != j) acc += s(i, j) * s(i, j);
  return std::sqrt(acc);
}

void check_symmetric(const Matrix& s, double tol) {
  if (s.rows() != s.cols()) {
    throw std::invalid_argument("sym_eigen: matrix is not square (" + s.shape_string() + ")");
  }
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = i + 1; j < s.cols(); ++j) {
      if (std::abs(s(i, j) - s(j, i)) > tol) {
        throw std::invalid_argument("sym_eigen: matrix is not symmetric at (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
}

}  // namespace

EigenDecomposition sym_eigen_decompose(const Matrix& s, double tol) {
  check_symmetric(s, tol);
  const std::size_t n = s.rows();

  // Work on the exactly symmetrized copy so rotations stay consistent.
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (s(i, j) + s(j, i));
  Matrix v = Matrix::identity(n);

  const double threshold = 1e-12 * frobenius_norm(a);
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps && off_diagonal_norm(a) > threshold; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigenDecomposition out;
  out.spectrum.eigenvalues.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.spectrum.eigenvalues[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  out.spectrum.total = std::accumulate(out.spectrum.eigenvalues.begin(),
                                       out.spectrum.eigenvalues.end(), 0.0);
  return out;
}

EigenSpectrum sym_eigen(const Matrix& s, double tol) {
  return sym_eigen_decompose(s, tol).spectrum;
}

EigenSpectrum covariance_spectrum(const Matrix& features, bool center) {
  if (features.rows() == 0 || features.cols() == 0) {
    throw std::invalid_argument("covariance_spectrum: empty feature matrix (" +
                                features.shape_string() + ")");
  }
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();

  Vector mean(d, 0.0);
  if (center) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) mean[j] += features(i, j);
    for (double& m : mean) m /= static_cast<double>(n);
  }

  Matrix cov(d, d);
  Vector centered(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) centered[j] = features(i, j) - mean[j];
    for (std::size_t j = 0; j < d; ++j) {
      if (centered[j] == 0.0) continue;
      for (std::size_t k = j; k < d; ++k) cov(j, k) += centered[j] * centered[k];
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = j; k < d; ++k) {
      cov(j, k) /= static_cast<double>(n);
      cov(k, j) = cov(j, k);
    }
  }

  EigenSpectrum spec = sym_eigen(cov, 0.0);
  const double raw_total = std::max(spec.total, 0.0);
  for (double& ev : spec.eigenvalues) {
    if (ev < kClampRelTol * raw_total) ev = 0.0;
  }
  spec.total = std::accumulate(spec.eigenvalues.begin(), spec.eigenvalues.end(), 0.0);
  return spec;
}

}  // namespace samrank::linalg
