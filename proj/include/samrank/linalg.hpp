#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace samrank::linalg {

using Vector = std::vector<double>;

/// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of row-major data; throws if the length does not match
  /// or any entry is non-finite.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transposed() const;
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Eigenvalues sorted descending together with their sum.
struct EigenSpectrum {
  std::vector<double> eigenvalues;
  double total = 0.0;
};

struct EigenDecomposition {
  EigenSpectrum spectrum;
  /// Column k is the unit eigenvector for spectrum.eigenvalues[k].
  Matrix vectors;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double frobenius_norm(const Matrix& a);

/// Cyclic Jacobi eigensolver for symmetric matrices. Iterates until the
/// off-diagonal Frobenius norm drops below 1e-12 * ||s||_F. Throws if `s` is
/// not square or differs from its transpose by more than `tol` anywhere.
EigenDecomposition sym_eigen_decompose(const Matrix& s, double tol = 1e-9);
EigenSpectrum sym_eigen(const Matrix& s, double tol = 1e-9);

/// Relative clamp level for covariance eigenvalues: values below
/// kClampRelTol * total are set to 0.
inline constexpr double kClampRelTol = 1e-12;

/// Spectrum of the d x d covariance (1/n) X^T X, optionally after
/// subtracting column means. Negative round-off eigenvalues are clamped to 0.
EigenSpectrum covariance_spectrum(const Matrix& features, bool center = true);

}  // namespace samrank::linalg
