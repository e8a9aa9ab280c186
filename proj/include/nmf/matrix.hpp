#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nmf/errors.hpp"

namespace nmf {

using Vector = std::vector<double>;

/// Denominator substituted by hadamard_div when an entry of the divisor is
/// exactly zero.
inline constexpr double kDivisionGuard = 1e-12;

/**
 * Dense real matrix stored column-major, so that each column is a contiguous
 * span. Every factorization routine in this library works on columns.
 */
template <typename Real>
class basic_matrix {
 public:
  using value_type = Real;

  basic_matrix() = default;
  basic_matrix(std::size_t rows, std::size_t cols, Real fill = Real{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  basic_matrix(std::size_t rows, std::size_t cols, std::vector<Real> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
  }

  /// Row-wise literal, e.g. `Matrix{{1, 2}, {3, 4}}`.
  basic_matrix(std::initializer_list<std::initializer_list<Real>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.assign(rows_ * cols_, Real{0});
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != cols_) throw ShapeError("ragged matrix literal");
      std::size_t j = 0;
      for (Real x : row) (*this)(i, j++) = x;
      ++i;
    }
  }

  static basic_matrix identity(std::size_t n) {
    basic_matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = Real{1};
    return out;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  Real& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  const Real& operator()(std::size_t i, std::size_t j) const {
    return data_[j * rows_ + i];
  }

  std::span<Real> col(std::size_t j) { return {data_.data() + j * rows_, rows_}; }
  std::span<const Real> col(std::size_t j) const {
    return {data_.data() + j * rows_, rows_};
  }

  std::span<Real> data() noexcept { return data_; }
  std::span<const Real> data() const noexcept { return data_; }

  void set_col(std::size_t j, std::span<const Real> v) {
    if (v.size() != rows_) throw ShapeError("column length mismatch");
    std::copy(v.begin(), v.end(), col(j).begin());
  }

  std::vector<Real> row(std::size_t i) const {
    std::vector<Real> out(cols_);
    for (std::size_t j = 0; j < cols_; ++j) out[j] = (*this)(i, j);
    return out;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](Real x) { return std::isfinite(x); });
  }

  bool operator==(const basic_matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

using Matrix = basic_matrix<double>;

namespace detail {
inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shapes " + std::to_string(a.rows()) +
                     "x" + std::to_string(a.cols()) + " and " +
                     std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                     " differ");
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Vector helpers. Spans so that matrix columns and std::vector both work.

inline double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double squared_norm(std::span<const double> x) { return dot(x, x); }
inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

inline double norm1(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += std::abs(v);
  return s;
}

inline double norm_inf(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s = std::max(s, std::abs(v));
  return s;
}

/// y += a * x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ShapeError("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline void scale(std::span<double> x, double a) {
  for (double& v : x) v *= a;
}

inline Vector project_nonneg(std::span<const double> x) {
  Vector out(x.begin(), x.end());
  for (double& v : out) v = std::max(v, 0.0);
  return out;
}

inline bool any_positive(std::span<const double> x) {
  return std::any_of(x.begin(), x.end(), [](double v) { return v > 0.0; });
}

inline bool all_nonneg(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return v >= 0.0; });
}

// ---------------------------------------------------------------------------
// Matrix products.

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) +
                     " and " + std::to_string(b.rows()) + " differ");
  Matrix c(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    auto cj = c.col(j);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double bkj = b(k, j);
      if (bkj == 0.0) continue;
      axpy(bkj, a.col(k), cj);
    }
  }
  return c;
}

/// aᵀ b without forming the transpose.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts differ");
  Matrix c(a.cols(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t i = 0; i < a.cols(); ++i) c(i, j) = dot(a.col(i), b.col(j));
  return c;
}

/// a bᵀ without forming the transpose.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: column counts differ");
  Matrix c(a.rows(), b.rows());
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const auto ak = a.col(k);
    const auto bk = b.col(k);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double bjk = bk[j];
      if (bjk == 0.0) continue;
      axpy(bjk, ak, c.col(j));
    }
  }
  return c;
}

/// Gram matrix aᵀa.
inline Matrix gram(const Matrix& a) { return matmul_tn(a, a); }

inline Vector matvec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw ShapeError("matvec: length mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t j = 0; j < a.cols(); ++j)
    if (x[j] != 0.0) axpy(x[j], a.col(j), y);
  return y;
}

/// aᵀ x
inline Vector matvec_t(const Matrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw ShapeError("matvec_t: length mismatch");
  Vector y(a.cols());
  for (std::size_t j = 0; j < a.cols(); ++j) y[j] = dot(a.col(j), x);
  return y;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t j = 0; j < a.cols(); ++j)
    for (std::size_t i = 0; i < a.rows(); ++i) t(j, i) = a(i, j);
  return t;
}

// ---------------------------------------------------------------------------
// Elementwise operations and norms.

inline double frobenius_inner(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "frobenius_inner");
  return dot(a.data(), b.data());
}

inline double frobenius_norm2(const Matrix& a) { return squared_norm(a.data()); }
inline double frobenius_norm(const Matrix& a) { return norm2(a.data()); }

inline Matrix project_nonneg(const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data()) v = std::max(v, 0.0);
  return out;
}

inline bool all_nonneg(const Matrix& a) { return all_nonneg(a.data()); }

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "hadamard");
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] *= bd[k];
  return out;
}

/// Elementwise a ⊘ b; zero denominators are replaced by kDivisionGuard.
inline Matrix hadamard_div(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "hadamard_div");
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t k = 0; k < o.size(); ++k)
    o[k] /= (bd[k] == 0.0 ? kDivisionGuard : bd[k]);
  return out;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "add");
  Matrix out = a;
  axpy(1.0, b.data(), out.data());
  return out;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "subtract");
  Matrix out = a;
  axpy(-1.0, b.data(), out.data());
  return out;
}

inline Matrix operator*(double s, const Matrix& a) {
  Matrix out = a;
  scale(out.data(), s);
  return out;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  detail::require_same_shape(a, b, "max_abs_diff");
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    d = std::max(d, std::abs(a.data()[k] - b.data()[k]));
  return d;
}

}  // namespace nmf
