#pragma once

#include <optional>
#include <vector>

#include "nmf/matrix.hpp"

namespace nmf {

/// min_{v ≥ 0} ½‖target − design·v‖².
struct NnlsProblem {
  Matrix design;
  Vector target;
};

namespace detail {

/// Cholesky solve of the principal submatrix G[idx, idx] z = b[idx].
/// Returns nullopt when the submatrix is not numerically positive definite.
inline std::optional<Vector> cholesky_solve_sub(const Matrix& G,
                                                std::span<const double> b,
                                                const std::vector<std::size_t>& idx) {
  const std::size_t k = idx.size();
  Matrix L(k, k);
  double diag_scale = 0.0;
  for (std::size_t a : idx) diag_scale = std::max(diag_scale, G(a, a));
  const double pivot_floor = 1e-13 * std::max(diag_scale, 1e-300);
  for (std::size_t j = 0; j < k; ++j) {
    double d = G(idx[j], idx[j]);
    for (std::size_t p = 0; p < j; ++p) d -= L(j, p) * L(j, p);
    if (!(d > pivot_floor)) return std::nullopt;
    L(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < k; ++i) {
      double s = G(idx[i], idx[j]);
      for (std::size_t p = 0; p < j; ++p) s -= L(i, p) * L(j, p);
      L(i, j) = s / L(j, j);
    }
  }
  Vector z(k);
  for (std::size_t i = 0; i < k; ++i) {
    double s = b[idx[i]];
    for (std::size_t p = 0; p < i; ++p) s -= L(i, p) * z[p];
    z[i] = s / L(i, i);
  }
  for (std::size_t ii = k; ii-- > 0;) {
    double s = z[ii];
    for (std::size_t p = ii + 1; p < k; ++p) s -= L(p, ii) * z[p];
    z[ii] = s / L(ii, ii);
  }
  return z;
}

}  // namespace detail

/**
 * Lawson–Hanson active-set NNLS in normal-equation form:
 * min_{v ≥ 0} ½vᵀGv − bᵀv with G = UᵀU, b = Uᵀa.
 *
 * The entering variable is the one with the most negative gradient
 * coordinate (largest b − Gv), lowest index on ties. Passing the Gram
 * matrix lets callers reuse it across many right-hand sides.
 *
 * Throws DegeneracyError (carrying the current iterate) after more than
 * `max_swaps` entering steps; 0 means 3·r.
 */
inline Vector solve_nnls_gram(const Matrix& G, std::span<const double> b,
                              std::size_t max_swaps = 0) {
  const std::size_t r = b.size();
  if (G.rows() != r || G.cols() != r) throw ShapeError("nnls: Gram shape mismatch");
  if (max_swaps == 0) max_swaps = 3 * r;

  Vector v(r, 0.0);
  const double scale = norm_inf(b);
  if (scale == 0.0) return v;
  const double tol = 1e-12 * scale;

  std::vector<bool> passive(r, false), blocked(r, false);
  auto dual = [&]() {
    Vector w(b.begin(), b.end());
    for (std::size_t j = 0; j < r; ++j)
      if (v[j] != 0.0) axpy(-v[j], G.col(j), w);
    return w;
  };

  std::size_t swaps = 0;
  Vector w = dual();
  for (;;) {
    std::size_t enter = r;
    double best = tol;
    for (std::size_t j = 0; j < r; ++j)
      if (!passive[j] && !blocked[j] && w[j] > best) {
        best = w[j];
        enter = j;
      }
    if (enter == r) break;
    if (++swaps > max_swaps)
      throw DegeneracyError("nnls: active-set swap budget exceeded", v);
    passive[enter] = true;

    for (;;) {
      std::vector<std::size_t> idx;
      for (std::size_t j = 0; j < r; ++j)
        if (passive[j]) idx.push_back(j);
      auto z = detail::cholesky_solve_sub(G, b, idx);
      if (!z) {
        // Entering column is numerically dependent on the passive set.
        passive[enter] = false;
        blocked[enter] = true;
        break;
      }
      bool feasible = true;
      for (double zi : *z) feasible = feasible && zi > 0.0;
      if (feasible) {
        std::fill(v.begin(), v.end(), 0.0);
        for (std::size_t k = 0; k < idx.size(); ++k) v[idx[k]] = (*z)[k];
        break;
      }
      // Step toward z until the first passive coordinate hits zero.
      double alpha = 1.0;
      std::size_t leaving = r;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const double vi = v[idx[k]], zi = (*z)[k];
        if (zi <= 0.0) {
          const double denom = vi - zi;
          const double a = denom > 0.0 ? vi / denom : 0.0;
          if (a < alpha || leaving == r) {
            alpha = std::min(alpha, a);
            leaving = idx[k];
          }
        }
      }
      if (leaving == enter && alpha == 0.0) {
        // Roundoff made the entering coordinate non-positive right away.
        passive[enter] = false;
        blocked[enter] = true;
        break;
      }
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const std::size_t i = idx[k];
        v[i] += alpha * ((*z)[k] - v[i]);
        if (i == leaving || v[i] <= 0.0) {
          v[i] = 0.0;
          passive[i] = false;
        }
      }
      if (std::none_of(passive.begin(), passive.end(), [](bool p) { return p; }))
        break;
    }
    w = dual();
  }
  return v;
}

/// Active-set solution of min_{v ≥ 0} ½‖a − Uv‖².
inline Vector solve_nnls(const NnlsProblem& p) {
  if (p.design.rows() != p.target.size())
    throw ShapeError("nnls: design rows and target length differ");
  return solve_nnls_gram(gram(p.design), matvec_t(p.design, p.target));
}

}  // namespace nmf
