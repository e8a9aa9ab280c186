#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "nmf/model.hpp"

namespace nmf {

/// A = P Σ Qᵀ with P (m x m), Q (n x n) orthogonal and σ sorted descending.
struct SvdResult {
  Matrix left;
  Vector singular;
  Matrix right;
};

namespace detail {

inline constexpr std::size_t kJacobiMaxSweeps = 60;
inline constexpr double kJacobiTolerance = 1e-15;

/// Extends the orthonormal columns of Q flagged in `have` to a full basis,
/// filling the others from the coordinate vectors with the largest residual.
inline void complete_basis(Matrix& Q, std::vector<bool>& have) {
  const std::size_t m = Q.rows();
  for (std::size_t j = 0; j < Q.cols(); ++j) {
    if (have[j]) continue;
    Vector best;
    double best_norm = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      Vector e(m, 0.0);
      e[i] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t k = 0; k < Q.cols(); ++k)
          if (have[k]) axpy(-dot(Q.col(k), e), Q.col(k), e);
      const double ne = norm2(e);
      if (ne > best_norm + 1e-12) {
        best_norm = ne;
        best = std::move(e);
      }
    }
    scale(best, 1.0 / best_norm);
    Q.set_col(j, best);
    have[j] = true;
  }
}

/// One-sided Jacobi on a tall matrix (rows >= cols).
inline SvdResult jacobi_tall(const Matrix& A) {
  const std::size_t m = A.rows(), n = A.cols();
  Matrix W = A;
  Matrix V = Matrix::identity(n);
  bool converged = n < 2;
  for (std::size_t sweep = 0; sweep < kJacobiMaxSweeps && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        auto wp = W.col(p), wq = W.col(q);
        const double alpha = squared_norm(wp), beta = squared_norm(wq);
        const double gamma = dot(wp, wq);
        if (gamma == 0.0 || std::abs(gamma) <= kJacobiTolerance * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double a = wp[i], b = wq[i];
          wp[i] = c * a - s * b;
          wq[i] = s * a + c * b;
        }
        auto vp = V.col(p), vq = V.col(q);
        for (std::size_t i = 0; i < n; ++i) {
          const double a = vp[i], b = vq[i];
          vp[i] = c * a - s * b;
          vq[i] = s * a + c * b;
        }
      }
    converged = !rotated;
  }
  if (!converged) throw NumericError("Jacobi SVD did not converge");

  Vector sig(n);
  for (std::size_t j = 0; j < n; ++j) sig[j] = norm2(W.col(j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sig[a] > sig[b]; });

  SvdResult out{Matrix(m, m), Vector(n), Matrix(n, n)};
  const double smax = n > 0 ? sig[order[0]] : 0.0;
  const double floor = static_cast<double>(std::max(m, n)) * 1e-15 * smax;
  std::vector<bool> have(m, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.singular[k] = sig[j];
    out.right.set_col(k, V.col(j));
    if (sig[j] > floor && sig[j] > 0.0) {
      Vector p(W.col(j).begin(), W.col(j).end());
      scale(p, 1.0 / sig[j]);
      out.left.set_col(k, p);
      have[k] = true;
    }
  }
  complete_basis(out.left, have);
  return out;
}

}  // namespace detail

/// Full SVD by one-sided (Hestenes) Jacobi; NumericError after 60 sweeps.
inline SvdResult svd(const Matrix& A) {
  if (!A.all_finite()) throw InputError("svd: non-finite entries");
  if (A.rows() >= A.cols()) return detail::jacobi_tall(A);
  SvdResult t = detail::jacobi_tall(transpose(A));
  return {std::move(t.right), std::move(t.singular), std::move(t.left)};
}

/// P Σ_r Qᵀ: the leading r singular triplets.
inline Matrix truncate(const SvdResult& s, std::size_t r) {
  if (r == 0 || r > s.singular.size()) throw InputError("truncation rank out of range");
  Matrix out(s.left.rows(), s.right.rows());
  for (std::size_t k = 0; k < r; ++k) {
    const double sk = s.singular[k];
    if (sk == 0.0) continue;
    const auto p = s.left.col(k), q = s.right.col(k);
    for (std::size_t j = 0; j < out.cols(); ++j) {
      const double w = sk * q[j];
      if (w != 0.0) axpy(w, p, out.col(j));
    }
  }
  return out;
}

struct NonnegBaseline {
  Matrix truncated;        // A_r
  Matrix nonneg_part;      // [A_r]₊
  double truncated_error;  // ‖A − A_r‖_F
  double nonneg_error;     // ‖A − [A_r]₊‖_F
};

/// Clipping the best rank-r approximation of a nonnegative A can only
/// move it closer to A.
inline NonnegBaseline nonneg_part_baseline(const Matrix& A, std::size_t r) {
  if (!all_nonneg(A)) throw InputError("baseline needs a nonnegative matrix");
  NonnegBaseline b;
  b.truncated = truncate(svd(A), r);
  b.nonneg_part = project_nonneg(b.truncated);
  b.truncated_error = frobenius_norm(A - b.truncated);
  b.nonneg_error = frobenius_norm(A - b.nonneg_part);
  return b;
}

/**
 * Best rank-one NMF of a nonnegative A: u = √σ₁ p₁, v = √σ₁ q₁ with the pair
 * signed so its largest-magnitude entry is positive. Roundoff negatives are
 * clipped.
 */
inline FactorPair rank_one_global(const Matrix& A) {
  if (!all_nonneg(A)) throw InputError("rank_one_global needs a nonnegative matrix");
  const SvdResult s = svd(A);
  FactorPair fp{Matrix(A.rows(), 1), Matrix(A.cols(), 1)};
  if (s.singular.empty() || s.singular[0] == 0.0) return fp;
  const double root = std::sqrt(s.singular[0]);
  const auto p = s.left.col(0), q = s.right.col(0);
  std::size_t big = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (std::abs(p[i]) > std::abs(p[big])) big = i;
  const double sign = p[big] < 0.0 ? -1.0 : 1.0;
  for (std::size_t i = 0; i < p.size(); ++i) fp.U(i, 0) = std::max(0.0, sign * root * p[i]);
  for (std::size_t j = 0; j < q.size(); ++j) fp.V(j, 0) = std::max(0.0, sign * root * q[j]);
  return fp;
}

/// Stationary point A_r of the unconstrained problem built from a chosen set
/// of singular triplets, with the two perturbed rank-r points around it.
struct SaddleWitness {
  double epsilon = 0.0;
  Matrix stationary;  // Σ_{i∈S} σ_i p_i q_iᵀ
  Matrix raised;      // largest chosen σ increased by ε
  Matrix lowered;     // rotated toward the largest unchosen triplet
  double stationary_error2 = 0.0;
  double raised_error2 = 0.0;
  double lowered_error2 = 0.0;
  bool increase_found = false;
  bool decrease_found = false;
};

/**
 * With σ_c the smallest chosen singular value and σ_b the largest unchosen
 * one: the raised point adds ε p_a q_aᵀ (a the largest chosen); the lowered
 * point adds ε√σ_c (p_c q_bᵀ + p_b q_cᵀ) + ε² p_b q_bᵀ, which stays rank r.
 * Default ε = min(0.1, ½√(2(σ_b − σ_c))) when σ_b > σ_c, else 0.1.
 * `chosen` holds indices into the sorted singular values.
 */
inline SaddleWitness saddle_probe(const Matrix& A, const std::vector<std::size_t>& chosen,
                                  std::optional<double> eps = std::nullopt) {
  const SvdResult s = svd(A);
  const std::size_t k = s.singular.size();
  if (chosen.empty() || chosen.size() >= k) throw InputError("chosen set must leave a triplet out");
  std::vector<bool> in(k, false);
  for (std::size_t i : chosen) {
    if (i >= k || in[i]) throw InputError("chosen indices must be distinct and in range");
    in[i] = true;
  }
  std::size_t a = k, c = k, b = k;
  for (std::size_t i = 0; i < k; ++i) {
    if (in[i]) {
      if (a == k || s.singular[i] > s.singular[a]) a = i;
      if (c == k || s.singular[i] < s.singular[c]) c = i;
    } else if (b == k || s.singular[i] > s.singular[b]) {
      b = i;
    }
  }
  const double sc = s.singular[c], sb = s.singular[b];
  SaddleWitness w;
  if (eps) {
    if (!(*eps >= 0.0)) throw InputError("epsilon must be nonnegative");
    w.epsilon = *eps;
  } else {
    w.epsilon = sb > sc ? std::min(0.1, 0.5 * std::sqrt(2.0 * (sb - sc))) : 0.1;
  }
  const double e = w.epsilon;

  auto outer_add = [&](Matrix& M, double weight, std::size_t pi, std::size_t qi) {
    const auto p = s.left.col(pi), q = s.right.col(qi);
    for (std::size_t j = 0; j < M.cols(); ++j) axpy(weight * q[j], p, M.col(j));
  };
  w.stationary = Matrix(A.rows(), A.cols());
  for (std::size_t i = 0; i < k; ++i)
    if (in[i]) outer_add(w.stationary, s.singular[i], i, i);
  w.raised = w.stationary;
  outer_add(w.raised, e, a, a);
  w.lowered = w.stationary;
  outer_add(w.lowered, e * std::sqrt(sc), c, b);
  outer_add(w.lowered, e * std::sqrt(sc), b, c);
  outer_add(w.lowered, e * e, b, b);

  w.stationary_error2 = frobenius_norm2(A - w.stationary);
  w.raised_error2 = frobenius_norm2(A - w.raised);
  w.lowered_error2 = frobenius_norm2(A - w.lowered);
  w.increase_found = w.raised_error2 > w.stationary_error2;
  w.decrease_found = w.lowered_error2 < w.stationary_error2;
  return w;
}

}  // namespace nmf
