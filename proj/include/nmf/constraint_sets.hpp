#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "nmf/model.hpp"
#include "nmf/random.hpp"

namespace nmf {

/// A set of normed vectors over which ⟨y, s⟩ can be maximized exactly.
struct ConstraintSet {
  enum class Kind { Normed, NormedNonneg, BoundedNonneg, Binary, SparseK, HoyerSparse };

  Kind kind = Kind::NormedNonneg;
  Vector lower;  // BoundedNonneg
  Vector upper;  // BoundedNonneg
  std::size_t k = 1;    // SparseK
  double target = 0.5;  // HoyerSparse

  static ConstraintSet of(Kind kind) {
    ConstraintSet s;
    s.kind = kind;
    return s;
  }
  static ConstraintSet normed() { return of(Kind::Normed); }
  static ConstraintSet normed_nonneg() { return of(Kind::NormedNonneg); }
  static ConstraintSet bounded_nonneg(Vector l, Vector p) {
    ConstraintSet s = of(Kind::BoundedNonneg);
    s.lower = std::move(l);
    s.upper = std::move(p);
    s.validate();
    return s;
  }
  static ConstraintSet binary() { return of(Kind::Binary); }
  static ConstraintSet sparse_k(std::size_t k) {
    ConstraintSet s = of(Kind::SparseK);
    s.k = k;
    if (k == 0) throw InputError("SparseK needs K >= 1");
    return s;
  }
  static ConstraintSet hoyer_sparse(double target) {
    ConstraintSet s = of(Kind::HoyerSparse);
    s.target = target;
    s.validate();
    return s;
  }

  /// Checks the parameters, and against the vector length when n > 0.
  void validate(std::size_t n = 0) const {
    switch (kind) {
      case Kind::BoundedNonneg: {
        if (lower.size() != upper.size()) throw InputError("bounds differ in length");
        if (n != 0 && lower.size() != n) throw ShapeError("bounds do not match vector length");
        for (std::size_t i = 0; i < lower.size(); ++i)
          if (!(lower[i] >= 0.0 && lower[i] <= upper[i]))
            throw InputError("bounds need 0 <= l <= p");
        if (norm2(lower) > 1.0 || norm2(upper) < 1.0)
          throw InputError("bounds admit no unit vector");
        break;
      }
      case Kind::SparseK:
        if (k == 0 || (n != 0 && k > n)) throw InputError("SparseK needs 1 <= K <= n");
        break;
      case Kind::HoyerSparse:
        if (!(target > 0.0 && target < 1.0)) throw InputError("Hoyer target must lie in (0, 1)");
        if (n == 1) throw InputError("Hoyer sparsity needs n >= 2");
        break;
      default:
        break;
    }
  }
};

/// (√n − ‖s‖₁/‖s‖₂)/(√n − 1); 0 for a flat vector, 1 for a coordinate vector.
inline double hoyer_sparsity(std::span<const double> s) {
  const double n = static_cast<double>(s.size());
  const double l2 = norm2(s);
  if (s.size() < 2 || l2 == 0.0) return 0.0;
  return (std::sqrt(n) - norm1(s) / l2) / (std::sqrt(n) - 1.0);
}

struct MaxInnerResult {
  Vector s;
  /// No point of the set has a positive inner product with y (or the set is
  /// empty for this y); s is then the zero vector, or l for BoundedNonneg.
  bool degenerate = false;
};

namespace detail {

/// Indices sorted by value, largest first, lowest index among equals.
inline std::vector<std::size_t> order_desc(std::span<const double> y) {
  std::vector<std::size_t> idx(y.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return y[a] > y[b]; });
  return idx;
}

inline Vector normalized(Vector x) {
  const double nx = norm2(x);
  if (nx > 0.0) scale(x, 1.0 / nx);
  return x;
}

inline constexpr std::size_t kHoyerMaxIterations = 100;
inline constexpr double kHoyerTolerance = 1e-10;

/**
 * Closest nonnegative vector to x with ‖s‖₂ = 1 and ‖s‖₁ = l1, by the
 * alternating projection of Hoyer (2004): project on the sum hyperplane, move
 * from the support midpoint onto the sphere, clamp negatives, repeat.
 */
inline Vector hoyer_project(std::span<const double> x, double l1) {
  const std::size_t n = x.size();
  std::vector<bool> zeroed(n, false);
  Vector s(x.begin(), x.end());
  {
    const double shift = (l1 - std::accumulate(s.begin(), s.end(), 0.0)) / static_cast<double>(n);
    for (double& v : s) v += shift;
  }
  for (std::size_t iter = 0; iter < kHoyerMaxIterations; ++iter) {
    std::size_t support = 0;
    for (std::size_t i = 0; i < n; ++i) support += zeroed[i] ? 0 : 1;
    const double mid = l1 / static_cast<double>(support);
    Vector m(n, 0.0), w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if (!zeroed[i]) {
        m[i] = mid;
        w[i] = s[i] - mid;
      }
    double a = squared_norm(w);
    if (a <= 1e-30) {
      // s sits on the midpoint; any direction in the hyperplane is as good,
      // so tilt toward low indices to stay deterministic.
      double centre = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (!zeroed[i]) centre += static_cast<double>(i);
      centre /= static_cast<double>(support);
      for (std::size_t i = 0; i < n; ++i)
        if (!zeroed[i]) w[i] = centre - static_cast<double>(i);
      a = squared_norm(w);
      if (a == 0.0) return m;  // single-entry support
    }
    const double b = 2.0 * dot(m, w);
    const double c = squared_norm(m) - 1.0;
    const double disc = std::max(0.0, b * b - 4.0 * a * c);
    const double alpha = (-b + std::sqrt(disc)) / (2.0 * a);
    for (std::size_t i = 0; i < n; ++i) s[i] = m[i] + alpha * w[i];

    bool negative = false;
    for (std::size_t i = 0; i < n; ++i)
      if (s[i] < 0.0) {
        negative = true;
        zeroed[i] = true;
        s[i] = 0.0;
      }
    if (!negative) break;
    std::size_t left = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!zeroed[i]) {
        ++left;
        sum += s[i];
      }
    const double shift = (sum - l1) / static_cast<double>(left);
    for (std::size_t i = 0; i < n; ++i)
      if (!zeroed[i]) s[i] -= shift;
  }
  for (double& v : s) v = std::max(0.0, v);
  return s;
}

}  // namespace detail

/// argmax over the set of ⟨y, s⟩.
inline MaxInnerResult max_inner(const ConstraintSet& set, std::span<const double> y) {
  using Kind = ConstraintSet::Kind;
  const std::size_t n = y.size();
  set.validate(n);
  for (double v : y)
    if (!std::isfinite(v)) throw InputError("max_inner: non-finite input");
  MaxInnerResult out;
  if (n == 0) {
    out.degenerate = true;
    return out;
  }

  switch (set.kind) {
    case Kind::Normed: {
      out.s.assign(y.begin(), y.end());
      if (norm2(y) == 0.0) {
        out.degenerate = true;
        return out;
      }
      out.s = detail::normalized(std::move(out.s));
      return out;
    }
    case Kind::NormedNonneg: {
      out.s = project_nonneg(y);
      if (norm2(out.s) == 0.0) {
        out.degenerate = true;
        return out;
      }
      out.s = detail::normalized(std::move(out.s));
      return out;
    }
    case Kind::BoundedNonneg: {
      Vector yp = project_nonneg(y);
      const double ny = norm2(yp);
      if (ny == 0.0) {
        out.s = set.lower;
        out.degenerate = true;
        return out;
      }
      out.s.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        out.s[i] = std::max(set.lower[i], std::min(set.upper[i], yp[i] / ny));
      return out;
    }
    case Kind::Binary: {
      const auto idx = detail::order_desc(y);
      double prefix = 0.0, best = -std::numeric_limits<double>::infinity();
      std::size_t best_k = 1;
      for (std::size_t k = 1; k <= n; ++k) {
        prefix += y[idx[k - 1]];
        const double val = prefix / std::sqrt(static_cast<double>(k));
        if (val > best) {
          best = val;
          best_k = k;
        }
      }
      out.s.assign(n, 0.0);
      const double h = 1.0 / std::sqrt(static_cast<double>(best_k));
      for (std::size_t t = 0; t < best_k; ++t) out.s[idx[t]] = h;
      return out;
    }
    case Kind::SparseK: {
      const auto idx = detail::order_desc(y);
      out.s.assign(n, 0.0);
      std::size_t kept = 0;
      for (std::size_t t = 0; t < n && kept < set.k; ++t) {
        if (!(y[idx[t]] > 0.0)) break;
        out.s[idx[t]] = y[idx[t]];
        ++kept;
      }
      if (kept == 0) {
        out.degenerate = true;
        return out;
      }
      out.s = detail::normalized(std::move(out.s));
      return out;
    }
    case Kind::HoyerSparse: {
      const double ny = norm2(y);
      Vector x(y.begin(), y.end());
      if (ny > 0.0) scale(x, 1.0 / ny);
      const double rn = std::sqrt(static_cast<double>(n));
      const double l1 = rn - set.target * (rn - 1.0);
      out.s = detail::hoyer_project(x, l1);
      if (std::abs(hoyer_sparsity(out.s) - set.target) > detail::kHoyerTolerance)
        out.degenerate = true;
      out.s = detail::normalized(std::move(out.s));
      return out;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// GRRI over X D Yᵀ.

/// A ≈ Σ d_i x_i y_iᵀ with x_i, y_i in their sets and d ≥ 0.
struct DiagonalFactorization {
  Matrix X;  // m x r
  Matrix Y;  // n x r
  Vector d;  // r

  std::size_t rank() const noexcept { return d.size(); }

  /// (XD, Y) as an ordinary factor pair.
  FactorPair to_factor_pair() const {
    FactorPair fp{X, Y};
    for (std::size_t i = 0; i < rank(); ++i) scale(fp.U.col(i), d[i]);
    return fp;
  }
};

inline double grri_objective(const Matrix& A, const DiagonalFactorization& f) {
  return objective(A, f.to_factor_pair());
}

/**
 * Random uniform columns mapped into their sets through max_inner, with
 * d = 0. The first sweep fits d.
 */
inline DiagonalFactorization grri_init(const Matrix& A, std::size_t r,
                                       const ConstraintSet& set_x,
                                       const ConstraintSet& set_y, std::uint64_t seed) {
  if (r == 0) throw InputError("rank must be at least 1");
  Lcg64 rng(seed);
  DiagonalFactorization f{Matrix(A.rows(), r), Matrix(A.cols(), r), Vector(r, 0.0)};
  for (std::size_t i = 0; i < r; ++i) {
    const auto x = max_inner(set_x, uniform_vector(A.rows(), rng)).s;
    std::copy(x.begin(), x.end(), f.X.col(i).begin());
  }
  for (std::size_t i = 0; i < r; ++i) {
    const auto y = max_inner(set_y, uniform_vector(A.cols(), rng)).s;
    std::copy(y.begin(), y.end(), f.Y.col(i).begin());
  }
  return f;
}

namespace detail {

/// max(0, ⟨g, s⟩)/‖s‖: the fit a column s can reach against g = R x (or Rᵀy).
inline double column_fit(std::span<const double> g, std::span<const double> s) {
  const double ns = norm2(s);
  return ns > 0.0 ? std::max(0.0, dot(g, s)) / ns : 0.0;
}

inline constexpr double kFitSlack = 1e-14;

}  // namespace detail

/**
 * One GRRI sweep. For each i, with R_i = A − Σ_{j≠i} d_j x_j y_jᵀ (never
 * formed): y_i ← argmax_{s∈𝕐} ⟨R_iᵀx_i, s⟩, x_i ← argmax_{s∈𝕏} ⟨R_i y_i, s⟩,
 * then d_i ← max(0, x_iᵀR_i y_i)/(‖x_i‖²‖y_i‖²), the optimal weight.
 *
 * A candidate column is kept only if it does not lower the attainable fit
 * max(0, ⟨g, s⟩)/‖s‖; exact maximizers over unit-norm sets always pass, the
 * check matters for sets whose output is not unit-norm. A degenerate
 * candidate (g ≤ 0 on a nonnegative set) leaves the old column in place.
 */
inline DiagonalFactorization grri_sweep(const Matrix& A, DiagonalFactorization f,
                                        const ConstraintSet& set_x,
                                        const ConstraintSet& set_y) {
  const std::size_t r = f.rank();
  if (f.X.cols() != r || f.Y.cols() != r || f.X.rows() != A.rows() || f.Y.rows() != A.cols())
    throw ShapeError("factorization shapes incompatible with target matrix");

  for (std::size_t i = 0; i < r; ++i) {
    // z = R_iᵀ x_i
    Vector z = matvec_t(A, f.X.col(i));
    for (std::size_t j = 0; j < r; ++j) {
      if (j == i || f.d[j] == 0.0) continue;
      const double c = f.d[j] * dot(f.X.col(j), f.X.col(i));
      if (c != 0.0) axpy(-c, f.Y.col(j), z);
    }
    {
      const auto cand = max_inner(set_y, z);
      if (!cand.degenerate && detail::column_fit(z, cand.s) >=
                                  detail::column_fit(z, f.Y.col(i)) * (1.0 - detail::kFitSlack))
        std::copy(cand.s.begin(), cand.s.end(), f.Y.col(i).begin());
    }
    // w = R_i y_i
    Vector w = matvec(A, f.Y.col(i));
    for (std::size_t j = 0; j < r; ++j) {
      if (j == i || f.d[j] == 0.0) continue;
      const double c = f.d[j] * dot(f.Y.col(j), f.Y.col(i));
      if (c != 0.0) axpy(-c, f.X.col(j), w);
    }
    {
      const auto cand = max_inner(set_x, w);
      if (!cand.degenerate && detail::column_fit(w, cand.s) >=
                                  detail::column_fit(w, f.X.col(i)) * (1.0 - detail::kFitSlack))
        std::copy(cand.s.begin(), cand.s.end(), f.X.col(i).begin());
    }
    const double nx2 = squared_norm(f.X.col(i)), ny2 = squared_norm(f.Y.col(i));
    f.d[i] = nx2 > 0.0 && ny2 > 0.0 ? std::max(0.0, dot(f.X.col(i), w)) / (nx2 * ny2) : 0.0;
  }
  return f;
}

struct GrriReport {
  DiagonalFactorization final;
  /// Objective before the first sweep and after each sweep.
  std::vector<double> objective_trace;
};

inline GrriReport grri_run(const Matrix& A, DiagonalFactorization f, const ConstraintSet& set_x,
                           const ConstraintSet& set_y, std::size_t sweeps) {
  GrriReport rep;
  rep.objective_trace.push_back(grri_objective(A, f));
  for (std::size_t k = 0; k < sweeps; ++k) {
    f = grri_sweep(A, std::move(f), set_x, set_y);
    rep.objective_trace.push_back(grri_objective(A, f));
  }
  rep.final = std::move(f);
  return rep;
}

}  // namespace nmf
