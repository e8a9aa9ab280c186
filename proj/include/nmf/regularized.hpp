#pragma once

#include <vector>

#include "nmf/solvers.hpp"

namespace nmf {

/// Chain-neighbour averaging: (Bv)_i is the mean of v_{i−1} and v_{i+1}, with
/// the single neighbour used at both ends.
inline Matrix build_smoothing_matrix(std::size_t n) {
  if (n < 2) throw InputError("smoothing matrix needs n >= 2");
  Matrix B(n, n);
  B(0, 1) = 1.0;
  B(n - 1, n - 2) = 1.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    B(i, i - 1) = 0.5;
    B(i, i + 1) = 0.5;
  }
  return B;
}

/// Penalty weights for one column w:
/// β‖w‖₁ + (γ/2)‖w‖² + (δ/2)‖w − Bŵ‖², ŵ the column's value before the update.
struct ColumnWeights {
  double beta = 0.0;
  double gamma = 0.0;
  double delta = 0.0;

  bool is_zero() const { return beta == 0.0 && gamma == 0.0 && delta == 0.0; }
};

/**
 * Minimizer over w ≥ 0 of −⟨g, w⟩ + (c/2)‖w‖² + penalties, where g = R_tᵀu_t
 * and c = ‖u_t‖² (or g = R_t v_t, c = ‖v_t‖² for a column of U):
 * w = [g − β1 + δBŵ]₊ / (c + γ + δ). `b_hat` is Bŵ and may be empty when δ = 0.
 * Returns zero when the numerator vanishes.
 */
inline Vector regularized_column(std::span<const double> g, double c, const ColumnWeights& w,
                                 std::span<const double> b_hat) {
  Vector x(g.begin(), g.end());
  if (w.beta != 0.0)
    for (double& xi : x) xi -= w.beta;
  if (w.delta != 0.0) {
    if (b_hat.size() != x.size()) throw ShapeError("smoothing target length mismatch");
    axpy(w.delta, b_hat, x);
  }
  double denom = c;
  if (w.gamma != 0.0) denom += w.gamma;
  if (w.delta != 0.0) denom += w.delta;
  bool any = false;
  for (double& xi : x) {
    xi = std::max(0.0, xi);
    any = any || xi > 0.0;
  }
  if (!any) return Vector(x.size(), 0.0);
  if (!(denom > 0.0)) throw UndefinedUpdateError("regularized update has a zero denominator");
  for (double& xi : x) xi /= denom;
  return x;
}

/// v = [Rᵀu − β1]₊/‖u‖².
inline Vector update_l1(const Matrix& R, std::span<const double> u, double beta) {
  if (!(beta >= 0.0)) throw InputError("beta must be nonnegative");
  const double c = squared_norm(u);
  if (c == 0.0) throw UndefinedUpdateError("one-norm update needs u != 0");
  return regularized_column(matvec_t(R, u), c, {beta, 0.0, 0.0}, {});
}

/// v = [Rᵀu + δBv̂]₊/(‖u‖² + δ).
inline Vector update_smooth(const Matrix& R, std::span<const double> u, double delta,
                            std::span<const double> v_hat, const Matrix& B) {
  if (!(delta >= 0.0)) throw InputError("delta must be nonnegative");
  if (!(squared_norm(u) + delta > 0.0))
    throw UndefinedUpdateError("smoothing update needs u != 0 or delta > 0");
  const Vector b_hat = delta != 0.0 ? matvec(B, v_hat) : Vector{};
  return regularized_column(matvec_t(R, u), squared_norm(u), {0.0, 0.0, delta}, b_hat);
}

/// v = [Rᵀu − β1 + δBv̂]₊/(‖u‖² + γ + δ).
inline Vector update_combined(const Matrix& R, std::span<const double> u, const ColumnWeights& w,
                              std::span<const double> v_hat, const Matrix& B) {
  if (!(w.beta >= 0.0 && w.gamma >= 0.0 && w.delta >= 0.0))
    throw InputError("regularization weights must be nonnegative");
  const Vector b_hat = w.delta != 0.0 ? matvec(B, v_hat) : Vector{};
  return regularized_column(matvec_t(R, u), squared_norm(u), w, b_hat);
}

enum class RegularizedSide { U, V };

/// Per-column weights on the columns of one factor, and the averaging matrix.
struct RegularizerSpec {
  RegularizedSide side = RegularizedSide::U;
  std::vector<ColumnWeights> columns;  // one per rank-one term; missing = zero
  /// Row-stochastic smoothing matrix sized to the regularized factor's rows;
  /// empty means build_smoothing_matrix.
  Matrix smoothing;
  /// Balance columns between sweeps even when some weight is nonzero.
  /// Off by default: the penalties are not scale invariant, so balancing can
  /// raise the traced objective.
  bool rebalance = false;

  static RegularizerSpec uniform(std::size_t r, ColumnWeights w,
                                 RegularizedSide side = RegularizedSide::U) {
    RegularizerSpec s;
    s.side = side;
    s.columns.assign(r, w);
    return s;
  }

  ColumnWeights weights(std::size_t t) const {
    return t < columns.size() ? columns[t] : ColumnWeights{};
  }

  bool is_zero() const {
    return std::all_of(columns.begin(), columns.end(),
                       [](const ColumnWeights& w) { return w.is_zero(); });
  }

  bool any_smoothing() const {
    return std::any_of(columns.begin(), columns.end(),
                       [](const ColumnWeights& w) { return w.delta != 0.0; });
  }

  void validate(std::size_t r, std::size_t rows) const {
    if (columns.size() > r) throw ShapeError("more column weights than rank-one terms");
    for (const auto& w : columns)
      if (!(w.beta >= 0.0 && w.gamma >= 0.0 && w.delta >= 0.0) || !std::isfinite(w.beta) ||
          !std::isfinite(w.gamma) || !std::isfinite(w.delta))
        throw InputError("regularization weights must be finite and nonnegative");
    if (smoothing.empty()) return;
    if (smoothing.rows() != rows || smoothing.cols() != rows)
      throw ShapeError("smoothing matrix does not match the regularized factor");
    for (std::size_t i = 0; i < rows; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < rows; ++j) {
        const double b = smoothing(i, j);
        if (!(b >= 0.0) || !std::isfinite(b)) throw InputError("smoothing matrix must be nonnegative");
        sum += b;
      }
      if (std::abs(sum - 1.0) > 1e-12) throw InputError("smoothing matrix rows must sum to 1");
    }
  }
};

/// Before/after values of the column subproblem, one entry per regularized update.
struct UpdateRecord {
  std::size_t term = 0;
  double before = 0.0;
  double after = 0.0;
};

namespace detail {

/// −⟨g, w⟩ + (c/2)‖w‖² + penalties; ½‖R_t − u wᵀ‖² + penalties up to a constant.
inline double column_subproblem(std::span<const double> g, double c, const ColumnWeights& cw,
                                std::span<const double> b_hat, std::span<const double> w) {
  double val = -dot(g, w) + 0.5 * c * squared_norm(w);
  if (cw.beta != 0.0) val += cw.beta * norm1(w);
  if (cw.gamma != 0.0) val += 0.5 * cw.gamma * squared_norm(w);
  if (cw.delta != 0.0) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += (w[i] - b_hat[i]) * (w[i] - b_hat[i]);
    val += 0.5 * cw.delta * s;
  }
  return val;
}

inline void regularized_update(const Matrix& A, FactorPair& fp, std::size_t t, bool u_side,
                               const ColumnWeights& cw, const Matrix& B,
                               std::vector<UpdateRecord>* log) {
  if (cw.is_zero()) {
    if (u_side)
      update_u(A, fp, t, 0.0);
    else
      update_v(A, fp, t, 0.0);
    return;
  }
  const Vector g = u_side ? residual_times_v(A, fp, t) : residual_t_times_u(A, fp, t);
  const double c = squared_norm(u_side ? fp.V.col(t) : fp.U.col(t));
  auto target = u_side ? fp.U.col(t) : fp.V.col(t);
  const Vector b_hat = cw.delta != 0.0 ? matvec(B, target) : Vector{};
  Vector next = regularized_column(g, c, cw, b_hat);
  if (log != nullptr)
    log->push_back({t, column_subproblem(g, c, cw, b_hat, target),
                    column_subproblem(g, c, cw, b_hat, next)});
  std::copy(next.begin(), next.end(), target.begin());
}

inline FactorPair regularized_sweep_impl(const Matrix& A, FactorPair fp,
                                         const RegularizerSpec& spec, const Matrix& B,
                                         SubstitutionBudget* budget,
                                         std::vector<UpdateRecord>* log) {
  const bool on_u = spec.side == RegularizedSide::U;
  const ColumnWeights none;
  for (std::size_t t = 0; t < fp.rank(); ++t) {
    const ColumnWeights cw = spec.weights(t);
    regularized_update(A, fp, t, false, on_u ? none : cw, B, log);
    regularized_update(A, fp, t, true, on_u ? cw : none, B, log);
    maybe_substitute(A, fp, t, budget);
  }
  return fp;
}

inline Matrix smoothing_or_default(const RegularizerSpec& spec, std::size_t rows) {
  if (!spec.smoothing.empty() || !spec.any_smoothing()) return spec.smoothing;
  return build_smoothing_matrix(rows);
}

}  // namespace detail

/**
 * One RRI sweep (v_t then u_t for each t) where the columns on spec.side use
 * the regularized closed form. Columns with all-zero weights get the plain
 * update, so a zero spec reproduces rri_sweep exactly.
 */
inline FactorPair regularized_rri_sweep(const Matrix& A, FactorPair fp, const RegularizerSpec& spec,
                                        SubstitutionBudget* budget = nullptr,
                                        std::vector<UpdateRecord>* log = nullptr) {
  check_compatible(A, fp);
  const std::size_t rows = spec.side == RegularizedSide::U ? A.rows() : A.cols();
  spec.validate(fp.rank(), rows);
  return detail::regularized_sweep_impl(A, std::move(fp), spec,
                                        detail::smoothing_or_default(spec, rows), budget, log);
}

/// f + Σ_t β_t‖w_t‖₁ + (γ_t/2)‖w_t‖² + (δ_t/2)‖w_t − Bw_t‖² over the regularized columns.
inline double regularized_objective(const Matrix& A, const FactorPair& fp,
                                    const RegularizerSpec& spec) {
  const Matrix& W = spec.side == RegularizedSide::U ? fp.U : fp.V;
  double val = objective(A, fp);
  const Matrix B = detail::smoothing_or_default(spec, W.rows());
  for (std::size_t t = 0; t < fp.rank(); ++t) {
    const ColumnWeights cw = spec.weights(t);
    const auto w = W.col(t);
    if (cw.beta != 0.0) val += cw.beta * norm1(w);
    if (cw.gamma != 0.0) val += 0.5 * cw.gamma * squared_norm(w);
    if (cw.delta != 0.0) {
      const Vector bw = matvec(B, w);
      double s = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) s += (w[i] - bw[i]) * (w[i] - bw[i]);
      val += 0.5 * cw.delta * s;
    }
  }
  return val;
}

/**
 * Regularized RRI from `start`. The trace records regularized_objective and
 * the projected gradient of f plus the penalty gradients
 * β + γw + δ(w − Bw) on the regularized columns. Columns are rebalanced
 * between sweeps when every weight is zero or spec.rebalance is set. The
 * penalized objective is guaranteed to decrease only without smoothing and
 * rebalancing: each smoothing update optimizes against the previous column,
 * not against the traced penalty.
 */
inline SolverReport run_regularized(const Matrix& A, const RegularizerSpec& spec,
                                    const StopRule& stop, FactorPair start,
                                    std::vector<UpdateRecord>* log = nullptr) {
  const std::size_t r = start.rank();
  detail::check_run_inputs(A, start, r);
  const bool on_u = spec.side == RegularizedSide::U;
  const std::size_t rows = on_u ? A.rows() : A.cols();
  spec.validate(r, rows);
  const Matrix B = detail::smoothing_or_default(spec, rows);
  const double norm_a2 = frobenius_norm2(A);
  const bool zero = spec.is_zero();

  SubstitutionBudget budget{r};
  auto evaluate = [&](const FactorPair& x) {
    const ModelTerms terms = model_terms(A, x);
    KktResidual k = kkt_from_terms(x, terms);
    double obj = objective_from_terms(norm_a2, x, terms);
    if (!zero) {
      const Matrix& W = on_u ? x.U : x.V;
      Matrix& G = on_u ? k.grad_u : k.grad_v;
      for (std::size_t t = 0; t < r; ++t) {
        const ColumnWeights cw = spec.weights(t);
        if (cw.is_zero()) continue;
        const auto w = W.col(t);
        auto g = G.col(t);
        const Vector bw = cw.delta != 0.0 ? matvec(B, w) : Vector{};
        for (std::size_t i = 0; i < w.size(); ++i) {
          g[i] += cw.beta + cw.gamma * w[i];
          if (cw.delta != 0.0) g[i] += cw.delta * (w[i] - bw[i]);
        }
        if (cw.beta != 0.0) obj += cw.beta * norm1(w);
        if (cw.gamma != 0.0) obj += 0.5 * cw.gamma * squared_norm(w);
        if (cw.delta != 0.0) {
          double s = 0.0;
          for (std::size_t i = 0; i < w.size(); ++i) s += (w[i] - bw[i]) * (w[i] - bw[i]);
          obj += 0.5 * cw.delta * s;
        }
      }
    }
    return detail::Evaluation{obj, projected_gradient_norm(x, k), gradient_norm(k)};
  };
  auto sweep = [&](FactorPair& fp) {
    fp = detail::regularized_sweep_impl(A, std::move(fp), spec, B, &budget, log);
    return false;
  };
  return detail::drive(std::move(start), stop, zero || spec.rebalance, budget, sweep, evaluate);
}

/// As above, from init_scaled(A, r, seed).
inline SolverReport run_regularized(const Matrix& A, std::size_t r, const RegularizerSpec& spec,
                                    const StopRule& stop, std::uint64_t seed,
                                    std::vector<UpdateRecord>* log = nullptr) {
  return run_regularized(A, spec, stop, init_scaled(A, r, seed), log);
}

}  // namespace nmf
