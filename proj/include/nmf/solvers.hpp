#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nmf/line_search.hpp"
#include "nmf/model.hpp"
#include "nmf/nnls.hpp"

namespace nmf {

enum class Algorithm { Mult, FLine, CLine, FFO, CFO, ALS, RRI, DampedRRI };

inline constexpr Algorithm kAllAlgorithms[] = {
    Algorithm::Mult, Algorithm::FLine, Algorithm::CLine, Algorithm::FFO,
    Algorithm::CFO,  Algorithm::ALS,   Algorithm::RRI,   Algorithm::DampedRRI};

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Mult: return "Mult";
    case Algorithm::FLine: return "FLine";
    case Algorithm::CLine: return "CLine";
    case Algorithm::FFO: return "FFO";
    case Algorithm::CFO: return "CFO";
    case Algorithm::ALS: return "ALS";
    case Algorithm::RRI: return "RRI";
    case Algorithm::DampedRRI: return "DampedRRI";
  }
  return "?";
}

/// Case-insensitive lookup by name.
inline std::optional<Algorithm> parse_algorithm(std::string_view name) {
  auto lower = [](std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
  };
  const std::string key = lower(name);
  for (Algorithm a : kAllAlgorithms)
    if (lower(to_string(a)) == key) return a;
  return std::nullopt;
}

enum class StopReason { Criterion, TimeBudget, SweepBudget, Stalled };

inline std::string_view to_string(StopReason s) {
  switch (s) {
    case StopReason::Criterion: return "Criterion";
    case StopReason::TimeBudget: return "TimeBudget";
    case StopReason::SweepBudget: return "SweepBudget";
    case StopReason::Stalled: return "Stalled";
  }
  return "?";
}

/// Interleaved: v_1, u_1, v_2, u_2, ...  Blockwise: v_1..v_r, then u_1..u_r.
enum class RriOrder { Interleaved, Blockwise };

struct SolverConfig {
  Algorithm algorithm = Algorithm::RRI;
  std::size_t rank = 1;
  double armijo_sigma = 0.01;
  double armijo_beta = 0.1;
  double fo_beta = 2.0;
  double damping_psi = 1.0;
  double inner_eps_u = 1e-3;
  double inner_eps_v = 1e-3;
  /// Number of zero-column substitutions allowed per run; unset means r.
  std::optional<std::size_t> substitution_budget;
  RriOrder rri_order = RriOrder::Interleaved;
  StopRule stop;
  std::uint64_t seed = 0;

  void validate() const {
    if (rank == 0) throw InputError("rank must be at least 1");
    if (!(armijo_sigma > 0.0 && armijo_sigma < 1.0))
      throw InputError("armijo_sigma must lie in (0, 1)");
    if (!(armijo_beta > 0.0 && armijo_beta < 1.0))
      throw InputError("armijo_beta must lie in (0, 1)");
    if (!(fo_beta > 1.0)) throw InputError("fo_beta must exceed 1");
    if (!(damping_psi >= 0.0)) throw InputError("damping_psi must be nonnegative");
    if (!(inner_eps_u > 0.0) || !(inner_eps_v > 0.0))
      throw InputError("inner tolerances must be positive");
    if (!(stop.epsilon_rel >= 0.0)) throw InputError("epsilon must be nonnegative");
  }
};

struct TracePoint {
  std::size_t sweep = 0;
  double elapsed_seconds = 0.0;
  double objective = 0.0;
  double pgrad_norm = 0.0;
};

struct SolverReport {
  FactorPair final;
  std::vector<TracePoint> trace;
  StopReason stop_reason = StopReason::Criterion;
  std::size_t substitutions_used = 0;
  /// A zero column pair was left in place because the budget ran out.
  bool substitution_budget_exhausted = false;
  double initial_gradient_norm = 0.0;

  std::size_t sweeps() const { return trace.empty() ? 0 : trace.back().sweep; }
  double elapsed_seconds() const { return trace.empty() ? 0.0 : trace.back().elapsed_seconds; }
};

// ---------------------------------------------------------------------------
// Multiplicative rules.

inline FactorPair mult_sweep(const Matrix& A, FactorPair fp) {
  check_compatible(A, fp);
  {
    const Matrix num = matmul(A, fp.V);
    const Matrix den = matmul(fp.U, gram(fp.V));
    fp.U = hadamard(fp.U, hadamard_div(num, den));
  }
  const Matrix num = matmul_tn(A, fp.U);
  const Matrix den = matmul(fp.V, gram(fp.U));
  fp.V = hadamard(fp.V, hadamard_div(num, den));
  return fp;
}

// ---------------------------------------------------------------------------
// ALS.

namespace detail {

/// Solves every row of X (k x r) as an NNLS problem with Gram G and right-hand
/// sides the rows of B. Returns false if any row hit the swap budget; that row
/// keeps the solver's last iterate.
inline bool nnls_rows(const Matrix& G, const Matrix& B, Matrix& X) {
  bool clean = true;
  const std::size_t r = G.rows();
  Vector b(r);
  for (std::size_t i = 0; i < B.rows(); ++i) {
    for (std::size_t j = 0; j < r; ++j) b[j] = B(i, j);
    Vector x;
    try {
      x = solve_nnls_gram(G, b);
    } catch (const DegeneracyError& e) {
      x = e.best_iterate;
      clean = false;
    }
    for (std::size_t j = 0; j < r; ++j) X(i, j) = x[j];
  }
  return clean;
}

}  // namespace detail

struct AlsOutcome {
  FactorPair fp;
  bool degenerate = false;
};

inline AlsOutcome als_sweep_checked(const Matrix& A, FactorPair fp) {
  check_compatible(A, fp);
  bool clean = detail::nnls_rows(gram(fp.U), matmul_tn(A, fp.U), fp.V);
  clean = detail::nnls_rows(gram(fp.V), matmul(A, fp.V), fp.U) && clean;
  return {std::move(fp), !clean};
}

inline FactorPair als_sweep(const Matrix& A, FactorPair fp) {
  return als_sweep_checked(A, std::move(fp)).fp;
}

// ---------------------------------------------------------------------------
// Rank-one residue iterations.

namespace detail {

/// R_tᵀu_t = Aᵀu_t − Σ_{i≠t} v_i (u_iᵀu_t), without forming R_t.
inline Vector residual_t_times_u(const Matrix& A, const FactorPair& fp, std::size_t t) {
  const auto u = fp.U.col(t);
  Vector x = matvec_t(A, u);
  for (std::size_t i = 0; i < fp.rank(); ++i) {
    if (i == t) continue;
    const double c = dot(fp.U.col(i), u);
    if (c != 0.0) axpy(-c, fp.V.col(i), x);
  }
  return x;
}

/// R_t v_t = A v_t − Σ_{i≠t} u_i (v_iᵀv_t).
inline Vector residual_times_v(const Matrix& A, const FactorPair& fp, std::size_t t) {
  const auto v = fp.V.col(t);
  Vector x = matvec(A, v);
  for (std::size_t i = 0; i < fp.rank(); ++i) {
    if (i == t) continue;
    const double c = dot(fp.V.col(i), v);
    if (c != 0.0) axpy(-c, fp.U.col(i), x);
  }
  return x;
}

/// target ← [x + ψ·target]₊ / (‖other‖² + ψ), or zero when that is zero.
inline void damped_column_update(Vector x, std::span<double> target,
                                 std::span<const double> other, double psi) {
  if (psi > 0.0) axpy(psi, target, x);
  const double denom = squared_norm(other) + psi;
  bool any = false;
  for (double& xi : x) {
    xi = std::max(0.0, xi);
    any = any || xi > 0.0;
  }
  if (!any || !(denom > 0.0)) {
    std::fill(target.begin(), target.end(), 0.0);
    return;
  }
  for (std::size_t k = 0; k < x.size(); ++k) target[k] = x[k] / denom;
}

inline void update_v(const Matrix& A, FactorPair& fp, std::size_t t, double psi) {
  damped_column_update(residual_t_times_u(A, fp, t), fp.V.col(t), fp.U.col(t), psi);
}

inline void update_u(const Matrix& A, FactorPair& fp, std::size_t t, double psi) {
  damped_column_update(residual_times_v(A, fp, t), fp.U.col(t), fp.V.col(t), psi);
}

inline bool is_zero(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
}

}  // namespace detail

/// Tracks how many zero-column substitutions a run may still perform.
struct SubstitutionBudget {
  std::size_t remaining = 0;
  std::size_t used = 0;
  bool exhausted = false;
};

/**
 * Replaces a zero column pair (u_t, v_t) by u_t = e_i*, v_t = [R_tᵀe_i*]₊,
 * where row i* of R_t has the largest positive part (lowest index on ties).
 * Returns false and leaves fp alone when R_t ≤ 0.
 */
inline bool rri_substitute_zero(const Matrix& A, FactorPair& fp, std::size_t t) {
  check_compatible(A, fp);
  if (t >= fp.rank()) throw InputError("column index out of range");
  if (!detail::is_zero(fp.U.col(t)) || !detail::is_zero(fp.V.col(t)))
    throw InputError("substitution needs a zero column pair");
  Matrix R = A;
  for (std::size_t i = 0; i < fp.rank(); ++i) {
    if (i == t) continue;
    const auto u = fp.U.col(i);
    const auto v = fp.V.col(i);
    for (std::size_t j = 0; j < R.cols(); ++j)
      if (v[j] != 0.0) axpy(-v[j], u, R.col(j));
  }
  std::size_t best_row = R.rows();
  double best = 0.0;
  for (std::size_t i = 0; i < R.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < R.cols(); ++j) {
      const double x = std::max(0.0, R(i, j));
      s += x * x;
    }
    if (s > best) {
      best = s;
      best_row = i;
    }
  }
  if (best_row == R.rows()) return false;
  auto u = fp.U.col(t);
  std::fill(u.begin(), u.end(), 0.0);
  u[best_row] = 1.0;
  auto v = fp.V.col(t);
  for (std::size_t j = 0; j < R.cols(); ++j) v[j] = std::max(0.0, R(best_row, j));
  return true;
}

namespace detail {

inline void maybe_substitute(const Matrix& A, FactorPair& fp, std::size_t t,
                             SubstitutionBudget* budget) {
  if (budget == nullptr) return;
  if (!is_zero(fp.U.col(t)) || !is_zero(fp.V.col(t))) return;
  if (budget->remaining == 0) {
    budget->exhausted = true;
    return;
  }
  if (rri_substitute_zero(A, fp, t)) {
    --budget->remaining;
    ++budget->used;
  }
}

inline FactorPair rri_sweep_impl(const Matrix& A, FactorPair fp, double psi, RriOrder order,
                                 SubstitutionBudget* budget) {
  check_compatible(A, fp);
  const std::size_t r = fp.rank();
  if (order == RriOrder::Interleaved) {
    for (std::size_t t = 0; t < r; ++t) {
      update_v(A, fp, t, psi);
      update_u(A, fp, t, psi);
      maybe_substitute(A, fp, t, budget);
    }
  } else {
    for (std::size_t t = 0; t < r; ++t) update_v(A, fp, t, psi);
    for (std::size_t t = 0; t < r; ++t) update_u(A, fp, t, psi);
    for (std::size_t t = 0; t < r; ++t) maybe_substitute(A, fp, t, budget);
  }
  return fp;
}

}  // namespace detail

/**
 * One RRI sweep: for each t, v_t ← [R_tᵀu_t]₊/‖u_t‖², then
 * u_t ← [R_t v_t]₊/‖v_t‖², each the exact minimizer of ½‖R_t − u_t v_tᵀ‖²
 * over its block. A zero update zeroes the column. With a budget, a column
 * pair that ends up zero is reseeded by rri_substitute_zero.
 */
inline FactorPair rri_sweep(const Matrix& A, FactorPair fp,
                            RriOrder order = RriOrder::Interleaved,
                            SubstitutionBudget* budget = nullptr) {
  return detail::rri_sweep_impl(A, std::move(fp), 0.0, order, budget);
}

/// v_t ← [R_tᵀu_t + ψv_t]₊/(‖u_t‖² + ψ) and likewise for u_t; ψ = 0 is RRI.
inline FactorPair damped_rri_sweep(const Matrix& A, FactorPair fp, double psi,
                                   RriOrder order = RriOrder::Interleaved) {
  if (!(psi >= 0.0)) throw InputError("psi must be nonnegative");
  return detail::rri_sweep_impl(A, std::move(fp), psi, order, nullptr);
}

// ---------------------------------------------------------------------------
// Gradient schemes.

namespace detail {

/// ½‖A − UVᵀ‖² as a function of one block, given the other block's Gram
/// matrix G and the cross term C (AV for U, AᵀU for V).
struct BlockObjective {
  double norm_a2;
  const Matrix& G;
  const Matrix& C;

  double value(std::span<const double> x) const {
    const std::size_t rows = C.rows(), r = C.cols();
    double lin = 0.0, quad = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      const double* xj = x.data() + j * rows;
      const auto cj = C.col(j);
      for (std::size_t i = 0; i < rows; ++i) lin += xj[i] * cj[i];
    }
    Vector xg(rows);
    for (std::size_t j = 0; j < r; ++j) {
      std::fill(xg.begin(), xg.end(), 0.0);
      for (std::size_t k = 0; k < r; ++k) {
        const double g = G(k, j);
        if (g == 0.0) continue;
        const double* xk = x.data() + k * rows;
        for (std::size_t i = 0; i < rows; ++i) xg[i] += xk[i] * g;
      }
      const double* xj = x.data() + j * rows;
      for (std::size_t i = 0; i < rows; ++i) quad += xj[i] * xg[i];
    }
    return 0.5 * (norm_a2 - 2.0 * lin + quad);
  }

  Matrix gradient(const Matrix& X) const { return matmul(X, G) - C; }

  /// value(y) − value(X) as ⟨∇, Δ⟩ + ½⟨Δ, ΔG⟩ with Δ = y − X. Near a
  /// stationary point value() loses the difference to cancellation.
  double change(const Matrix& X, const Matrix& grad, std::span<const double> y) const {
    const std::size_t rows = X.rows(), r = X.cols();
    Matrix D(rows, r);
    for (std::size_t k = 0; k < D.size(); ++k) D.data()[k] = y[k] - X.data()[k];
    const Matrix DG = matmul(D, G);
    return frobenius_inner(grad, D) + 0.5 * frobenius_inner(D, DG);
  }
};

struct StackedObjective {
  const Matrix& A;
  std::size_t m, n, r;

  FactorPair unpack(std::span<const double> x) const {
    FactorPair fp{Matrix(m, r), Matrix(n, r)};
    std::copy(x.begin(), x.begin() + m * r, fp.U.data().begin());
    std::copy(x.begin() + m * r, x.end(), fp.V.data().begin());
    return fp;
  }
  double operator()(std::span<const double> x) const { return objective(A, unpack(x)); }

  /// F(y) − F(base) as −⟨R, D⟩ + ½‖D‖², R = A − U₀V₀ᵀ, D the change in UVᵀ
  /// expanded in the factor steps.
  double change(const FactorPair& base, const Matrix& R, std::span<const double> y) const {
    const FactorPair next = unpack(y);
    const Matrix dU = next.U - base.U, dV = next.V - base.V;
    const Matrix D = matmul_nt(dU, base.V) + matmul_nt(base.U, dV) + matmul_nt(dU, dV);
    return -frobenius_inner(R, D) + 0.5 * frobenius_norm2(D);
  }
};

inline Vector pack(const Matrix& a, const Matrix& b) {
  Vector x(a.data().begin(), a.data().end());
  x.insert(x.end(), b.data().begin(), b.data().end());
  return x;
}

/// Per-run state carried between sweeps by the gradient schemes.
struct GradientState {
  double alpha = 1.0;
  double alpha_u = 1.0, alpha_v = 1.0;
  double lipschitz = 1.0;
  double lipschitz_u = 1.0, lipschitz_v = 1.0;
  double eps_u = 1e-3, eps_v = 1e-3;
  double initial_gradient_norm = 0.0;
};

inline constexpr std::size_t kMaxInnerIterations = 1000;

struct BlockSolve {
  std::size_t iterations = 0;
  bool stalled = false;
};

/// Iterates one block to ‖∇ᴾ‖ ≤ tol with Armijo (fo_beta unset) or FO steps.
inline BlockSolve solve_block(Matrix& X, const BlockObjective& f, double tol,
                              double& alpha_or_l, const ArmijoParams* armijo,
                              double fo_beta) {
  BlockSolve out;
  for (; out.iterations < kMaxInnerIterations; ++out.iterations) {
    const Matrix g = f.gradient(X);
    if (std::sqrt(projected_gradient_norm2(X, g)) <= tol) break;
    // objective measured relative to X, so the base value is 0
    auto fv = [&](std::span<const double> y) { return f.change(X, g, y); };
    Vector next;
    if (armijo != nullptr) {
      auto res = armijo_search(fv, X.data(), 0.0, g.data(), alpha_or_l, *armijo);
      alpha_or_l = res.alpha_next;
      if (res.stalled) {
        out.stalled = true;
        break;
      }
      next = std::move(res.x_next);
    } else {
      auto res = fo_step(fv, X.data(), 0.0, g.data(), alpha_or_l, fo_beta);
      alpha_or_l = res.lipschitz_next;
      if (res.stalled) {
        out.stalled = true;
        break;
      }
      next = std::move(res.x_next);
    }
    std::copy(next.begin(), next.end(), X.data().begin());
  }
  return out;
}

/// Returns true when the sweep could not move (stall signal).
inline bool gradient_sweep(const Matrix& A, double norm_a2, FactorPair& fp,
                           const SolverConfig& cfg, GradientState& st) {
  const ArmijoParams armijo{cfg.armijo_sigma, cfg.armijo_beta};
  switch (cfg.algorithm) {
    case Algorithm::FLine:
    case Algorithm::FFO: {
      const KktResidual k = gradients(A, fp);
      const Vector x = pack(fp.U, fp.V);
      const Vector g = pack(k.grad_u, k.grad_v);
      const StackedObjective f{A, fp.U.rows(), fp.V.rows(), fp.rank()};
      const Matrix R = A - fp.product();
      auto fv = [&](std::span<const double> y) { return f.change(fp, R, y); };
      Vector next;
      bool stalled;
      if (cfg.algorithm == Algorithm::FLine) {
        auto res = armijo_search(fv, x, 0.0, g, st.alpha, armijo);
        st.alpha = res.alpha_next;
        stalled = res.stalled;
        next = std::move(res.x_next);
      } else {
        auto res = fo_step(fv, x, 0.0, g, st.lipschitz, cfg.fo_beta);
        st.lipschitz = res.lipschitz_next;
        stalled = res.stalled;
        next = std::move(res.x_next);
      }
      fp = f.unpack(next);
      return stalled;
    }
    case Algorithm::CLine:
    case Algorithm::CFO: {
      const bool line = cfg.algorithm == Algorithm::CLine;
      BlockSolve su, sv;
      {
        const Matrix G = gram(fp.V), C = matmul(A, fp.V);
        const BlockObjective f{norm_a2, G, C};
        su = solve_block(fp.U, f, st.eps_u * st.initial_gradient_norm,
                         line ? st.alpha_u : st.lipschitz_u, line ? &armijo : nullptr,
                         cfg.fo_beta);
      }
      {
        const Matrix G = gram(fp.U), C = matmul_tn(A, fp.U);
        const BlockObjective f{norm_a2, G, C};
        sv = solve_block(fp.V, f, st.eps_v * st.initial_gradient_norm,
                         line ? st.alpha_v : st.lipschitz_v, line ? &armijo : nullptr,
                         cfg.fo_beta);
      }
      if (su.iterations == 0 && !su.stalled) st.eps_u *= 0.1;
      if (sv.iterations == 0 && !sv.stalled) st.eps_v *= 0.1;
      return su.stalled && sv.stalled && su.iterations == 0 && sv.iterations == 0;
    }
    default:
      throw InputError("not a gradient scheme");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Driver.

inline constexpr std::size_t kStallWindow = 10;
inline constexpr double kStallRelativeDecrease = 1e-15;

namespace detail {

struct Evaluation {
  double objective = 0.0;
  double pgrad_norm = 0.0;
  double gradient_norm = 0.0;
};

inline void check_run_inputs(const Matrix& A, const FactorPair& start, std::size_t rank) {
  if (!A.all_finite()) throw InputError("target matrix has non-finite entries");
  if (!all_nonneg(A)) throw InputError("target matrix has negative entries");
  check_compatible(A, start);
  if (start.rank() != rank) throw ShapeError("start rank differs from configured rank");
  if (!all_nonneg(start.U) || !all_nonneg(start.V))
    throw InputError("starting factors must be nonnegative");
}

/**
 * Shared sweep loop. `sweep(fp)` performs one sweep in place and returns a
 * stall signal; `evaluate(fp)` returns the traced objective, the projected
 * gradient norm and the full gradient norm. Stops on ‖∇ᴾ‖ ≤ ε‖∇‖₀, the time
 * or sweep budget, a stall signal, or kStallWindow consecutive sweeps that
 * neither decrease the objective by a relative 1e-15 nor improve the smallest
 * projected gradient seen so far.
 */
template <class Sweep, class Evaluate>
SolverReport drive(FactorPair fp, StopRule rule, bool rescale, const SubstitutionBudget& budget,
                   Sweep&& sweep, Evaluate&& evaluate) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t0).count(); };

  SolverReport rep;
  Evaluation ev = evaluate(fp);
  rep.initial_gradient_norm = ev.gradient_norm;
  rule.initial_pgrad_norm = ev.gradient_norm;
  rep.trace.push_back({0, elapsed(), ev.objective, ev.pgrad_norm});

  auto finish = [&](StopReason why) {
    rep.final = std::move(fp);
    rep.stop_reason = why;
    rep.substitutions_used = budget.used;
    rep.substitution_budget_exhausted = budget.exhausted;
    return rep;
  };
  auto to_reason = [](StopDecision d) {
    switch (d) {
      case StopDecision::Criterion: return StopReason::Criterion;
      case StopDecision::TimeBudget: return StopReason::TimeBudget;
      default: return StopReason::SweepBudget;
    }
  };

  if (auto d = should_stop(rule, ev.pgrad_norm, 0.0, 0); d != StopDecision::Continue)
    return finish(to_reason(d));

  std::size_t quiet = 0;
  double best_pg = ev.pgrad_norm;
  for (std::size_t k = 1;; ++k) {
    const bool signal = sweep(fp);
    if (rescale) fp = rescale_columns(std::move(fp));

    const double prev = ev.objective;
    ev = evaluate(fp);
    const double t = elapsed();
    rep.trace.push_back({k, t, ev.objective, ev.pgrad_norm});

    const StopDecision d = should_stop(rule, ev.pgrad_norm, t, k);
    if (d == StopDecision::Criterion) return finish(StopReason::Criterion);
    if (signal) return finish(StopReason::Stalled);

    const bool progressed =
        prev - ev.objective >= kStallRelativeDecrease * std::max(std::abs(prev), 1e-300) ||
        ev.pgrad_norm < best_pg * (1.0 - 1e-6);
    best_pg = std::min(best_pg, ev.pgrad_norm);
    quiet = progressed ? 0 : quiet + 1;
    if (quiet >= kStallWindow) return finish(StopReason::Stalled);
    if (d != StopDecision::Continue) return finish(to_reason(d));
  }
}

}  // namespace detail

/**
 * Runs cfg.algorithm from `start` until the projected gradient norm drops to
 * cfg.stop.epsilon_rel times the gradient norm at the start, a budget runs
 * out, or the iteration stalls. Columns are rebalanced after every sweep.
 */
inline SolverReport run(const Matrix& A, const SolverConfig& cfg, FactorPair start) {
  cfg.validate();
  detail::check_run_inputs(A, start, cfg.rank);
  const double norm_a2 = frobenius_norm2(A);

  detail::GradientState gs;
  gs.eps_u = cfg.inner_eps_u;
  gs.eps_v = cfg.inner_eps_v;
  SubstitutionBudget budget{cfg.substitution_budget.value_or(cfg.rank)};

  bool first = true;
  auto evaluate = [&](const FactorPair& x) {
    const ModelTerms terms = model_terms(A, x);
    const KktResidual k = kkt_from_terms(x, terms);
    const detail::Evaluation ev{objective_from_terms(norm_a2, x, terms),
                                projected_gradient_norm(x, k), gradient_norm(k)};
    if (first) {
      // Inner tolerances of CLine/CFO are relative to the starting gradient.
      gs.initial_gradient_norm = ev.gradient_norm;
      first = false;
    }
    return ev;
  };
  auto sweep = [&](FactorPair& fp) {
    switch (cfg.algorithm) {
      case Algorithm::Mult:
        fp = mult_sweep(A, std::move(fp));
        return false;
      case Algorithm::ALS: {
        auto out = als_sweep_checked(A, std::move(fp));
        fp = std::move(out.fp);
        return out.degenerate;
      }
      case Algorithm::RRI:
        fp = rri_sweep(A, std::move(fp), cfg.rri_order, &budget);
        return false;
      case Algorithm::DampedRRI:
        fp = damped_rri_sweep(A, std::move(fp), cfg.damping_psi, cfg.rri_order);
        return false;
      default:
        return detail::gradient_sweep(A, norm_a2, fp, cfg, gs);
    }
  };
  return detail::drive(std::move(start), cfg.stop, true, budget, sweep, evaluate);
}

/// As above, from init_scaled(A, cfg.rank, cfg.seed).
inline SolverReport run(const Matrix& A, const SolverConfig& cfg) {
  cfg.validate();
  return run(A, cfg, init_scaled(A, cfg.rank, cfg.seed));
}

}  // namespace nmf
