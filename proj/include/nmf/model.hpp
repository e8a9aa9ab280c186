#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "nmf/matrix.hpp"
#include "nmf/random.hpp"

namespace nmf {

/// The NMF iterate: A ≈ U Vᵀ with U (m x r) and V (n x r) nonnegative.
struct FactorPair {
  Matrix U;
  Matrix V;

  std::size_t rank() const noexcept { return U.cols(); }
  Matrix product() const { return matmul_nt(U, V); }
};

inline void check_compatible(const Matrix& A, const FactorPair& fp) {
  if (fp.U.cols() != fp.V.cols())
    throw ShapeError("factor column counts differ");
  if (fp.U.rows() != A.rows() || fp.V.rows() != A.cols())
    throw ShapeError("factor shapes incompatible with target matrix");
}

/// Gradients of ½‖A − UVᵀ‖² and the KKT summary at (U, V).
struct KktResidual {
  Matrix grad_u;
  Matrix grad_v;
  double min_grad_entry = 0.0;
  double max_complementarity = 0.0;
};

/// Quantities shared by the objective and gradients; computing them once per
/// sweep costs O(mnr).
struct ModelTerms {
  Matrix AV;   // m x r
  Matrix AtU;  // n x r
  Matrix VtV;  // r x r
  Matrix UtU;  // r x r
};

inline ModelTerms model_terms(const Matrix& A, const FactorPair& fp) {
  check_compatible(A, fp);
  return {matmul(A, fp.V), matmul_tn(A, fp.U), gram(fp.V), gram(fp.U)};
}

inline double objective_from_terms(double norm_a2, const FactorPair& fp,
                                   const ModelTerms& t) {
  const Matrix UVtV = matmul(fp.U, t.VtV);
  return 0.5 * (norm_a2 - 2.0 * frobenius_inner(fp.U, t.AV) +
                frobenius_inner(fp.U, UVtV));
}

/// ½‖A − UVᵀ‖²_F evaluated as ½(‖A‖² − 2⟨U, AV⟩ + ⟨U, U(VᵀV)⟩).
inline double objective(const Matrix& A, const FactorPair& fp) {
  check_compatible(A, fp);
  const Matrix AV = matmul(A, fp.V);
  const Matrix UVtV = matmul(fp.U, gram(fp.V));
  return 0.5 * (frobenius_norm2(A) - 2.0 * frobenius_inner(fp.U, AV) +
                frobenius_inner(fp.U, UVtV));
}

/// ½‖A − UVᵀ‖²_F from the materialized residual. Slower, but free of the
/// cancellation in objective() when the fit is nearly exact.
inline double residual_objective(const Matrix& A, const FactorPair& fp) {
  check_compatible(A, fp);
  return 0.5 * frobenius_norm2(A - fp.product());
}

inline KktResidual kkt_from_terms(const FactorPair& fp, const ModelTerms& t) {
  KktResidual k;
  k.grad_u = matmul(fp.U, t.VtV) - t.AV;
  k.grad_v = matmul(fp.V, t.UtU) - t.AtU;
  double min_g = std::numeric_limits<double>::infinity();
  double comp = 0.0;
  auto scan = [&](const Matrix& X, const Matrix& G) {
    for (std::size_t k2 = 0; k2 < X.size(); ++k2) {
      min_g = std::min(min_g, G.data()[k2]);
      comp = std::max(comp, std::abs(X.data()[k2] * G.data()[k2]));
    }
  };
  scan(fp.U, k.grad_u);
  scan(fp.V, k.grad_v);
  k.min_grad_entry = std::isfinite(min_g) ? min_g : 0.0;
  k.max_complementarity = comp;
  return k;
}

/// ∇_U = U(VᵀV) − AV and ∇_V = V(UᵀU) − AᵀU, with the largest
/// complementarity violation |X ∘ ∇_X|.
inline KktResidual gradients(const Matrix& A, const FactorPair& fp) {
  return kkt_from_terms(fp, model_terms(A, fp));
}

/// Squared Frobenius norm of the projected gradient of one block.
inline double projected_gradient_norm2(const Matrix& X, const Matrix& G) {
  detail::require_same_shape(X, G, "projected_gradient_norm");
  double s = 0.0;
  for (std::size_t k = 0; k < X.size(); ++k) {
    const double g = G.data()[k];
    const double p = X.data()[k] > 0.0 ? g : std::min(0.0, g);
    s += p * p;
  }
  return s;
}

/// ‖(∇ᴾ_U; ∇ᴾ_V)‖_F: gradient entries where X > 0, min(0, ∇) where X = 0.
inline double projected_gradient_norm(const FactorPair& fp, const KktResidual& k) {
  return std::sqrt(projected_gradient_norm2(fp.U, k.grad_u) +
                   projected_gradient_norm2(fp.V, k.grad_v));
}

/// ‖(∇_U; ∇_V)‖_F, the reference scale of the stopping test.
inline double gradient_norm(const KktResidual& k) {
  return std::sqrt(frobenius_norm2(k.grad_u) + frobenius_norm2(k.grad_v));
}

/**
 * Balances every column pair: U ← UD, V ← VD⁻¹ with
 * D_ii = sqrt(‖V_:i‖ / ‖U_:i‖), so that ‖U_:i‖ = ‖V_:i‖ and UVᵀ is unchanged.
 * A pair with a zero column is left as is (D_ii = 1).
 */
inline FactorPair rescale_columns(FactorPair fp) {
  for (std::size_t i = 0; i < fp.rank(); ++i) {
    const double nu = norm2(fp.U.col(i));
    const double nv = norm2(fp.V.col(i));
    if (nu == 0.0 || nv == 0.0) continue;
    const double d = std::sqrt(nv / nu);
    scale(fp.U.col(i), d);
    scale(fp.V.col(i), 1.0 / d);
  }
  return fp;
}

/// Balances (U, V) and scales both by √α, α = ⟨A, UVᵀ⟩ / ⟨UVᵀ, UVᵀ⟩, so
/// that UVᵀ is the best multiple of itself as an approximation of A.
inline FactorPair scale_to_target(const Matrix& A, FactorPair fp) {
  check_compatible(A, fp);
  fp = rescale_columns(std::move(fp));
  const Matrix P = fp.product();
  const double pp = frobenius_norm2(P);
  if (pp == 0.0) return fp;
  const double alpha = frobenius_inner(A, P) / pp;
  if (alpha <= 0.0) return fp;
  const double s = std::sqrt(alpha);
  scale(fp.U.data(), s);
  scale(fp.V.data(), s);
  return fp;
}

/// The scale factor α = ⟨A, UVᵀ⟩ / ⟨UVᵀ, UVᵀ⟩; tends to 1 at KKT points.
inline double scaling_factor(const Matrix& A, const FactorPair& fp) {
  const Matrix P = fp.product();
  return frobenius_inner(A, P) / frobenius_norm2(P);
}

/// Uniform(0,1) factors from the seeded generator (U first, then V, both
/// column-major), balanced and scaled against A.
inline FactorPair init_scaled(const Matrix& A, std::size_t r, std::uint64_t seed) {
  if (r == 0) throw InputError("rank must be at least 1");
  Lcg64 rng(seed);
  FactorPair fp;
  fp.U = uniform_matrix(A.rows(), r, rng);
  fp.V = uniform_matrix(A.cols(), r, rng);
  return scale_to_target(A, std::move(fp));
}

// ---------------------------------------------------------------------------
// Stopping.

struct StopRule {
  double epsilon_rel = 1e-4;
  /// Gradient norm at the (scaled) starting point.
  double initial_pgrad_norm = 0.0;
  double max_seconds = 45.0;
  std::size_t max_sweeps = 1'000'000;
};

enum class StopDecision { Continue, Criterion, TimeBudget, SweepBudget };

inline StopDecision should_stop(const StopRule& rule, double current_pgrad,
                                double elapsed_seconds, std::size_t sweeps) {
  if (current_pgrad <= rule.epsilon_rel * rule.initial_pgrad_norm)
    return StopDecision::Criterion;
  if (elapsed_seconds > rule.max_seconds) return StopDecision::TimeBudget;
  if (sweeps >= rule.max_sweeps) return StopDecision::SweepBudget;
  return StopDecision::Continue;
}

}  // namespace nmf
