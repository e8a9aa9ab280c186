#pragma once

#include <functional>
#include <numeric>
#include <vector>

#include "nmf/solvers.hpp"

namespace nmf {

/// d-way array, first index fastest.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<std::size_t> dims, double fill = 0.0)
      : dims_(std::move(dims)), data_(element_count(dims_), fill) {}
  DenseTensor(std::vector<std::size_t> dims, Vector data) : dims_(std::move(dims)), data_(std::move(data)) {
    if (data_.size() != element_count(dims_)) throw ShapeError("tensor data length mismatch");
  }
  /// The matrix as a 2-way tensor (same storage order).
  static DenseTensor from_matrix(const Matrix& A) {
    return DenseTensor({A.rows(), A.cols()}, Vector(A.data().begin(), A.data().end()));
  }

  std::size_t order() const noexcept { return dims_.size(); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t dim(std::size_t t) const { return dims_.at(t); }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  std::size_t linear_index(std::span<const std::size_t> idx) const {
    if (idx.size() != dims_.size()) throw ShapeError("index order mismatch");
    std::size_t k = 0;
    for (std::size_t t = dims_.size(); t-- > 0;) {
      if (idx[t] >= dims_[t]) throw ShapeError("tensor index out of range");
      k = k * dims_[t] + idx[t];
    }
    return k;
  }
  double& operator()(std::span<const std::size_t> idx) { return data_[linear_index(idx)]; }
  double operator()(std::span<const std::size_t> idx) const { return data_[linear_index(idx)]; }
  double& operator()(std::initializer_list<std::size_t> idx) {
    return (*this)(std::span<const std::size_t>(idx.begin(), idx.size()));
  }
  double operator()(std::initializer_list<std::size_t> idx) const {
    return (*this)(std::span<const std::size_t>(idx.begin(), idx.size()));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

 private:
  static std::size_t element_count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

  std::vector<std::size_t> dims_;
  Vector data_;
};

inline double squared_norm(const DenseTensor& T) { return squared_norm(T.data()); }

/// Σ_i σ_i u_{1i} ⋆ u_{2i} ⋆ … ⋆ u_{di}; factors[t] holds u_{t1..tr} as columns.
struct KruskalTensor {
  Vector sigma;
  std::vector<Matrix> factors;

  std::size_t rank() const noexcept { return sigma.size(); }
  std::size_t order() const noexcept { return factors.size(); }
  std::vector<std::size_t> dims() const {
    std::vector<std::size_t> d;
    for (const auto& f : factors) d.push_back(f.rows());
    return d;
  }
};

/**
 * Contracts every mode except `mode` against the given vectors, lowest mode
 * first, leaving a vector of length n_mode. vectors[mode] is ignored.
 */
inline Vector contract_except(const DenseTensor& T, const std::vector<Vector>& vectors,
                              std::size_t mode) {
  const std::size_t d = T.order();
  if (mode >= d) throw ShapeError("mode out of range");
  if (vectors.size() != d) throw ShapeError("need one vector slot per mode");
  for (std::size_t s = 0; s < d; ++s)
    if (s != mode && vectors[s].size() != T.dim(s)) throw ShapeError("vector length mismatch");

  std::vector<std::size_t> dims = T.dims();
  Vector cur(T.data().begin(), T.data().end());
  // `pos` tracks where original mode s sits among the remaining modes.
  std::size_t removed_before_mode = 0;
  for (std::size_t s = 0; s < d; ++s) {
    if (s == mode) continue;
    const std::size_t at = s - removed_before_mode;
    std::size_t inner = 1, outer = 1;
    for (std::size_t q = 0; q < at; ++q) inner *= dims[q];
    for (std::size_t q = at + 1; q < dims.size(); ++q) outer *= dims[q];
    const std::size_t ns = dims[at];
    const Vector& u = vectors[s];
    Vector next(inner * outer, 0.0);
    for (std::size_t b = 0; b < outer; ++b)
      for (std::size_t j = 0; j < ns; ++j) {
        const double w = u[j];
        if (w == 0.0) continue;
        const double* src = cur.data() + inner * (j + ns * b);
        double* dst = next.data() + inner * b;
        for (std::size_t a = 0; a < inner; ++a) dst[a] += w * src[a];
      }
    cur = std::move(next);
    dims.erase(dims.begin() + static_cast<std::ptrdiff_t>(at));
    ++removed_before_mode;
  }
  return cur;
}

inline DenseTensor kruskal_to_dense(const KruskalTensor& S) {
  const auto dims = S.dims();
  DenseTensor out(dims);
  const std::size_t d = dims.size();
  if (d == 0) return out;
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double v = 0.0;
    for (std::size_t i = 0; i < S.rank(); ++i) {
      if (S.sigma[i] == 0.0) continue;
      double p = S.sigma[i];
      for (std::size_t t = 0; t < d && p != 0.0; ++t) p *= S.factors[t](idx[t], i);
      v += p;
    }
    out.data()[k] = v;
    for (std::size_t t = 0; t < d; ++t) {
      if (++idx[t] < dims[t]) break;
      idx[t] = 0;
    }
  }
  return out;
}

/// ‖T − S‖_F.
inline double kruskal_error(const DenseTensor& T, const KruskalTensor& S) {
  if (T.dims() != S.dims()) throw ShapeError("tensor shapes differ");
  const DenseTensor D = kruskal_to_dense(S);
  double s = 0.0;
  for (std::size_t k = 0; k < T.size(); ++k) {
    const double e = T.data()[k] - D.data()[k];
    s += e * e;
  }
  return std::sqrt(s);
}

/// Uniform random unit-norm factors with σ = 0; the first sweep fits σ.
inline KruskalTensor kruskal_init(const std::vector<std::size_t>& dims, std::size_t r,
                                  std::uint64_t seed) {
  if (r == 0) throw InputError("rank must be at least 1");
  Lcg64 rng(seed);
  KruskalTensor S;
  S.sigma.assign(r, 0.0);
  for (std::size_t n : dims) {
    Matrix F = uniform_matrix(n, r, rng);
    for (std::size_t i = 0; i < r; ++i) {
      const double nf = norm2(F.col(i));
      if (nf > 0.0) scale(F.col(i), 1.0 / nf);
    }
    S.factors.push_back(std::move(F));
  }
  return S;
}

namespace detail {

inline Vector term_vector(const KruskalTensor& S, std::size_t t, std::size_t k) {
  const auto c = S.factors[t].col(k);
  return Vector(c.begin(), c.end());
}

/// R_k contracted on every mode except t against term k's factors:
/// T-contraction − Σ_{i≠k} σ_i Π_{s≠t} ⟨u_si, u_sk⟩ u_ti.
inline Vector residue_contraction(const DenseTensor& T, const KruskalTensor& S, std::size_t k,
                                  std::size_t t) {
  std::vector<Vector> vecs(S.order());
  for (std::size_t s = 0; s < S.order(); ++s)
    if (s != t) vecs[s] = term_vector(S, s, k);
  Vector y = contract_except(T, vecs, t);
  for (std::size_t i = 0; i < S.rank(); ++i) {
    if (i == k || S.sigma[i] == 0.0) continue;
    double c = S.sigma[i];
    for (std::size_t s = 0; s < S.order() && c != 0.0; ++s)
      if (s != t) c *= dot(S.factors[s].col(i), S.factors[s].col(k));
    if (c != 0.0) axpy(-c, S.factors[t].col(i), y);
  }
  return y;
}

/// σ_k, u_tk ← ‖y₊‖, y₊/‖y₊‖; leaves u_tk alone (σ_k = 0) when y ≤ 0.
inline void update_term_mode(const DenseTensor& T, KruskalTensor& S, std::size_t k, std::size_t t) {
  Vector y = residue_contraction(T, S, k, t);
  for (double& v : y) v = std::max(0.0, v);
  const double s = norm2(y);
  S.sigma[k] = s;
  if (s == 0.0) return;
  auto col = S.factors[t].col(k);
  for (std::size_t j = 0; j < y.size(); ++j) col[j] = y[j] / s;
}

/// Seeds a zero term with u_1k = e_i*, i* the mode-1 slice of R_k with the
/// largest positive part, then refits the term mode by mode.
inline bool substitute_term(const DenseTensor& T, KruskalTensor& S, std::size_t k) {
  KruskalTensor others = S;
  others.sigma[k] = 0.0;
  const DenseTensor D = kruskal_to_dense(others);
  const std::size_t n1 = T.dim(0);
  Vector slice(n1, 0.0);
  for (std::size_t p = 0; p < T.size(); ++p) {
    const double e = std::max(0.0, T.data()[p] - D.data()[p]);
    slice[p % n1] += e * e;
  }
  std::size_t best = n1;
  double best_val = 0.0;
  for (std::size_t i = 0; i < n1; ++i)
    if (slice[i] > best_val) {
      best_val = slice[i];
      best = i;
    }
  if (best == n1) return false;
  const KruskalTensor saved = S;
  auto u = S.factors[0].col(k);
  std::fill(u.begin(), u.end(), 0.0);
  u[best] = 1.0;
  // zero factors on the remaining modes would contract everything to zero
  for (std::size_t t = 2; t < S.order(); ++t) {
    auto f = S.factors[t].col(k);
    if (norm2(f) == 0.0) std::fill(f.begin(), f.end(), 1.0 / std::sqrt(static_cast<double>(f.size())));
  }
  for (std::size_t t = 1; t < S.order(); ++t) update_term_mode(T, S, k, t);
  update_term_mode(T, S, k, 0);
  if (S.sigma[k] > 0.0) return true;
  S = saved;
  return false;
}

}  // namespace detail

/**
 * One sweep of rank-one residue updates on a Kruskal model: for each term k,
 * each mode t in order, u_tk and σ_k become the best nonnegative unit factor
 * and weight against the residue with the other factors fixed. With a budget,
 * terms whose weight drops to zero are reseeded.
 */
inline KruskalTensor tensor_rri_sweep(const DenseTensor& T, KruskalTensor S,
                                      SubstitutionBudget* budget = nullptr) {
  if (T.dims() != S.dims()) throw ShapeError("tensor and model shapes differ");
  if (T.order() < 2) throw ShapeError("tensor order must be at least 2");
  for (std::size_t k = 0; k < S.rank(); ++k) {
    for (std::size_t t = 0; t < S.order(); ++t) detail::update_term_mode(T, S, k, t);
    if (budget != nullptr && S.sigma[k] == 0.0) {
      if (budget->remaining == 0) {
        budget->exhausted = true;
      } else if (detail::substitute_term(T, S, k)) {
        --budget->remaining;
        ++budget->used;
      }
    }
  }
  return S;
}

struct TensorReport {
  KruskalTensor final;
  /// ‖T − S‖_F before the first sweep and after each sweep.
  std::vector<double> error_trace;
  std::size_t substitutions_used = 0;
};

/// Sweeps until the error stops decreasing by more than `rel_tol` relative to
/// ‖T‖, or `max_sweeps`.
inline TensorReport tensor_rri(const DenseTensor& T, KruskalTensor S, std::size_t max_sweeps,
                               double rel_tol = 0.0) {
  if (!T.all_finite()) throw InputError("tensor has non-finite entries");
  for (double v : T.data())
    if (v < 0.0) throw InputError("tensor has negative entries");
  const double norm_t = std::sqrt(squared_norm(T));
  SubstitutionBudget budget{S.rank()};
  TensorReport rep;
  rep.error_trace.push_back(kruskal_error(T, S));
  for (std::size_t k = 0; k < max_sweeps; ++k) {
    S = tensor_rri_sweep(T, std::move(S), &budget);
    const double e = kruskal_error(T, S);
    const double prev = rep.error_trace.back();
    rep.error_trace.push_back(e);
    if (prev - e <= rel_tol * norm_t && k > 0) break;
  }
  rep.final = std::move(S);
  rep.substitutions_used = budget.used;
  return rep;
}

}  // namespace nmf
