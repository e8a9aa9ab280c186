#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include "nmf/model.hpp"
#include "nmf/random.hpp"

namespace nmf::bench {

/// Uniform [0,1) entries, column-major from the seeded generator.
inline Matrix gen_random_instance(std::size_t m, std::size_t n, std::uint64_t seed) {
  if (m == 0 || n == 0) throw InputError("instance dimensions must be positive");
  Lcg64 rng(seed);
  return uniform_matrix(m, n, rng);
}

inline std::uint64_t matrix_seed(std::uint64_t seed, std::size_t matrix_id) {
  return seed ^ mix64(matrix_id);
}

inline std::uint64_t start_seed(std::uint64_t seed, std::size_t matrix_id, std::size_t start_id) {
  return seed ^ mix64(mix64(matrix_id) ^ (start_id + 0x632BE59BD9B4E019ULL));
}

inline constexpr std::size_t kSmoothSources = 4;

/// The four source profiles on x ∈ [0, 1], each peaking at 1.
inline double smooth_source(std::size_t which, double x) {
  using std::numbers::pi;
  switch (which) {
    case 0:  // half-sine arch
      return std::sin(pi * x);
    case 1: {  // Gaussian bump
      const double z = (x - 0.3) / 0.08;
      return std::exp(-0.5 * z * z);
    }
    case 2: {  // raised cosine around 0.7
      const double z = (x - 0.7) / 0.25;
      return std::abs(z) < 1.0 ? 0.5 * (1.0 + std::cos(pi * z)) : 0.0;
    }
    case 3: {  // smoothstep ramp from 0.4 to 0.8, then flat
      const double z = std::clamp((x - 0.4) / 0.4, 0.0, 1.0);
      return z * z * (3.0 - 2.0 * z);
    }
    default:
      throw InputError("no such source");
  }
}

/// n_points samples of each source on an even grid over [0, 1].
inline Matrix smooth_sources(std::size_t n_points) {
  if (n_points < 2) throw InputError("need at least two sample points");
  Matrix F(n_points, kSmoothSources);
  for (std::size_t j = 0; j < kSmoothSources; ++j)
    for (std::size_t i = 0; i < n_points; ++i)
      F(i, j) = smooth_source(j, static_cast<double>(i) / static_cast<double>(n_points - 1));
  return F;
}

struct SmoothMixture {
  Matrix A;      // max(FEᵀ + N, 0)
  Matrix F;      // n_points x 4
  Matrix E;      // n_mixtures x 4
  Matrix clean;  // FEᵀ
  double noise_ratio = 0.0;  // ‖N‖/‖FEᵀ‖ before clipping
};

/// A = max(FEᵀ + N, 0) with E uniform [0,1) and Gaussian N scaled to
/// ‖N‖_F = noise_rel·‖FEᵀ‖_F.
inline SmoothMixture gen_smooth_mixture(std::size_t n_points = 200, std::size_t n_mixtures = 100,
                                        double noise_rel = 0.2, std::uint64_t seed = 0) {
  if (n_mixtures == 0) throw InputError("need at least one mixture");
  if (!(noise_rel >= 0.0)) throw InputError("noise level must be nonnegative");
  SmoothMixture s;
  s.F = smooth_sources(n_points);
  Lcg64 rng(seed);
  s.E = uniform_matrix(n_mixtures, kSmoothSources, rng);
  s.clean = matmul_nt(s.F, s.E);
  Matrix N(n_points, n_mixtures);
  for (double& v : N.data()) v = rng.normal();
  const double nn = frobenius_norm(N);
  const double target = noise_rel * frobenius_norm(s.clean);
  if (nn > 0.0) scale(N.data(), target / nn);
  s.noise_ratio = frobenius_norm(N) / frobenius_norm(s.clean);
  s.A = project_nonneg(s.clean + N);
  return s;
}

/// Mean over nonzero columns of Σ_i (w_{i+1} − 2w_i + w_{i−1})², w the column
/// scaled to unit norm.
inline double second_difference_energy(const Matrix& U) {
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t j = 0; j < U.cols(); ++j) {
    const auto c = U.col(j);
    const double nc = norm2(c);
    if (nc == 0.0) continue;
    double e = 0.0;
    for (std::size_t i = 1; i + 1 < c.size(); ++i) {
      const double d = (c[i + 1] - 2.0 * c[i] + c[i - 1]) / nc;
      e += d * d;
    }
    total += e;
    ++counted;
  }
  return counted ? total / static_cast<double>(counted) : 0.0;
}

}  // namespace nmf::bench
