#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "nmf/matrix.hpp"

namespace nmf {

/// splitmix64 finalizer; used to derive independent seeds from ids.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/**
 * 64-bit linear congruential generator (Knuth's MMIX constants).
 *
 * The standard library distributions are implementation-defined, so uniform
 * and normal variates are produced here from the raw bits to make runs
 * reproducible across platforms and compilers.
 */
class Lcg64 {
 public:
  explicit Lcg64(std::uint64_t seed) noexcept : state_(mix64(seed)) {}

  std::uint64_t next() noexcept {
    state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
    return state_;
  }

  /// Uniform in [0, 1), 53 high bits.
  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Fills a rows x cols matrix column-major with uniform [0,1) draws.
inline Matrix uniform_matrix(std::size_t rows, std::size_t cols, Lcg64& rng) {
  Matrix out(rows, cols);
  for (double& v : out.data()) v = rng.uniform();
  return out;
}

inline Vector uniform_vector(std::size_t n, Lcg64& rng) {
  Vector out(n);
  for (double& v : out) v = rng.uniform();
  return out;
}

}  // namespace nmf
