#pragma once

#include <cstddef>
#include <span>

#include "nmf/matrix.hpp"

namespace nmf {

struct ArmijoParams {
  double sigma = 0.01;
  double beta = 0.1;
  /// The expansion loop has no natural bound; it is cut after this many
  /// enlargements and the last accepted point is kept.
  std::size_t max_expansions = 50;
  /// Shrinking below this step is reported as a stall.
  double alpha_floor = 1e-20;
};

struct ArmijoResult {
  Vector x_next;
  double f_next = 0.0;
  /// Step that produced x_next.
  double step = 0.0;
  /// Step to start the next outer iteration with (the last value tried).
  double alpha_next = 0.0;
  bool stalled = false;
  std::size_t evaluations = 0;
};

namespace detail {
inline void projected_step(std::span<const double> x, std::span<const double> g,
                           double alpha, Vector& y) {
  y.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = std::max(0.0, x[i] - alpha * g[i]);
}

inline double directional(std::span<const double> g, std::span<const double> x,
                          std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += g[i] * (y[i] - x[i]);
  return s;
}
}  // namespace detail

/**
 * One outer iteration of projected gradient with the Armijo rule.
 *
 * y = [x − α∇F(x)]₊ is accepted when F(y) − F(x) ≤ σ⟨∇F(x), y − x⟩. If the
 * starting α is accepted it is enlarged by 1/β until the test fails and the
 * last accepted y is kept; otherwise α is shrunk by β until the test holds.
 * `f` maps a point (std::span<const double>) to its objective value.
 */
template <class Objective>
ArmijoResult armijo_search(Objective&& f, std::span<const double> x, double fx,
                           std::span<const double> grad, double alpha,
                           const ArmijoParams& p = {}) {
  if (x.size() != grad.size()) throw ShapeError("armijo: gradient length mismatch");
  ArmijoResult res;
  Vector y;
  double fy = 0.0;
  auto accepted = [&](double a) {
    detail::projected_step(x, grad, a, y);
    fy = f(std::span<const double>(y));
    ++res.evaluations;
    return fy - fx <= p.sigma * detail::directional(grad, x, y);
  };
  auto stall = [&] {
    res.x_next.assign(x.begin(), x.end());
    res.f_next = fx;
    res.step = 0.0;
    res.alpha_next = alpha;
    res.stalled = true;
    return res;
  };

  detail::projected_step(x, grad, alpha, y);
  if (std::equal(y.begin(), y.end(), x.begin())) return stall();

  if (!accepted(alpha)) {
    do {
      alpha *= p.beta;
      if (alpha < p.alpha_floor) return stall();
    } while (!accepted(alpha));
    res.step = alpha;
  } else {
    Vector last_y = y;
    double last_f = fy, last_alpha = alpha;
    for (std::size_t k = 0; k < p.max_expansions; ++k) {
      last_y = y;
      last_f = fy;
      last_alpha = alpha;
      alpha /= p.beta;
      if (!accepted(alpha)) {
        y = std::move(last_y);
        fy = last_f;
        break;
      }
      last_alpha = alpha;
    }
    res.step = last_alpha;
  }
  res.x_next = std::move(y);
  res.f_next = fy;
  res.alpha_next = alpha;
  return res;
}

struct FoResult {
  Vector x_next;
  double f_next = 0.0;
  double lipschitz_next = 0.0;
  bool stalled = false;
  std::size_t evaluations = 0;
};

/**
 * One outer iteration of the first-order (quadratic upper model) scheme.
 *
 * y = [x − ∇F(x)/L]₊ is accepted once
 * F(y) − F(x) ≤ ⟨∇F(x), y − x⟩ + (L/2)‖y − x‖²; until then L grows by the
 * factor `beta` (> 1). After acceptance L is relaxed by the same factor for
 * the next call. L above `lipschitz_max` is reported as a stall.
 */
template <class Objective>
FoResult fo_step(Objective&& f, std::span<const double> x, double fx,
                 std::span<const double> grad, double lipschitz, double beta,
                 double lipschitz_max = 1e300) {
  if (!(lipschitz > 0.0)) throw InputError("fo_step: Lipschitz estimate must be positive");
  if (!(beta > 1.0)) throw InputError("fo_step: beta must exceed 1");
  FoResult res;
  Vector y;
  for (;;) {
    detail::projected_step(x, grad, 1.0 / lipschitz, y);
    const double fy = f(std::span<const double>(y));
    ++res.evaluations;
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d2 += (y[i] - x[i]) * (y[i] - x[i]);
    if (fy - fx <= detail::directional(grad, x, y) + 0.5 * lipschitz * d2) {
      res.x_next = std::move(y);
      res.f_next = fy;
      res.lipschitz_next = lipschitz / beta;
      return res;
    }
    lipschitz *= beta;
    if (lipschitz > lipschitz_max) {
      res.x_next.assign(x.begin(), x.end());
      res.f_next = fx;
      res.lipschitz_next = lipschitz_max;
      res.stalled = true;
      return res;
    }
  }
}

}  // namespace nmf
