#include <gtest/gtest.h>

#include "nmf/regularized.hpp"
#include "oracles.hpp"

using nmf::ColumnWeights;
using nmf::Matrix;
using nmf::RegularizerSpec;
using nmf::Vector;

namespace {

// min over v ≥ 0 of ½‖R − u vᵀ‖² + β1ᵀv + (γ/2)‖v‖² + (δ/2)‖v − b‖², by projected gradient
Vector pg_column(const Matrix& R, const Vector& u, const ColumnWeights& w, const Vector& b) {
  double uu = 0.0;
  for (double x : u) uu += x * x;
  const double h = uu + w.gamma + w.delta;
  Vector c(R.cols(), 0.0);
  for (std::size_t j = 0; j < R.cols(); ++j) {
    for (std::size_t i = 0; i < R.rows(); ++i) c[j] += R(i, j) * u[i];
    c[j] -= w.beta;
    if (w.delta != 0.0) c[j] += w.delta * b[j];
  }
  auto H = [h](const Vector& x) {
    Vector y = x;
    for (double& v : y) v *= h;
    return y;
  };
  return oracle::pg_quadratic(H, c, 2.0 * h, 2000, Vector(R.cols(), 1.0));
}

std::size_t nnz(std::span<const double> x) {
  std::size_t k = 0;
  for (double v : x) k += v > 0.0;
  return k;
}

}  // namespace

TEST(SmoothingMatrix, FourByFour) {
  const Matrix B = nmf::build_smoothing_matrix(4);
  const Matrix expected{{0, 1, 0, 0}, {0.5, 0, 0.5, 0}, {0, 0.5, 0, 0.5}, {0, 0, 1, 0}};
  EXPECT_EQ(nmf::max_abs_diff(B, expected), 0.0);
}

TEST(SmoothingMatrix, RowStochasticAndFixesConstants) {
  for (std::size_t n : {2u, 3u, 7u, 50u}) {
    const Matrix B = nmf::build_smoothing_matrix(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += B(i, j);
      EXPECT_DOUBLE_EQ(s, 1.0);
    }
    const Vector c(n, 3.5);
    EXPECT_EQ(nmf::matvec(B, c), c);
  }
  EXPECT_THROW(nmf::build_smoothing_matrix(1), nmf::InputError);
}

TEST(UpdateL1, HandExample) {
  const Matrix R{{1, 2}, {3, 4}};
  const Vector v = nmf::update_l1(R, Vector{1, 1}, 5.0);
  EXPECT_EQ(v, (Vector{0.0, 0.5}));
}

TEST(UpdateL1, LimitsAndErrors) {
  const Matrix R{{1, 2}, {3, 4}};
  EXPECT_EQ(nmf::update_l1(R, Vector{1, 1}, 0.0), (Vector{2, 3}));
  EXPECT_EQ(nmf::update_l1(R, Vector{1, 1}, 6.0), (Vector{0, 0}));
  EXPECT_THROW(nmf::update_l1(R, Vector{0, 0}, 1.0), nmf::UndefinedUpdateError);
  EXPECT_THROW(nmf::update_l1(R, Vector{1, 1}, -1.0), nmf::InputError);
}

TEST(UpdateSmooth, HandExample) {
  const Matrix R{{1, 2}, {3, 4}};
  const Matrix B{{0, 1}, {1, 0}};
  const Vector v = nmf::update_smooth(R, Vector{1, 1}, 2.0, Vector{1, 1}, B);
  EXPECT_DOUBLE_EQ(v[0], 1.5);
  EXPECT_DOUBLE_EQ(v[1], 2.0);
  EXPECT_EQ(nmf::update_smooth(R, Vector{1, 1}, 0.0, Vector{1, 1}, B), (Vector{2, 3}));
}

TEST(UpdateSmooth, LargeDeltaKeepsConstantColumn) {
  const Matrix R = oracle::random_matrix(5, 6, 1, -1, 1);
  const Vector u = oracle::random_vector(5, 2);
  const Vector c(6, 0.7);
  const Vector v = nmf::update_smooth(R, u, 1e8, c, nmf::build_smoothing_matrix(6));
  for (double x : v) EXPECT_NEAR(x, 0.7, 1e-6);
}

TEST(UpdateSmooth, LargeDeltaApproachesAverage) {
  const Matrix R = oracle::random_matrix(4, 5, 3, -1, 1);
  const Vector u = oracle::random_vector(4, 4);
  const Vector vh = oracle::random_vector(5, 5);
  const Matrix B = nmf::build_smoothing_matrix(5);
  const Vector bv = nmf::matvec(B, vh);
  for (double delta : {1e3, 1e5}) {
    const Vector v = nmf::update_smooth(R, u, delta, vh, B);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_LE(std::abs(v[j] - bv[j]), 50.0 / delta);
  }
}

TEST(UpdateCombined, ZeroWeightsIsRri) {
  const Matrix R = oracle::random_matrix(4, 5, 6, -1, 1);
  const Vector u = oracle::random_vector(4, 7);
  const Vector v = nmf::update_combined(R, u, {}, {}, Matrix{});
  const Vector rtu = nmf::project_nonneg(nmf::matvec_t(R, u));
  const double uu = nmf::squared_norm(u);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(v[j], rtu[j] / uu);
}

TEST(UpdateCombined, GammaShrinksWithoutChangingSupport) {
  const Matrix R = oracle::random_matrix(4, 6, 8, -1, 1);
  const Vector u = oracle::random_vector(4, 9);
  const Vector plain = nmf::update_combined(R, u, {}, {}, Matrix{});
  const Vector shrunk = nmf::update_combined(R, u, {0, 3.0, 0}, {}, Matrix{});
  const double ratio = nmf::squared_norm(u) / (nmf::squared_norm(u) + 3.0);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(shrunk[j], ratio * plain[j], 1e-15);
}

TEST(UpdateCombined, GammaZeroMatchesPrintedFormula) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Matrix R = oracle::random_matrix(5, 6, 100 + s, -1, 1);
    const Vector u = oracle::random_vector(5, 200 + s);
    const Vector vh = oracle::random_vector(6, 300 + s);
    const Matrix B = nmf::build_smoothing_matrix(6);
    const double beta = 0.3, delta = 2.0;
    const Vector v = nmf::update_combined(R, u, {beta, 0, delta}, vh, B);
    const double uu = nmf::squared_norm(u);
    for (std::size_t j = 0; j < 6; ++j) {
      double rtu = 0.0;
      for (std::size_t i = 0; i < 5; ++i) rtu += R(i, j) * u[i];
      double bv = 0.0;
      for (std::size_t k = 0; k < 6; ++k) bv += B(j, k) * vh[k];
      EXPECT_NEAR(v[j], std::max(0.0, rtu - beta + delta * bv) / (uu + delta), 1e-14);
    }
  }
}

TEST(UpdateCombined, MatchesProjectedGradientOracle) {
  const std::vector<ColumnWeights> cases{{0.4, 0, 0}, {0, 0, 3.0}, {0.2, 1.5, 2.0}};
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Matrix R = oracle::random_matrix(6, 6, 400 + s, -1, 1);
    const Vector u = oracle::random_vector(6, 500 + s);
    const Vector vh = oracle::random_vector(6, 600 + s);
    const Matrix B = nmf::build_smoothing_matrix(6);
    for (const auto& w : cases) {
      const Vector v = nmf::update_combined(R, u, w, vh, B);
      const Vector ref = pg_column(R, u, w, nmf::matvec(B, vh));
      for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(v[j], ref[j], 1e-10);
    }
  }
}

TEST(RegularizedSweep, ZeroSpecIsRri) {
  const Matrix A = oracle::random_matrix(8, 6, 10);
  const auto start = nmf::init_scaled(A, 3, 11);
  const auto spec = RegularizerSpec::uniform(3, {});
  const auto a = nmf::regularized_rri_sweep(A, start, spec);
  const auto b = nmf::rri_sweep(A, start);
  EXPECT_EQ(nmf::max_abs_diff(a.U, b.U), 0.0);
  EXPECT_EQ(nmf::max_abs_diff(a.V, b.V), 0.0);
}

TEST(RegularizedSweep, EveryUpdateLowersItsSubproblem) {
  const Matrix A = oracle::random_matrix(10, 8, 12);
  for (auto side : {nmf::RegularizedSide::U, nmf::RegularizedSide::V}) {
    auto spec = RegularizerSpec::uniform(3, {0.1, 0.5, 2.0}, side);
    std::vector<nmf::UpdateRecord> log;
    auto fp = nmf::init_scaled(A, 3, 13);
    for (int k = 0; k < 10; ++k) fp = nmf::regularized_rri_sweep(A, std::move(fp), spec, nullptr, &log);
    ASSERT_EQ(log.size(), 30u);
    for (const auto& rec : log) EXPECT_LE(rec.after, rec.before + 1e-12);
  }
}

TEST(RegularizedSweep, RejectsBadSpecs) {
  const Matrix A = oracle::random_matrix(4, 3, 14);
  const auto fp = nmf::init_scaled(A, 2, 15);
  EXPECT_THROW(nmf::regularized_rri_sweep(A, fp, RegularizerSpec::uniform(3, {})), nmf::ShapeError);
  EXPECT_THROW(nmf::regularized_rri_sweep(A, fp, RegularizerSpec::uniform(2, {-1, 0, 0})),
               nmf::InputError);
  auto spec = RegularizerSpec::uniform(2, {0, 0, 1});
  spec.smoothing = Matrix(4, 4, 0.5);
  EXPECT_THROW(nmf::regularized_rri_sweep(A, fp, spec), nmf::InputError);
}

TEST(RunRegularized, ZeroSpecReproducesRriTrace) {
  const Matrix A = oracle::random_matrix(15, 12, 16);
  nmf::SolverConfig cfg;
  cfg.rank = 3;
  cfg.stop.epsilon_rel = 1e-6;
  const auto start = nmf::init_scaled(A, 3, 17);
  const auto plain = nmf::run(A, cfg, start);
  const auto reg = nmf::run_regularized(A, RegularizerSpec::uniform(3, {}), cfg.stop, start);
  ASSERT_EQ(plain.trace.size(), reg.trace.size());
  for (std::size_t k = 0; k < plain.trace.size(); ++k)
    EXPECT_EQ(plain.trace[k].objective, reg.trace[k].objective);
  EXPECT_EQ(nmf::max_abs_diff(plain.final.U, reg.final.U), 0.0);
}

TEST(RunRegularized, PenalizedObjectiveMonotoneWithoutSmoothing) {
  const Matrix A = oracle::random_matrix(15, 12, 18);
  nmf::StopRule stop;
  stop.epsilon_rel = 1e-7;
  stop.max_sweeps = 500;
  for (ColumnWeights w : {ColumnWeights{0.5, 0, 0}, ColumnWeights{0, 2.0, 0}, ColumnWeights{0.2, 1.0, 0}}) {
    const auto rep = nmf::run_regularized(A, 3, RegularizerSpec::uniform(3, w), stop, 19);
    for (std::size_t k = 1; k < rep.trace.size(); ++k)
      EXPECT_LE(rep.trace[k].objective, rep.trace[k - 1].objective + 1e-12 * nmf::frobenius_norm2(A));
  }
}

TEST(RunRegularized, LargeBetaShrinksSupport) {
  const Matrix A = oracle::random_matrix(20, 15, 20);
  nmf::StopRule stop;
  stop.epsilon_rel = 1e-6;
  stop.max_sweeps = 2000;
  const auto start = nmf::init_scaled(A, 3, 21);
  const auto plain = nmf::run_regularized(A, RegularizerSpec::uniform(3, {}), stop, start);
  RegularizerSpec spec;
  spec.columns = {ColumnWeights{1.0, 0, 0}};
  const auto sparse = nmf::run_regularized(A, spec, stop, start);
  EXPECT_LT(nnz(sparse.final.U.col(0)), nnz(plain.final.U.col(0)));
}

TEST(RunRegularized, SmoothingLowersSecondDifferences) {
  // two smooth bumps plus noise
  const std::size_t m = 40, n = 25;
  Matrix F(m, 2);
  for (std::size_t i = 0; i < m; ++i) {
    const double x = static_cast<double>(i) / (m - 1);
    F(i, 0) = std::exp(-30 * (x - 0.3) * (x - 0.3));
    F(i, 1) = std::exp(-30 * (x - 0.7) * (x - 0.7));
  }
  Matrix A = nmf::matmul_nt(F, oracle::random_matrix(n, 2, 22, 0.2, 1));
  const Matrix noise = oracle::random_matrix(m, n, 23, 0, 0.2);
  A = A + noise;
  auto energy = [](const Matrix& U) {
    double e = 0.0;
    for (std::size_t t = 0; t < U.cols(); ++t) {
      const auto u = U.col(t);
      const double s = nmf::squared_norm(u);
      if (s == 0.0) continue;
      for (std::size_t i = 1; i + 1 < u.size(); ++i)
        e += (u[i + 1] - 2 * u[i] + u[i - 1]) * (u[i + 1] - 2 * u[i] + u[i - 1]) / s;
    }
    return e;
  };
  nmf::StopRule stop;
  stop.epsilon_rel = 1e-6;
  stop.max_sweeps = 1000;
  const auto start = nmf::init_scaled(A, 2, 24);
  auto smooth = RegularizerSpec::uniform(2, {0, 0, 100});
  smooth.rebalance = true;
  const auto plain = nmf::run_regularized(A, RegularizerSpec::uniform(2, {}), stop, start);
  const auto reg = nmf::run_regularized(A, smooth, stop, start);
  EXPECT_LT(energy(reg.final.U), energy(plain.final.U));
}
