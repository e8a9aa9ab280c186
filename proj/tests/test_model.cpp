#include <gtest/gtest.h>

#include "nmf/model.hpp"
#include "nmf/solvers.hpp"
#include "oracles.hpp"

using nmf::FactorPair;
using nmf::Matrix;

TEST(Objective, ExactFactorizationIsZero) {
  const Matrix u = oracle::random_matrix(4, 1, 1);
  const Matrix v = oracle::random_matrix(3, 1, 2);
  EXPECT_NEAR(nmf::objective(nmf::matmul_nt(u, v), {u, v}), 0.0, 1e-14);
}

TEST(Objective, HandValue) {
  EXPECT_DOUBLE_EQ(nmf::objective(Matrix{{2}}, {Matrix{{1}}, Matrix{{1}}}), 0.5);
}

TEST(Objective, ZeroFactorsGiveHalfNormSquared) {
  const Matrix A = oracle::random_matrix(3, 4, 3);
  EXPECT_NEAR(nmf::objective(A, {Matrix(3, 2), Matrix(4, 2)}), 0.5 * nmf::frobenius_norm2(A), 1e-14);
}

TEST(Objective, MatchesEntrywiseResidual) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Matrix A = oracle::random_matrix(5, 4, 10 + s);
    const Matrix U = oracle::random_matrix(5, 2, 20 + s);
    const Matrix V = oracle::random_matrix(4, 2, 30 + s);
    EXPECT_LE(oracle::rel_diff(nmf::objective(A, {U, V}), oracle::naive_objective(A, U, V)), 1e-12);
    EXPECT_LE(oracle::rel_diff(nmf::residual_objective(A, {U, V}), oracle::naive_objective(A, U, V)),
              1e-12);
  }
}

TEST(Objective, ShapeMismatchThrows) {
  EXPECT_THROW(nmf::objective(Matrix(3, 3), {Matrix(2, 1), Matrix(3, 1)}), nmf::ShapeError);
}

TEST(Gradients, MatchFiniteDifferences) {
  const Matrix A = oracle::random_matrix(4, 3, 40);
  const Matrix U = oracle::random_matrix(4, 2, 41);
  const Matrix V = oracle::random_matrix(3, 2, 42);
  const auto k = nmf::gradients(A, {U, V});
  const auto [gu, gv] = oracle::fd_gradients(A, U, V);
  EXPECT_LE(nmf::frobenius_norm(k.grad_u - gu), 1e-5 * nmf::frobenius_norm(gu));
  EXPECT_LE(nmf::frobenius_norm(k.grad_v - gv), 1e-5 * nmf::frobenius_norm(gv));
}

TEST(Gradients, ZeroFactorsGiveZeroGradient) {
  const auto k = nmf::gradients(oracle::random_matrix(3, 3, 5), {Matrix(3, 2), Matrix(3, 2)});
  for (double x : k.grad_u.data()) EXPECT_EQ(x, 0.0);
  for (double x : k.grad_v.data()) EXPECT_EQ(x, 0.0);
}

TEST(Gradients, VanishAtExactInteriorFactorization) {
  const Matrix U = oracle::random_matrix(3, 2, 6, 0.5, 1.5);
  const Matrix V = oracle::random_matrix(3, 2, 7, 0.5, 1.5);
  const auto k = nmf::gradients(nmf::matmul_nt(U, V), {U, V});
  EXPECT_LE(nmf::frobenius_norm(k.grad_u), 1e-12);
  EXPECT_LE(k.max_complementarity, 1e-12);
}

TEST(ProjectedGradient, BoundaryRule) {
  EXPECT_EQ(nmf::projected_gradient_norm2(Matrix{{0}}, Matrix{{5}}), 0.0);
  EXPECT_EQ(nmf::projected_gradient_norm2(Matrix{{0}}, Matrix{{-5}}), 25.0);
  EXPECT_EQ(nmf::projected_gradient_norm2(Matrix{{2}}, Matrix{{5}}), 25.0);
}

TEST(Rescale, HandComputedDiagonal) {
  FactorPair fp{Matrix{{4}, {0}}, Matrix{{1}}};
  fp = nmf::rescale_columns(fp);
  EXPECT_DOUBLE_EQ(fp.U(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(fp.V(0, 0), 2.0);
}

TEST(Rescale, BalancedIsIdentityAndZeroColumnsPass) {
  const FactorPair fp{Matrix{{3}, {4}}, Matrix{{5}}};
  const FactorPair out = nmf::rescale_columns(fp);
  EXPECT_EQ(nmf::max_abs_diff(out.U, fp.U), 0.0);
  const FactorPair z{Matrix{{0}, {0}}, Matrix{{5}}};
  EXPECT_EQ(nmf::rescale_columns(z).V(0, 0), 5.0);
}

TEST(Rescale, ProductAndObjectiveInvariant) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix A = oracle::random_matrix(6, 5, 50 + s);
    const FactorPair fp{oracle::random_matrix(6, 3, 60 + s, 0, 5), oracle::random_matrix(5, 3, 70 + s)};
    const FactorPair out = nmf::rescale_columns(fp);
    EXPECT_LE(nmf::frobenius_norm(out.product() - fp.product()), 1e-12 * nmf::frobenius_norm(fp.product()));
    EXPECT_LE(oracle::rel_diff(nmf::objective(A, out), nmf::objective(A, fp)), 1e-12);
    for (std::size_t i = 0; i < 3; ++i)
      EXPECT_NEAR(nmf::norm2(out.U.col(i)), nmf::norm2(out.V.col(i)), 1e-12);
  }
}

TEST(InitScaled, HandAlpha) {
  const FactorPair fp = nmf::scale_to_target(Matrix{{2}}, {Matrix{{1}}, Matrix{{1}}});
  EXPECT_DOUBLE_EQ(fp.U(0, 0), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(fp.V(0, 0), std::sqrt(2.0));
  EXPECT_NEAR(fp.product()(0, 0), 2.0, 1e-15);
}

TEST(InitScaled, DeterministicAndAlphaOne) {
  const Matrix A = oracle::random_matrix(7, 5, 8);
  const FactorPair a = nmf::init_scaled(A, 2, 99), b = nmf::init_scaled(A, 2, 99);
  EXPECT_EQ(nmf::max_abs_diff(a.U, b.U), 0.0);
  EXPECT_EQ(nmf::max_abs_diff(a.V, b.V), 0.0);
  EXPECT_NEAR(nmf::scaling_factor(A, a), 1.0, 1e-12);
  EXPECT_THROW(nmf::init_scaled(A, 0, 1), nmf::InputError);
}

TEST(InitScaled, AlphaTendsToOneAfterConvergence) {
  const Matrix A = oracle::random_matrix(10, 8, 9);
  nmf::SolverConfig cfg;
  cfg.rank = 2;
  cfg.stop.epsilon_rel = 1e-9;
  const auto rep = nmf::run(A, cfg);
  EXPECT_NEAR(nmf::scaling_factor(A, rep.final), 1.0, 1e-6);
}

TEST(ShouldStop, Decisions) {
  nmf::StopRule rule;
  rule.initial_pgrad_norm = 1.0;
  rule.epsilon_rel = 1e-3;
  EXPECT_EQ(nmf::should_stop(rule, 0.0, 0.0, 0), nmf::StopDecision::Criterion);
  EXPECT_EQ(nmf::should_stop(rule, 1e-2, 0.0, 1), nmf::StopDecision::Continue);
  EXPECT_EQ(nmf::should_stop(rule, 1e-2, 46.0, 1), nmf::StopDecision::TimeBudget);
  rule.max_sweeps = 5;
  EXPECT_EQ(nmf::should_stop(rule, 1e-2, 0.0, 5), nmf::StopDecision::SweepBudget);
}

TEST(Stationarity, NormIdentityAndBallAtConvergence) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Matrix A = oracle::random_matrix(9, 7, 300 + s);
    nmf::SolverConfig cfg;
    cfg.rank = 3;
    cfg.seed = s;
    cfg.stop.epsilon_rel = 1e-8;
    const auto rep = nmf::run(A, cfg);
    ASSERT_EQ(rep.stop_reason, nmf::StopReason::Criterion);
    const double na2 = nmf::frobenius_norm2(A);
    const Matrix P = rep.final.product();
    EXPECT_LE(std::abs(nmf::objective(A, rep.final) - 0.5 * (na2 - nmf::frobenius_norm2(P))), 1e-6 * na2);
    EXPECT_LE(nmf::frobenius_norm(P - 0.5 * A), 0.5 * std::sqrt(na2) + 1e-8);
  }
}
