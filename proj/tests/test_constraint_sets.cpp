#include <gtest/gtest.h>

#include "nmf/constraint_sets.hpp"
#include "nmf/solvers.hpp"
#include "nmf/svd.hpp"
#include "oracles.hpp"

using nmf::ConstraintSet;
using nmf::Matrix;
using nmf::Vector;

namespace {

std::vector<ConstraintSet> all_sets(std::size_t n) {
  Vector lo(n, 0.0), hi(n, 1.0);
  lo[0] = 0.1;
  hi[n - 1] = 0.4;
  return {ConstraintSet::normed(),          ConstraintSet::normed_nonneg(),
          ConstraintSet::bounded_nonneg(lo, hi), ConstraintSet::binary(),
          ConstraintSet::sparse_k(2),       ConstraintSet::hoyer_sparse(0.4)};
}

}  // namespace

TEST(MaxInner, BinaryPrefixExample) {
  const auto res = nmf::max_inner(ConstraintSet::binary(), Vector{3, 2, -1});
  const double h = 1.0 / std::sqrt(2.0);
  ASSERT_EQ(res.s.size(), 3u);
  EXPECT_DOUBLE_EQ(res.s[0], h);
  EXPECT_DOUBLE_EQ(res.s[1], h);
  EXPECT_EQ(res.s[2], 0.0);
  EXPECT_NEAR(oracle::binary_enum(Vector{3, 2, -1}), 5.0 / std::sqrt(2.0), 1e-15);
}

TEST(MaxInner, SparseKExample) {
  const auto res = nmf::max_inner(ConstraintSet::sparse_k(2), Vector{3, -1, 2, 5});
  const double n = std::sqrt(34.0);
  EXPECT_NEAR(res.s[0], 3 / n, 1e-15);
  EXPECT_EQ(res.s[1], 0.0);
  EXPECT_EQ(res.s[2], 0.0);
  EXPECT_NEAR(res.s[3], 5 / n, 1e-15);
  EXPECT_FALSE(res.degenerate);
}

TEST(MaxInner, NormedNonnegUnitVector) {
  const auto res = nmf::max_inner(ConstraintSet::normed_nonneg(), Vector{1, 0, 0});
  EXPECT_EQ(res.s, (Vector{1, 0, 0}));
}

TEST(MaxInner, NormedKeepsSign) {
  const auto res = nmf::max_inner(ConstraintSet::normed(), Vector{3, -4});
  EXPECT_DOUBLE_EQ(res.s[0], 0.6);
  EXPECT_DOUBLE_EQ(res.s[1], -0.8);
}

TEST(MaxInner, NonpositiveInputIsFlagged) {
  for (const auto& set : {ConstraintSet::normed_nonneg(), ConstraintSet::sparse_k(2)}) {
    const auto res = nmf::max_inner(set, Vector{-1, 0, -3});
    EXPECT_TRUE(res.degenerate);
    EXPECT_EQ(nmf::norm2(res.s), 0.0);
  }
}

TEST(MaxInner, BoundedClampsWithoutRenormalizing) {
  const auto set = ConstraintSet::bounded_nonneg({0, 0}, {0.5, 1});
  const auto res = nmf::max_inner(set, Vector{1, 1});
  EXPECT_DOUBLE_EQ(res.s[0], 0.5);
  EXPECT_DOUBLE_EQ(res.s[1], 1.0 / std::sqrt(2.0));
}

TEST(MaxInner, TiesResolveDeterministically) {
  // Binary: smallest k on a tie
  EXPECT_EQ(nmf::max_inner(ConstraintSet::binary(), Vector{0, 0}).s, (Vector{1, 0}));
  // SparseK: lowest index at the cutoff
  EXPECT_EQ(nmf::max_inner(ConstraintSet::sparse_k(1), Vector{1, 2, 2, 0}).s, (Vector{0, 1, 0, 0}));
}

TEST(MaxInner, RejectsBadParameters) {
  EXPECT_THROW(ConstraintSet::bounded_nonneg({0.5}, {0.2}), nmf::InputError);
  EXPECT_THROW(ConstraintSet::bounded_nonneg({0, 0}, {0.1, 0.1}), nmf::InputError);
  EXPECT_THROW(ConstraintSet::sparse_k(0), nmf::InputError);
  EXPECT_THROW(nmf::max_inner(ConstraintSet::sparse_k(4), Vector{1, 2}), nmf::InputError);
  EXPECT_THROW(ConstraintSet::hoyer_sparse(1.0), nmf::InputError);
  EXPECT_THROW(nmf::max_inner(ConstraintSet::normed(), Vector{1, NAN}), nmf::InputError);
}

TEST(MaxInner, BinaryMatchesEnumeration) {
  for (std::uint64_t s = 0; s < 500; ++s) {
    const std::size_t n = 1 + s % 12;
    const Vector y = oracle::random_vector(n, 5000 + s, -1, 1);
    const auto res = nmf::max_inner(ConstraintSet::binary(), y);
    EXPECT_NEAR(nmf::dot(y, res.s), oracle::binary_enum(y), 1e-12) << "seed " << s;
    std::size_t k = 0;
    for (double x : res.s) k += x != 0.0;
    for (double x : res.s)
      if (x != 0.0) {
        EXPECT_DOUBLE_EQ(x, 1.0 / std::sqrt(static_cast<double>(k)));
      }
  }
}

TEST(MaxInner, SparseKMatchesEnumeration) {
  for (std::uint64_t s = 0; s < 500; ++s) {
    const std::size_t n = 1 + s % 10;
    const std::size_t K = 1 + (s / 10) % n;
    const Vector y = oracle::random_vector(n, 6000 + s, -1, 1);
    const auto res = nmf::max_inner(ConstraintSet::sparse_k(K), y);
    EXPECT_NEAR(nmf::dot(y, res.s), oracle::sparsek_enum(y, K), 1e-12) << "seed " << s;
    std::size_t nnz = 0;
    for (double x : res.s) nnz += x != 0.0;
    EXPECT_LE(nnz, K);
  }
}

TEST(MaxInner, HoyerHitsTargetSparsity) {
  for (double target : {0.2, 0.5, 0.8}) {
    for (std::uint64_t s = 0; s < 50; ++s) {
      const Vector y = oracle::random_vector(4, 7000 + s, -1, 1);
      const auto res = nmf::max_inner(ConstraintSet::hoyer_sparse(target), y);
      EXPECT_NEAR(nmf::norm2(res.s), 1.0, 1e-12);
      EXPECT_NEAR(nmf::hoyer_sparsity(res.s), target, 1e-6) << "target " << target << " seed " << s;
      for (double x : res.s) EXPECT_GE(x, 0.0);
    }
  }
}

TEST(HoyerSparsity, Extremes) {
  EXPECT_NEAR(nmf::hoyer_sparsity(Vector{1, 1, 1, 1}), 0.0, 1e-15);
  EXPECT_NEAR(nmf::hoyer_sparsity(Vector{0, 0, 3, 0}), 1.0, 1e-15);
}

TEST(MaxInner, OutputsAreUnitOrZero) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Vector y = oracle::random_vector(6, 8000 + s, -1, 1);
    for (const auto& set : all_sets(6)) {
      if (set.kind == ConstraintSet::Kind::BoundedNonneg) continue;
      const double n = nmf::norm2(nmf::max_inner(set, y).s);
      EXPECT_TRUE(n == 0.0 || std::abs(n - 1.0) <= 1e-12);
    }
  }
}

TEST(MaxInner, NoSetMemberDoesBetter) {
  // random members of each set never beat the returned maximizer
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Vector y = oracle::random_vector(6, 9000 + s, -1, 1);
    for (const auto& set : all_sets(6)) {
      if (set.kind == ConstraintSet::Kind::BoundedNonneg) continue;
      const auto best = nmf::max_inner(set, y);
      if (best.degenerate) continue;
      const double v = nmf::dot(y, best.s);
      for (std::uint64_t t = 0; t < 20; ++t) {
        const auto other = nmf::max_inner(set, oracle::random_vector(6, 10000 + 100 * s + t, -1, 1));
        if (other.degenerate) continue;
        EXPECT_GE(v, nmf::dot(y, other.s) - 1e-12);
      }
    }
  }
}

TEST(Grri, MonotoneForEverySet) {
  const Matrix A = oracle::random_matrix(8, 6, 11);
  for (const auto& sx : all_sets(8)) {
    for (const auto& sy : all_sets(6)) {
      const auto f0 = nmf::grri_init(A, 3, sx, sy, 12);
      const auto rep = nmf::grri_run(A, f0, sx, sy, 30);
      const double slack = 1e-12 * nmf::frobenius_norm2(A);
      for (std::size_t k = 1; k < rep.objective_trace.size(); ++k)
        EXPECT_LE(rep.objective_trace[k], rep.objective_trace[k - 1] + slack)
            << static_cast<int>(sx.kind) << "/" << static_cast<int>(sy.kind) << " sweep " << k;
      for (double d : rep.final.d) EXPECT_GE(d, 0.0);
    }
  }
}

TEST(Grri, NormedNonnegTracksRri) {
  const Matrix A = oracle::random_matrix(9, 7, 13);
  nmf::FactorPair fp = nmf::init_scaled(A, 3, 14);
  nmf::DiagonalFactorization f{Matrix(9, 3), Matrix(7, 3), Vector(3)};
  for (std::size_t i = 0; i < 3; ++i) {
    const double nu = nmf::norm2(fp.U.col(i)), nv = nmf::norm2(fp.V.col(i));
    for (std::size_t a = 0; a < 9; ++a) f.X(a, i) = fp.U(a, i) / nu;
    for (std::size_t b = 0; b < 7; ++b) f.Y(b, i) = fp.V(b, i) / nv;
    f.d[i] = nu * nv;
  }
  const auto set = ConstraintSet::normed_nonneg();
  for (int k = 0; k < 20; ++k) {
    fp = nmf::rri_sweep(A, std::move(fp));
    f = nmf::grri_sweep(A, std::move(f), set, set);
    const Matrix diff = fp.product() - f.to_factor_pair().product();
    EXPECT_LE(nmf::frobenius_norm(diff), 1e-10 * nmf::frobenius_norm(A)) << "sweep " << k;
  }
}

TEST(Grri, BinaryRowPatternReconstructedExactly) {
  const Vector x = oracle::random_vector(6, 15, 0.5, 1.5);
  const Vector b{1, 0, 1, 1, 0};
  Matrix A(6, 5);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 5; ++j) A(i, j) = x[i] * b[j];
  const auto sx = ConstraintSet::normed_nonneg(), sy = ConstraintSet::binary();
  const auto rep = nmf::grri_run(A, nmf::grri_init(A, 1, sx, sy, 16), sx, sy, 5);
  EXPECT_LE(rep.objective_trace.back(), 1e-24 * nmf::frobenius_norm2(A));
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(rep.final.Y(j, 0) != 0.0, b[j] != 0.0);
}

TEST(Grri, SignedRankOneApproachesSvd) {
  const Matrix A = oracle::random_matrix(8, 6, 17, -1, 1);
  const auto set = ConstraintSet::normed();
  const auto rep = nmf::grri_run(A, nmf::grri_init(A, 1, set, set, 18), set, set, 500);
  const double s1 = nmf::svd(A).singular[0];
  const double best = 0.5 * (nmf::frobenius_norm2(A) - s1 * s1);
  EXPECT_LE(rep.objective_trace.back() - best, 1e-8 * nmf::frobenius_norm2(A));
}

TEST(Grri, InitHasMembersAndZeroWeights) {
  const Matrix A = oracle::random_matrix(5, 4, 19);
  const auto f = nmf::grri_init(A, 2, ConstraintSet::binary(), ConstraintSet::sparse_k(1), 20);
  EXPECT_EQ(f.d, Vector(2, 0.0));
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(nmf::norm2(f.X.col(i)), 1.0, 1e-12);
    std::size_t nnz = 0;
    for (double y : f.Y.col(i)) nnz += y != 0.0;
    EXPECT_EQ(nnz, 1u);
  }
  EXPECT_NEAR(nmf::grri_objective(A, f), 0.5 * nmf::frobenius_norm2(A), 1e-14);
}

TEST(Grri, DegenerateCandidateKeepsColumn) {
  // the second term's residue is zero, so both candidates come back flagged
  const Matrix A{{1, 0}, {0, 0}};
  nmf::DiagonalFactorization f{Matrix::identity(2), Matrix::identity(2), Vector{1, 0}};
  const auto set = ConstraintSet::normed_nonneg();
  f = nmf::grri_sweep(A, std::move(f), set, set);
  EXPECT_EQ(f.Y.col(1)[1], 1.0);
  EXPECT_EQ(f.X.col(1)[1], 1.0);
  EXPECT_EQ(f.d[1], 0.0);
  EXPECT_EQ(f.d[0], 1.0);
}
