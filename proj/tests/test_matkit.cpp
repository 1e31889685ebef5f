#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dkf/matkit.hpp"
#include "test_support.hpp"

using namespace dkf;

TEST(Kron, IdentityTimesIdentity) {
  EXPECT_TRUE(kron(Matrix::Identity(2, 2), Matrix::Identity(3, 3))
                  .isApprox(Matrix::Identity(6, 6)));
}

TEST(Kron, OnesTimesScalar) {
  Matrix five(1, 1);
  five << 5;
  Matrix expect(2, 2);
  expect << 5, 5, 5, 5;
  EXPECT_EQ(kron(ones_matrix(2), five), expect);
}

TEST(Kron, VecIdentityAgainstDirectProduct) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix x = test::random_matrix(rng, 2, 2);
    const Matrix y = test::random_matrix(rng, 2, 2);
    const Matrix z = test::random_matrix(rng, 2, 2);
    const Vector lhs = vec(x * y * z);
    const Vector rhs = kron(z.transpose(), x) * vec(y);
    EXPECT_LE((lhs - rhs).norm(), 1e-12 * (1.0 + lhs.norm()));
  }
}

TEST(Kron, NonSquareVecIdentity) {
  std::mt19937_64 rng(12);
  const Matrix x = test::random_matrix(rng, 3, 2);
  const Matrix y = test::random_matrix(rng, 2, 4);
  const Matrix z = test::random_matrix(rng, 4, 5);
  EXPECT_LE((vec(x * y * z) - kron(z.transpose(), x) * vec(y)).norm(), 1e-12);
}

TEST(Vec, Definition) {
  Matrix a(2, 2);
  a << 1, 3, 2, 4;
  Vector expect(4);
  expect << 1, 2, 3, 4;
  EXPECT_EQ(vec(a), expect);
  EXPECT_EQ(vec(Matrix::Zero(2, 3)), Vector::Zero(6));
}

TEST(Vec, NormIsFrobenius) {
  std::mt19937_64 rng(3);
  const Matrix a = test::random_matrix(rng, 3, 3);
  double sq = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) sq += a(i, j) * a(i, j);
  EXPECT_NEAR(vec(a).norm(), std::sqrt(sq), 1e-14);
  EXPECT_TRUE(unvec(vec(a), 3, 3).isApprox(a));
}

TEST(LogNorm, Examples) {
  EXPECT_DOUBLE_EQ(log_norm(-Matrix::Identity(2, 2), LogNormKind::two), -1.0);
  Matrix rot(2, 2);
  rot << 0, 1, -1, 0;
  EXPECT_NEAR(log_norm(rot, LogNormKind::two), 0.0, 1e-15);
  Matrix tri(2, 2);
  tri << -2, 1, 0, -1;
  EXPECT_DOUBLE_EQ(log_norm(tri, LogNormKind::one), 0.0);
  // Row version: row 1 gives -2 + 1, row 2 gives -1.
  EXPECT_DOUBLE_EQ(log_norm(tri, LogNormKind::infinity), -1.0);
}

TEST(LogNorm, RejectsNonSquare) {
  EXPECT_THROW(log_norm(Matrix::Zero(2, 3), LogNormKind::one), DimensionError);
}

TEST(LogNorm, SubadditiveAndPositivelyHomogeneous) {
  std::mt19937_64 rng(5);
  for (auto kind : {LogNormKind::one, LogNormKind::two, LogNormKind::infinity}) {
    for (int rep = 0; rep < 50; ++rep) {
      const Matrix a = test::random_matrix(rng, 4, 4);
      const Matrix b = test::random_matrix(rng, 4, 4);
      EXPECT_LE(log_norm(a + b, kind),
                log_norm(a, kind) + log_norm(b, kind) + 1e-12);
      const double g = 0.1 + rep;
      EXPECT_NEAR(log_norm(g * a, kind), g * log_norm(a, kind),
                  1e-10 * (1.0 + g));
    }
  }
}

TEST(LogNorm, BoundsExponentialGrowth) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix a = test::random_stable(rng, 4, 0.2);
    const double mu = log_norm(a, LogNormKind::two);
    for (int k = 1; k <= 50; ++k) {
      const double t = 0.1 * k;
      EXPECT_LE(spectral_norm(expm(t * a)), std::exp(t * mu) * (1 + 1e-10));
    }
  }
}

TEST(Norms, SpectralBelowFrobenius) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    const Matrix a = test::random_matrix(rng, 3, 5);
    EXPECT_LE(spectral_norm(a), a.norm() * (1 + 1e-14));
  }
}

TEST(TraceInequalities, AppendixLemma) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 100; ++rep) {
    const Matrix a = test::random_spd(rng, 4, 0.1);
    const Matrix m = test::random_matrix(rng, 4, 2);
    const Matrix b = m * m.transpose();
    const double tab = (a * b).trace();
    const double sig_b = spectral_norm(b);
    EXPECT_LE(tab, a.trace() * sig_b * (1 + 1e-12));
    EXPECT_LE(a.trace() * sig_b, a.trace() * b.trace() * (1 + 1e-12));
    EXPECT_GE((a.inverse() * b).trace(), b.trace() / a.trace() * (1 - 1e-12));
  }
}

TEST(SpectralAbscissa, Examples) {
  EXPECT_NEAR(spectral_abscissa(-Matrix::Identity(3, 3)), -1.0, 1e-15);
  Matrix rot(2, 2);
  rot << 0, 1, -1, 0;
  EXPECT_NEAR(spectral_abscissa(rot), 0.0, 1e-15);
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << -1, -2;
  EXPECT_NEAR(spectral_abscissa(d), -1.0, 1e-15);
}

TEST(Hurwitz, Examples) {
  EXPECT_TRUE(is_hurwitz(-Matrix::Identity(3, 3)));
  Matrix rot(2, 2);
  rot << 0, 1, -1, 0;
  EXPECT_FALSE(is_hurwitz(rot));
  EXPECT_FALSE(is_hurwitz(Matrix::Zero(2, 2)));
}

TEST(Expm, ZeroAndDiagonal) {
  EXPECT_TRUE(expm(Matrix::Zero(3, 3)).isApprox(Matrix::Identity(3, 3)));
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 1, 2;
  const Matrix e = expm(d);
  EXPECT_NEAR(e(0, 0), std::exp(1.0), 1e-13);
  EXPECT_NEAR(e(1, 1), std::exp(2.0), 1e-12);
  EXPECT_NEAR(e(0, 1), 0.0, 1e-15);
}

TEST(Expm, InverseAndFiniteDifference) {
  std::mt19937_64 rng(4);
  const Matrix a = test::random_matrix(rng, 3, 3);
  EXPECT_LE((expm(a) * expm(-a) - Matrix::Identity(3, 3)).norm(), 1e-12);
  const double h = 1e-6;
  const Matrix fd = (expm(h * a) - expm(-h * a)) / (2 * h);
  EXPECT_LE((fd - a).norm(), 1e-8 * (1 + a.norm()));
  EXPECT_THROW(expm(Matrix::Zero(2, 3)), DimensionError);
}

TEST(SqrtmPsd, Examples) {
  EXPECT_TRUE(sqrtm_psd(Matrix::Identity(4, 4)).isApprox(Matrix::Identity(4, 4)));
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 4, 9;
  Matrix r = Matrix::Zero(2, 2);
  r.diagonal() << 2, 3;
  EXPECT_LE((sqrtm_psd(d) - r).norm(), 1e-14);
}

TEST(SqrtmPsd, MultiplyBack) {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix m = test::random_matrix(rng, 4, 4);
    const Matrix a = m.transpose() * m;
    const Matrix r = sqrtm_psd(a);
    EXPECT_LE((r * r - a).norm(), 1e-10 * a.norm());
    EXPECT_GE(min_sym_eigenvalue(r), -1e-12);
  }
}

TEST(SqrtmPsd, RejectsIndefinite) {
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 1, -1;
  EXPECT_THROW(sqrtm_psd(d), std::domain_error);
  Matrix asym(2, 2);
  asym << 1, 1, 0, 1;
  EXPECT_THROW(sqrtm_psd(asym), std::invalid_argument);
}

TEST(KronSumFrobenius, MatchesExplicitKroneckerSum) {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 10; ++rep) {
    const Matrix m = test::random_matrix(rng, 3, 3);
    const Matrix p = test::random_matrix(rng, 2, 2);
    const Matrix explicit_sum = kron(Matrix::Identity(2, 2), m) +
                                kron(p, Matrix::Identity(3, 3));
    EXPECT_NEAR(kron_sum_frobenius(m, p), explicit_sum.norm(), 1e-12);
  }
}

TEST(BlockDiag, RoundTrip) {
  std::vector<Matrix> blocks{Matrix::Constant(1, 1, 2.0),
                             Matrix::Constant(2, 3, 1.0)};
  const Matrix bd = block_diag(blocks);
  EXPECT_EQ(bd.rows(), 3);
  EXPECT_EQ(bd.cols(), 4);
  EXPECT_EQ(bd.block(1, 1, 2, 3), blocks[1]);
  EXPECT_EQ(bd(0, 1), 0.0);
}
