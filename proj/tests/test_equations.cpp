#include <gtest/gtest.h>

#include <random>

#include "dkf/equations.hpp"
#include "dkf/presets.hpp"
#include "test_support.hpp"

using namespace dkf;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

double rel_err(const Matrix& x, const Matrix& ref) {
  return (x - ref).norm() / std::max(1e-300, ref.norm());
}

}  // namespace

TEST(Care, ScalarMarginal) {
  const Matrix p = solve_care(scalar(0), scalar(1), scalar(1), scalar(1));
  EXPECT_NEAR(p(0, 0), 1.0, 1e-12);
}

TEST(Care, ScalarStable) {
  const Matrix p = solve_care(scalar(-1), scalar(1), scalar(1), scalar(3));
  EXPECT_NEAR(p(0, 0), 1.0, 1e-12);
}

TEST(Care, RandomObservableResidual) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 30; ++rep) {
    const Matrix a = test::random_matrix(rng, 4, 4);
    const Matrix c = test::random_matrix(rng, 2, 4);
    const Matrix r = test::random_spd(rng, 2);
    const Matrix b = test::random_matrix(rng, 4, 4);
    const Matrix q = b * b.transpose();
    const Matrix p = solve_care(a, c, r, q);
    EXPECT_LE(care_residual(a, c, r, q, p), 1e-8 * (1 + p.squaredNorm()));
    EXPECT_GE(min_sym_eigenvalue(p), -1e-10 * p.norm());
    const Matrix closed = a - p * c.transpose() * r.inverse() * c;
    EXPECT_LT(spectral_abscissa(closed), 0.0);
  }
}

TEST(Care, MonotoneInQ) {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix a = test::random_matrix(rng, 3, 3);
    const Matrix c = test::random_matrix(rng, 1, 3);
    const Matrix r = scalar(0.5);
    const Matrix q1 = test::random_spd(rng, 3, 0.1);
    const Matrix extra = test::random_matrix(rng, 3, 1);
    const Matrix q2 = q1 + extra * extra.transpose();
    EXPECT_LE(solve_care(a, c, r, q1).trace(),
              solve_care(a, c, r, q2).trace() * (1 + 1e-12));
  }
}

TEST(Care, TrackingModel) {
  const auto ts = presets::baseline_truth();
  std::vector<Matrix> c, r;
  for (const auto& s : ts.sensors) {
    c.push_back(s.C);
    r.push_back(s.R);
  }
  const Matrix cc = vstack(c), rd = block_diag(r);
  const Matrix p = solve_care(ts.A, cc, rd, ts.Q);
  EXPECT_LE(care_residual(ts.A, cc, rd, ts.Q, p), 1e-8 * (1 + p.squaredNorm()));
  EXPECT_GT(min_sym_eigenvalue(p), 0.0);
}

TEST(Care, NoiseFreeMarginalModeGivesStrongSolution) {
  // Q blind to the first position: P e1 = 0.
  const auto c2 = presets::case2();
  std::vector<Matrix> c, r;
  for (const auto& s : c2.nominal.sensors) {
    c.push_back(s.C);
    r.push_back(s.R);
  }
  const Matrix cc = vstack(c), rd = block_diag(r);
  const Matrix p = solve_care(c2.nominal.A, cc, rd, c2.nominal.Q);
  EXPECT_LE(care_residual(c2.nominal.A, cc, rd, c2.nominal.Q, p), 1e-10);
  EXPECT_LE(p.col(0).norm(), 1e-12);
  EXPECT_GE(min_sym_eigenvalue(p), -1e-12);
}

TEST(Care, UndetectableImaginaryModeThrows) {
  // Oscillator, no measurement of it, but process noise on it.
  Matrix a(2, 2);
  a << 0, 1, -1, 0;
  Matrix c = Matrix::Zero(1, 2);
  EXPECT_THROW(solve_care(a, c, scalar(1), Matrix::Identity(2, 2)),
               NumericalError);
}

TEST(Care, RejectsIndefiniteR) {
  EXPECT_THROW(solve_care(scalar(0), scalar(1), scalar(-1), scalar(1)),
               std::invalid_argument);
}

TEST(Lyapunov, Scalar) {
  EXPECT_NEAR(solve_lyapunov(scalar(-1), scalar(2))(0, 0), 1.0, 1e-15);
}

TEST(Lyapunov, DiagonalEntrywise) {
  Matrix m = Matrix::Zero(2, 2);
  m.diagonal() << -1, -2;
  const Matrix x = solve_lyapunov(m, Matrix::Identity(2, 2));
  EXPECT_NEAR(x(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(x(1, 1), 0.25, 1e-15);
  EXPECT_NEAR(x(0, 1), 0.0, 1e-15);
}

TEST(Lyapunov, BothMethodsMatchKroneckerOracle) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 40; ++rep) {
    const int n = 2 + rep % 9;
    const Matrix m = test::random_stable(rng, n, 0.3);
    const Matrix w = test::random_spd(rng, n);
    const Matrix ref = test::kronecker_sylvester_oracle(m, m.transpose(), -w);
    for (auto method : {SylvesterMethod::kronecker,
                        SylvesterMethod::bartels_stewart}) {
      const Matrix x = solve_lyapunov(m, w, method);
      EXPECT_LE(rel_err(x, ref), 1e-10);
      EXPECT_LE(lyapunov_residual(m, w, x), 1e-9 * (1 + x.norm()));
      EXPECT_TRUE(is_symmetric(x));
    }
  }
}

TEST(Lyapunov, LargeUsesSchurPath) {
  std::mt19937_64 rng(8);
  const Matrix m = test::random_stable(rng, 40, 0.5);
  const Matrix w = test::random_spd(rng, 40);
  const Matrix x = solve_lyapunov(m, w);
  EXPECT_LE(lyapunov_residual(m, w, x), 1e-9 * (1 + x.norm()));
}

TEST(Lyapunov, SingularEquationDetected) {
  Matrix m = Matrix::Zero(2, 2);
  m.diagonal() << 0.0, -1.0;
  EXPECT_THROW(solve_lyapunov(m, Matrix::Identity(2, 2)), SingularEquationError);
  Matrix rot(2, 2);
  rot << 0, 1, -1, 0;
  EXPECT_THROW(solve_lyapunov(rot, Matrix::Identity(2, 2)),
               SingularEquationError);
}

TEST(Sylvester, Examples) {
  EXPECT_NEAR(solve_sylvester(scalar(-1), scalar(-1), scalar(-2))(0, 0), 1.0,
              1e-15);
  std::mt19937_64 rng(1);
  const Matrix m = test::random_matrix(rng, 3, 4);
  const Matrix x = solve_sylvester(Matrix::Identity(3, 3),
                                   Matrix::Identity(4, 4), 2 * m);
  EXPECT_LE((x - m).norm(), 1e-14);
}

TEST(Sylvester, RectangularMatchesOracle) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 40; ++rep) {
    const Matrix a = test::random_stable(rng, 3, 0.2);
    const Matrix b = test::random_stable(rng, 2 + rep % 4, 0.2);
    const Matrix c = test::random_matrix(rng, 3, b.rows());
    const Matrix ref = test::kronecker_sylvester_oracle(a, b, c);
    for (auto method : {SylvesterMethod::kronecker,
                        SylvesterMethod::bartels_stewart}) {
      const Matrix x = solve_sylvester(a, b, c, method);
      EXPECT_LE(rel_err(x, ref), 1e-10);
      EXPECT_LE((a * x + x * b - c).norm(), 1e-9 * (1 + x.norm()));
    }
  }
}

TEST(Sylvester, SpectraConditionViolated) {
  Matrix a = Matrix::Identity(2, 2);
  Matrix b = -Matrix::Identity(2, 2);
  EXPECT_THROW(solve_sylvester(a, b, Matrix::Ones(2, 2)), SingularEquationError);
}
