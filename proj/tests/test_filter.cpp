#include <gtest/gtest.h>

#include <random>

#include "dkf/filter.hpp"
#include "dkf/presets.hpp"
#include "test_support.hpp"

using namespace dkf;

TEST(BuildFilter, ExactModelHasNoCoupling) {
  const auto c = presets::baseline();
  const auto fr = build_filter(c.nominal, c.truth, Topology::ring(6), 600.0);
  EXPECT_TRUE(fr.coupling_zero());
  EXPECT_EQ(fr.F_du.norm(), 0.0);
  for (int i = 0; i < 6; ++i) {
    const Matrix g = c.truth.A - fr.gains[i] * c.truth.sensors[i].C;
    EXPECT_LE((fr.G_du.block(4 * i, 4 * i, 4, 4) - g).norm(), 1e-14);
  }
}

TEST(BuildFilter, GainIdentityMatchesGlobalAssembly) {
  const auto c = presets::case1();
  const auto fr = build_filter(c.nominal, c.truth, Topology::ring(6), 800.0);
  const auto st = stack(c.truth, c.nominal);
  const Matrix global = 6.0 * kron(Matrix::Identity(6, 6), fr.P_u) *
                        st.C_du.transpose() * st.R_du.inverse();
  EXPECT_LE((global - fr.K_du).norm(), 1e-12 * global.norm());
}

TEST(BuildFilter, SingleSensor) {
  TrueSystem ts;
  ts.A = Matrix::Zero(2, 2);
  ts.A(1, 0) = 1.0;
  ts.Q = Matrix::Identity(2, 2);
  Matrix c(1, 2);
  c << 0, 1;
  ts.sensors = {{c, Matrix::Ones(1, 1)}};
  ts.x0 = Vector::Zero(2);
  ts.Sigma0 = Matrix::Identity(2, 2);
  const auto nm = NominalModel::exact(ts);
  const auto fr = build_filter(nm, ts, Topology(Matrix::Zero(1, 1)), 3.0);
  EXPECT_LE((fr.A_script_u - (nm.A - fr.gains[0] * c)).norm(), 1e-14);
  EXPECT_TRUE(std::isnan(fr.gamma_u0_bar));
}

TEST(BuildFilter, RejectsNonPositiveGamma) {
  const auto c = presets::baseline();
  EXPECT_THROW(build_filter(c.nominal, c.truth, Topology::ring(6), 0.0),
               std::invalid_argument);
  EXPECT_THROW(build_filter(c.nominal, c.truth, Topology::ring(5), 1.0),
               DimensionError);
}

TEST(GammaThreshold, CaseOneHurwitzAboveThreshold) {
  const auto c = presets::case1();
  const auto t = Topology::ring(6);
  const double g = gamma_threshold(c.nominal, t);
  EXPECT_GT(g, 0.0);
  for (double f : {1.01, 1.1, 2.0, 10.0, 100.0}) {
    const auto fr = build_filter(c.nominal, c.truth, t, f * g);
    EXPECT_LT(spectral_abscissa(fr.A_script_u), 0.0) << f;
  }
}

TEST(GammaThreshold, DenserGraphLowersThreshold) {
  const auto c = presets::case1();
  EXPECT_LT(gamma_threshold(c.nominal, Topology::complete(6)),
            gamma_threshold(c.nominal, Topology::ring(6)));
}

TEST(GammaThreshold, OverrideScalesInversely) {
  const auto c = presets::case1();
  const auto t = Topology::ring(6);
  const double lam = laplacian_spectrum(t).algebraic_connectivity();
  EXPECT_NEAR(gamma_threshold(c.nominal, t, lam / 2.0),
              2.0 * gamma_threshold(c.nominal, t), 1e-9);
}

TEST(GammaThreshold, ErrorsWithoutConnectivityOrWithSingularP) {
  const auto c = presets::case1();
  EXPECT_THROW(gamma_threshold(c.nominal, Topology::from_edges(6, {{0, 1}})),
               HypothesisError);
  const auto c2 = presets::case2();
  EXPECT_THROW(gamma_threshold(c2.nominal, Topology::ring(6)), NumericalError);
}

TEST(Hurwitz, CaseTwoClosedLoopHasZeroEigenvalue) {
  const auto c = presets::case2();
  const auto fr = build_filter(c.nominal, c.truth, Topology::ring(6), 10.0);
  EXPECT_FALSE(is_hurwitz(fr.A_script_u));
  Vector e = Vector::Zero(4);
  e(0) = 1.0;
  const Vector v = kron(Matrix::Ones(6, 1), e);
  EXPECT_LE((fr.A_script_u.transpose() * v).norm(), 1e-10);
}

TEST(GammaThreshold, SoundOnRandomModels) {
  std::mt19937_64 rng(4242);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 2 + rep % 3;
    const int nodes = 3 + rep % 4;
    const auto ts = test::random_system(rng, n, nodes);
    const auto nm = NominalModel::exact(ts);
    const auto t = test::random_connected_graph(rng, nodes);
    const double g = gamma_threshold(nm, t);
    const auto fr = build_filter(nm, ts, t, 1.01 * g);
    EXPECT_LT(spectral_abscissa(fr.A_script_u), 0.0) << rep;
  }
}
