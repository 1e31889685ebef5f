#include <gtest/gtest.h>

#include <cmath>

#include "dkf/presets.hpp"
#include "dkf/sim.hpp"

using namespace dkf;

namespace {

FilterRealization baseline_filter(const presets::CaseModels& c) {
  const auto t = Topology::ring(6);
  return build_filter(c.nominal, c.truth, t, 1.05 * gamma_threshold(c.nominal, t));
}

}  // namespace

TEST(Rng, TrialSeedsDiffer) {
  EXPECT_NE(trial_seed(1, 0), trial_seed(1, 1));
  EXPECT_NE(trial_seed(1, 0), trial_seed(2, 0));
  EXPECT_EQ(trial_seed(7, 3), trial_seed(7, 3));
}

TEST(SimulateTrial, Deterministic) {
  const auto c = presets::baseline();
  const auto fr = baseline_filter(c);
  SimConfig cfg;
  cfg.horizon = 0.5;
  cfg.record_stride = 50;
  const auto a = simulate_trial(c.truth, fr, cfg, 3);
  const auto b = simulate_trial(c.truth, fr, cfg, 3);
  ASSERT_EQ(a.times.size(), b.times.size());
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    EXPECT_EQ(a.states[k], b.states[k]);
    EXPECT_EQ(a.estimates[k], b.estimates[k]);
  }
  const auto other = simulate_trial(c.truth, fr, cfg, 4);
  EXPECT_NE(a.states.back(), other.states.back());
}

TEST(SimulateTrial, NoiseFreeTruthFollowsExponential) {
  auto c = presets::baseline();
  c.truth.Q.setZero();
  c.truth.Sigma0.setZero();
  const auto fr = baseline_filter(presets::baseline());
  SimConfig cfg;
  cfg.horizon = 2.0;
  cfg.record_stride = 2000;
  const auto tr = simulate_trial(c.truth, fr, cfg, 0);
  const Vector exact = expm(c.truth.A * 2.0) * c.truth.x0;
  EXPECT_LE((tr.states.back() - exact).norm(), 5e-3);
  cfg.scheme = SimScheme::exponential;
  const auto te = simulate_trial(c.truth, fr, cfg, 0);
  EXPECT_LE((te.states.back() - exact).norm(), 1e-12);
}

TEST(MonteCarlo, SingleTrialEqualsItsSquaredError) {
  const auto c = presets::baseline();
  const auto fr = baseline_filter(c);
  SimConfig cfg;
  cfg.horizon = 0.3;
  cfg.record_stride = 100;
  cfg.trials = 1;
  cfg.seed = 9;
  const auto ms = monte_carlo_mse(c.truth, fr, cfg);
  const auto tr = simulate_trial(c.truth, fr, cfg, 0);
  ASSERT_EQ(ms.times.size(), tr.times.size());
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    double acc = 0.0;
    for (int i = 0; i < 6; ++i)
      acc += (tr.estimates[k].segment(4 * i, 4) - tr.states[k]).squaredNorm();
    EXPECT_NEAR(ms.mse[k], acc / 6.0, 1e-15 * (1 + acc));
  }
  EXPECT_TRUE(std::isnan(ms.steady_se));
}

TEST(MonteCarlo, ThreadCountDoesNotChangeResult) {
  const auto c = presets::baseline();
  const auto fr = baseline_filter(c);
  SimConfig cfg;
  cfg.horizon = 0.2;
  cfg.record_stride = 50;
  cfg.trials = 7;
  const auto a = monte_carlo_mse(c.truth, fr, cfg);
  cfg.threads = 3;
  const auto b = monte_carlo_mse(c.truth, fr, cfg);
  for (std::size_t k = 0; k < a.mse.size(); ++k) EXPECT_EQ(a.mse[k], b.mse[k]);
  EXPECT_EQ(a.steady_mse, b.steady_mse);
}

TEST(MonteCarlo, EnsembleCovarianceMatchesSecondMoment) {
  // Truth only: ensemble covariance of x(t) against the X(t) ODE block.
  const auto c = presets::baseline();
  const auto fr = baseline_filter(c);
  SimConfig cfg;
  cfg.horizon = 1.0;
  cfg.record_stride = 1000;
  cfg.trials = 4000;
  cfg.scheme = SimScheme::exponential;
  struct Cov : detail::BatchObserver {
    Matrix sum = Matrix::Zero(4, 4);
    Vector mean = Vector::Zero(4);
    long count = 0;
    void on_record(std::size_t rec, const Matrix& x,
                   const std::vector<Matrix>&) override {
      if (rec != 1) return;
      mean = x.rowwise().mean();
      const Matrix centered = x.colwise() - mean;
      sum = centered * centered.transpose() / double(x.cols() - 1);
      count = x.cols();
    }
  } cov;
  detail::run_batch(c.truth, std::span<const FilterRealization>(&fr, 1), cfg, 0,
                    cfg.trials, cov);
  const auto init = default_initial(c.truth, InitialMode::shared);
  const auto traj = propagate(fr, init, TimeGrid{1e-3, 1.0, 1000});
  const Matrix x_mean = expm(c.truth.A) * c.truth.x0;
  const Matrix oracle = traj.X.back().topLeftCorner(4, 4) - x_mean * x_mean.transpose();
  for (int i = 0; i < 4; ++i)
    EXPECT_NEAR(cov.sum(i, i), oracle(i, i), 0.08 * oracle(i, i)) << i;
}

TEST(MonteCarlo, StandardErrorShrinksWithTrials) {
  const auto c = presets::baseline();
  const auto fr = baseline_filter(c);
  SimConfig cfg;
  cfg.horizon = 3.0;
  cfg.record_stride = 100;
  cfg.trials = 50;
  const auto small = monte_carlo_mse(c.truth, fr, cfg);
  cfg.trials = 200;
  const auto big = monte_carlo_mse(c.truth, fr, cfg);
  const double ratio = small.steady_se / big.steady_se;
  EXPECT_GT(ratio, 1.4);
  EXPECT_LT(ratio, 2.8);
}

TEST(MonteCarlo, CommonRandomNumbersAcrossFilters) {
  const auto c = presets::baseline();
  const auto fr = baseline_filter(c);
  SimConfig cfg;
  cfg.horizon = 0.2;
  cfg.record_stride = 50;
  cfg.trials = 5;
  std::vector<FilterRealization> two{fr, fr};
  const auto out = monte_carlo_mse(c.truth, two, cfg);
  EXPECT_EQ(out[0].mse, out[1].mse);
  const auto single = monte_carlo_mse(c.truth, fr, cfg);
  EXPECT_EQ(out[0].mse, single.mse);
}

TEST(MonteCarlo, DivergentRunOverflowIsReported) {
  const auto c = presets::baseline();
  auto fr = baseline_filter(c);
  // Explicit Euler far beyond its stability limit.
  SimConfig cfg;
  cfg.dt = 0.05;
  cfg.horizon = 200.0;
  cfg.record_stride = 10;
  cfg.trials = 3;
  const auto ms = monte_carlo_mse(c.truth, fr, cfg);
  EXPECT_EQ(ms.overflowed_trials.size(), 3u);
  EXPECT_EQ(ms.trials_used.back(), 0);
}
