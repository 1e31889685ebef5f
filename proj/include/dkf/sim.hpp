#pragma once

// Monte Carlo simulation of the true system and the distributed filter.
//
// Trials are advanced together as columns of a state matrix; every trial
// owns a generator seeded from (seed, trial_index), so results do not depend
// on batching or on the number of worker threads.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dkf/covariance.hpp"

namespace dkf {

enum class SimScheme {
  /// Euler-Maruyama truth, explicit Euler filter, measurement noise sampled
  /// with covariance R / dt.
  euler,
  /// Exact discretization of the truth; the sampled measurement is held over
  /// the step and the filter's linear part is integrated exactly. Stable for
  /// any ||A_script_u|| dt.
  exponential,
};

inline const char* to_string(SimScheme s) {
  return s == SimScheme::euler ? "euler" : "exponential";
}

struct SimConfig {
  double dt = 1e-3;
  double horizon = 10.0;
  int trials = 100;
  std::uint64_t seed = 1;
  int record_stride = 100;
  SimScheme scheme = SimScheme::euler;
  InitialMode init = InitialMode::shared;
  /// 0 selects std::thread::hardware_concurrency().
  unsigned threads = 1;
  /// Fraction of the horizon (at the end) averaged for the steady MSE.
  double steady_fraction = 0.2;

  long steps() const { return static_cast<long>(std::llround(horizon / dt)); }

  void validate() const {
    if (!(dt > 0.0) || !(horizon > dt)) {
      throw std::invalid_argument("SimConfig: need dt > 0 and horizon > dt");
    }
    if (trials < 1) throw std::invalid_argument("SimConfig: trials must be >= 1");
    if (record_stride < 1) {
      throw std::invalid_argument("SimConfig: record_stride must be >= 1");
    }
    if (!(steady_fraction > 0.0) || steady_fraction > 1.0) {
      throw std::invalid_argument("SimConfig: steady_fraction must be in (0, 1]");
    }
  }
};

/// SplitMix64 finalizer; decorrelates nearby (seed, index) pairs.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial_index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(trial_index + 1));
}

/// Record-time sample indices: every record_stride steps plus the last step.
inline std::vector<long> record_steps(const SimConfig& cfg) {
  std::vector<long> out{0};
  const long steps = cfg.steps();
  for (long k = 1; k <= steps; ++k) {
    if (k % cfg.record_stride == 0 || k == steps) out.push_back(k);
  }
  return out;
}

namespace detail {

/// Discretized step matrices of the truth and of one filter.
struct TruthStep {
  Matrix phi;      // n x n
  Matrix noise;    // n x n factor of the process-noise increment
  Matrix c_c;      // stacked true measurement matrix
  Matrix r_sqrt;   // R_d^{1/2} / sqrt(dt)
};

struct FilterStep {
  Matrix phi;   // nN x nN
  Matrix gain;  // nN x sum(m_i), applied to the held measurement
};

inline Matrix discrete_noise(const Matrix& a, const Matrix& q, double dt) {
  return van_loan_noise(a, q, dt);
}

inline TruthStep make_truth_step(const TrueSystem& ts, SimScheme scheme,
                                 double dt) {
  const auto n = ts.state_dim();
  TruthStep s;
  std::vector<Matrix> c, r;
  for (const auto& sen : ts.sensors) {
    c.push_back(sen.C);
    r.push_back(sen.R);
  }
  s.c_c = vstack(c);
  s.r_sqrt = sqrtm_psd(block_diag(r)) / std::sqrt(dt);
  if (scheme == SimScheme::euler) {
    s.phi = Matrix::Identity(n, n) + dt * ts.A;
    s.noise = std::sqrt(dt) * sqrtm_psd(ts.Q);
  } else {
    s.phi = expm(ts.A * dt);
    s.noise = sqrtm_psd(discrete_noise(ts.A, ts.Q, dt));
  }
  return s;
}

inline FilterStep make_filter_step(const FilterRealization& fr,
                                   SimScheme scheme, double dt) {
  const auto d = fr.A_script_u.rows();
  FilterStep s;
  if (scheme == SimScheme::euler) {
    s.phi = Matrix::Identity(d, d) + dt * fr.A_script_u;
    s.gain = dt * fr.K_du;
  } else {
    // exp([[A, I], [0, 0]] dt) = [[exp(A dt), int_0^dt exp(A s) ds], [0, I]]
    Matrix m = Matrix::Zero(2 * d, 2 * d);
    m.topLeftCorner(d, d) = fr.A_script_u;
    m.topRightCorner(d, d) = Matrix::Identity(d, d);
    const Matrix e = expm(m * dt);
    s.phi = e.topLeftCorner(d, d);
    s.gain = e.topRightCorner(d, d) * fr.K_du;
  }
  return s;
}

inline void fill_normals(std::span<std::mt19937_64> rngs, Matrix& out) {
  std::normal_distribution<double> nd;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    auto& g = rngs[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = nd(g);
  }
}

/// Per-record observer: (record index, truth n x M, estimates per filter).
struct BatchObserver {
  virtual ~BatchObserver() = default;
  virtual void on_record(std::size_t rec, const Matrix& x,
                         const std::vector<Matrix>& xhat) = 0;
};

/// Advances trials [first, first + count) of every filter together.
inline void run_batch(const TrueSystem& ts,
                      std::span<const FilterRealization> filters,
                      const SimConfig& cfg, long first, long count,
                      BatchObserver& obs) {
  const auto n = ts.state_dim();
  const auto N = ts.sensor_count();
  const auto nn = n * N;
  const auto m = static_cast<long>(count);
  const auto truth = make_truth_step(ts, cfg.scheme, cfg.dt);
  std::vector<FilterStep> fsteps;
  for (const auto& fr : filters) {
    fsteps.push_back(make_filter_step(fr, cfg.scheme, cfg.dt));
  }
  const Matrix sigma0_sqrt = sqrtm_psd(ts.Sigma0);

  std::vector<std::mt19937_64> rngs;
  rngs.reserve(static_cast<std::size_t>(m));
  for (long j = 0; j < m; ++j) {
    rngs.emplace_back(trial_seed(cfg.seed, static_cast<std::uint64_t>(first + j)));
  }

  Matrix x(n, m);
  std::vector<Matrix> xhat(filters.size(), Matrix(nn, m));
  if (cfg.init == InitialMode::shared) {
    Matrix z(n, m);
    fill_normals(rngs, z);
    x = (sigma0_sqrt * z).colwise() + ts.x0;
    for (auto& xh : xhat) {
      for (Eigen::Index i = 0; i < N; ++i) {
        xh.middleRows(i * n, n) = ts.x0.replicate(1, m);
      }
    }
  } else {
    x = ts.x0.replicate(1, m);
    Matrix z(nn, m);
    fill_normals(rngs, z);
    const Matrix pert = kron(Matrix::Identity(N, N), sigma0_sqrt) * z;
    for (auto& xh : xhat) {
      xh = pert;
      for (Eigen::Index i = 0; i < N; ++i) {
        xh.middleRows(i * n, n).colwise() += ts.x0;
      }
    }
  }

  const auto records = record_steps(cfg);
  std::size_t rec = 0;
  obs.on_record(rec++, x, xhat);

  const auto meas = truth.c_c.rows();
  Matrix zq(n, m), zr(meas, m), y(meas, m), xnew(n, m), tmp(nn, m);
  const long steps = cfg.steps();
  for (long k = 1; k <= steps; ++k) {
    fill_normals(rngs, zq);
    fill_normals(rngs, zr);
    y.noalias() = truth.c_c * x;
    y.noalias() += truth.r_sqrt * zr;
    for (std::size_t f = 0; f < xhat.size(); ++f) {
      tmp.noalias() = fsteps[f].phi * xhat[f];
      tmp.noalias() += fsteps[f].gain * y;
      xhat[f].swap(tmp);
    }
    xnew.noalias() = truth.phi * x;
    xnew.noalias() += truth.noise * zq;
    x.swap(xnew);
    if (rec < records.size() && records[rec] == k) obs.on_record(rec++, x, xhat);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct TrialTrajectory {
  std::vector<double> times;
  std::vector<Vector> states;     // x(t)
  std::vector<Vector> estimates;  // stacked x_hat_{i,u}(t)
  /// First record with non-finite values, -1 if none.
  long overflow_record = -1;
};

inline TrialTrajectory simulate_trial(const TrueSystem& ts,
                                      const FilterRealization& fr,
                                      const SimConfig& cfg, long trial_index) {
  cfg.validate();
  struct Keep : detail::BatchObserver {
    TrialTrajectory out;
    double dt = 0.0;
    std::vector<long> steps;
    void on_record(std::size_t rec, const Matrix& x,
                   const std::vector<Matrix>& xhat) override {
      out.times.push_back(static_cast<double>(steps[rec]) * dt);
      out.states.push_back(x.col(0));
      out.estimates.push_back(xhat[0].col(0));
      if (out.overflow_record < 0 &&
          (!x.allFinite() || !xhat[0].allFinite())) {
        out.overflow_record = static_cast<long>(rec);
      }
    }
  } keep;
  keep.dt = cfg.dt;
  keep.steps = record_steps(cfg);
  detail::run_batch(ts, std::span<const FilterRealization>(&fr, 1), cfg,
                    trial_index, 1, keep);
  return keep.out;
}

struct MseSeries {
  std::vector<double> times;
  std::vector<double> mse;
  /// per_sensor[i][k]: sensor i at record k.
  std::vector<std::vector<double>> per_sensor;
  /// Trials contributing at each record (overflowed trials drop out).
  std::vector<int> trials_used;

  /// Mean over records in the final steady_fraction of the horizon.
  double steady_mse = 0.0;
  /// Standard error of steady_mse across trials (NaN for a single trial).
  double steady_se = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> trial_steady;  // per-trial window averages
  std::vector<long> overflowed_trials;
};

namespace detail {

/// Squared error per (record, trial, sensor) for every filter.
struct ErrorStore : BatchObserver {
  long n = 0, N = 0, first = 0, count = 0;
  std::size_t records = 0;
  // err[f][(rec * count + j) * N + i]
  std::vector<std::vector<double>> err;

  void init(std::size_t filters) {
    err.assign(filters, std::vector<double>(
                            records * static_cast<std::size_t>(count * N), 0.0));
  }
  void on_record(std::size_t rec, const Matrix& x,
                 const std::vector<Matrix>& xhat) override {
    for (std::size_t f = 0; f < xhat.size(); ++f) {
      auto& e = err[f];
      for (long j = 0; j < count; ++j) {
        for (long i = 0; i < N; ++i) {
          const double v =
              (xhat[f].col(j).segment(i * n, n) - x.col(j)).squaredNorm();
          e[(rec * static_cast<std::size_t>(count) + j) * N + i] =
              std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
        }
      }
    }
  }
};

}  // namespace detail

/// Runs every filter on the same truth and noise paths (common random
/// numbers), one MseSeries per filter.
inline std::vector<MseSeries> monte_carlo_mse(
    const TrueSystem& ts, std::span<const FilterRealization> filters,
    const SimConfig& cfg) {
  cfg.validate();
  ts.validate();
  for (const auto& fr : filters) {
    if (fr.n != ts.state_dim() || fr.N != ts.sensor_count()) {
      throw DimensionError("monte_carlo_mse: filter built for other dimensions");
    }
    if (cfg.scheme == SimScheme::euler &&
        spectral_norm(fr.A_script_u) * cfg.dt > 0.5) {
      std::cerr << "warning: ||A_script_u|| dt = "
                << spectral_norm(fr.A_script_u) * cfg.dt
                << " > 0.5; explicit Euler may be inaccurate or unstable\n";
    }
  }
  const long n = ts.state_dim();
  const long N = ts.sensor_count();
  const long M = cfg.trials;
  const auto rsteps = record_steps(cfg);
  const std::size_t records = rsteps.size();

  unsigned threads = cfg.threads == 0 ? std::thread::hardware_concurrency()
                                      : cfg.threads;
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(M)));
  std::vector<detail::ErrorStore> stores(threads);
  const long chunk = (M + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    auto& s = stores[t];
    s.n = n;
    s.N = N;
    s.first = t * chunk;
    s.count = std::max(0L, std::min(chunk, M - s.first));
    s.records = records;
    s.init(filters.size());
  }
  auto work = [&](unsigned t) {
    if (stores[t].count > 0) {
      detail::run_batch(ts, filters, cfg, stores[t].first, stores[t].count,
                        stores[t]);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }

  // Deterministic reduction in trial order.
  const double t_end = static_cast<double>(rsteps.back()) * cfg.dt;
  const double window_start = t_end * (1.0 - cfg.steady_fraction);
  std::vector<MseSeries> out(filters.size());
  for (std::size_t f = 0; f < filters.size(); ++f) {
    MseSeries& ms = out[f];
    for (long k : rsteps) ms.times.push_back(static_cast<double>(k) * cfg.dt);
    ms.mse.assign(records, 0.0);
    ms.per_sensor.assign(static_cast<std::size_t>(N),
                         std::vector<double>(records, 0.0));
    ms.trials_used.assign(records, 0);

    // First non-finite record per trial.
    std::vector<std::size_t> alive(static_cast<std::size_t>(M), records);
    for (const auto& s : stores) {
      for (long j = 0; j < s.count; ++j) {
        for (std::size_t r = 0; r < records; ++r) {
          bool bad = false;
          for (long i = 0; i < N; ++i) {
            bad |= !std::isfinite(
                s.err[f][(r * static_cast<std::size_t>(s.count) + j) * N + i]);
          }
          if (bad) {
            alive[static_cast<std::size_t>(s.first + j)] = r;
            ms.overflowed_trials.push_back(s.first + j);
            break;
          }
        }
      }
    }

    double sum_window = 0.0;
    int window_trials = 0;
    std::vector<double> trial_avgs;
    for (const auto& s : stores) {
      for (long j = 0; j < s.count; ++j) {
        const auto lim = alive[static_cast<std::size_t>(s.first + j)];
        double acc = 0.0;
        int cnt = 0;
        for (std::size_t r = 0; r < lim; ++r) {
          double trial_sum = 0.0;
          for (long i = 0; i < N; ++i) {
            const double v =
                s.err[f][(r * static_cast<std::size_t>(s.count) + j) * N + i];
            ms.per_sensor[static_cast<std::size_t>(i)][r] += v;
            trial_sum += v;
          }
          ms.trials_used[r] += 1;
          if (ms.times[r] >= window_start - 1e-12 * t_end) {
            acc += trial_sum / static_cast<double>(N);
            ++cnt;
          }
        }
        if (lim == records && cnt > 0) {
          trial_avgs.push_back(acc / cnt);
          sum_window += acc / cnt;
          ++window_trials;
        }
      }
    }
    for (std::size_t r = 0; r < records; ++r) {
      const double used = ms.trials_used[r];
      double total = 0.0;
      for (long i = 0; i < N; ++i) {
        auto& v = ms.per_sensor[static_cast<std::size_t>(i)][r];
        v = used > 0 ? v / used : std::numeric_limits<double>::quiet_NaN();
        total += v;
      }
      ms.mse[r] = total / static_cast<double>(N);
    }
    ms.trial_steady = trial_avgs;
    if (window_trials > 0) {
      ms.steady_mse = sum_window / window_trials;
      if (window_trials > 1) {
        double var = 0.0;
        for (double v : trial_avgs) var += (v - ms.steady_mse) * (v - ms.steady_mse);
        var /= (window_trials - 1);
        ms.steady_se = std::sqrt(var / window_trials);
      }
    } else {
      ms.steady_mse = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

inline MseSeries monte_carlo_mse(const TrueSystem& ts,
                                 const FilterRealization& fr,
                                 const SimConfig& cfg) {
  return monte_carlo_mse(ts, std::span<const FilterRealization>(&fr, 1), cfg)
      .front();
}

}  // namespace dkf
