#pragma once

// Steady-state and time-varying second moments of the nominal filter:
//   Sigma_u  nominal performance index (what the designer predicts),
//   Sigma_e  actual estimation-error covariance,
//   S        E{eta_c (1 (x) x)^T},
//   X        E{(1 (x) x)(1 (x) x)^T}.

#include <cmath>
#include <string>
#include <vector>

#include "dkf/equations.hpp"
#include "dkf/filter.hpp"

namespace dkf {

struct SteadyStateResult {
  Matrix Sigma_u_bar;
  Matrix Sigma_e_bar;
  /// Empty when F_du == 0 (the simplified equation needs neither).
  Matrix S_bar;
  Matrix X_bar;

  double residual_u = 0.0;
  double residual_e = 0.0;
  double residual_s = 0.0;
  double residual_x = 0.0;
  bool coupled = false;
};

/// Throws SingularEquationError when A_script_u has an eigenvalue on the
/// imaginary axis and HypothesisError when it is otherwise not Hurwitz.
inline void require_hurwitz_closed_loop(const FilterRealization& fr) {
  const double norm = spectral_norm(fr.A_script_u);
  const double alpha = spectral_abscissa(fr.A_script_u);
  const double tol = 1e-9 * norm;
  if (alpha < -tol) return;
  if (std::abs(alpha) <= 1e-8 * std::max(1.0, norm)) {
    throw SingularEquationError(
        "closed-loop matrix has an eigenvalue on the imaginary axis "
        "(spectral abscissa " + std::to_string(alpha) +
        "); the steady-state Lyapunov equation is singular");
  }
  throw HypothesisError("closed-loop matrix is not Hurwitz (spectral abscissa " +
                        std::to_string(alpha) + ")");
}

inline SteadyStateResult steady_state(const FilterRealization& fr) {
  require_hurwitz_closed_loop(fr);
  SteadyStateResult out;
  const Matrix& acl = fr.A_script_u;
  const Matrix drive_u =
      symmetrize(fr.K_du * fr.R_du * fr.K_du.transpose()) +
      fr.network_noise(fr.Q_u);
  const Matrix drive_true =
      symmetrize(fr.K_du * fr.R_d * fr.K_du.transpose()) +
      fr.network_noise(fr.Q);

  out.Sigma_u_bar = solve_lyapunov(acl, drive_u);
  out.residual_u = lyapunov_residual(acl, drive_u, out.Sigma_u_bar);

  if (fr.coupling_zero()) {
    out.Sigma_e_bar = solve_lyapunov(acl, drive_true);
    out.residual_e = lyapunov_residual(acl, drive_true, out.Sigma_e_bar);
    return out;
  }

  out.coupled = true;
  if (!is_hurwitz(fr.A_d)) {
    throw HypothesisError(
        "F_du != 0 requires a Hurwitz true state matrix A for a steady state");
  }
  const Matrix qn = fr.network_noise(fr.Q);
  out.X_bar = solve_lyapunov(fr.A_d, qn);
  out.residual_x = lyapunov_residual(fr.A_d, qn, out.X_bar);

  // A_script_u S + S A_d^T + F_du X + U (x) Q = 0
  const Matrix s_rhs = -(fr.F_du * out.X_bar + qn);
  out.S_bar = solve_sylvester(acl, fr.A_d.transpose(), s_rhs);
  out.residual_s =
      (acl * out.S_bar + out.S_bar * fr.A_d.transpose() - s_rhs).norm();

  const Matrix drive_e = symmetrize(fr.F_du * out.S_bar.transpose() +
                                    out.S_bar * fr.F_du.transpose()) +
                         drive_true;
  out.Sigma_e_bar = solve_lyapunov(acl, drive_e);
  out.residual_e = lyapunov_residual(acl, drive_e, out.Sigma_e_bar);
  return out;
}

// ---------------------------------------------------------------------------
// Time propagation.

struct TimeGrid {
  double dt = 1e-3;
  double horizon = 10.0;
  int record_stride = 100;

  long steps() const {
    return static_cast<long>(std::llround(horizon / dt));
  }
  void validate() const {
    if (!(dt > 0.0) || !(horizon > dt) || record_stride < 1) {
      throw std::invalid_argument(
          "TimeGrid: need dt > 0, horizon > dt and record_stride >= 1");
    }
  }
};

/// How the per-sensor initial estimation errors are correlated.
///  shared:      every filter starts from the same estimate x0 of a random
///               x(0) ~ N(x0, Sigma0), so all eta_i(0) coincide.
///  independent: x(0) = x0 is known to the truth, each filter starts from an
///               independently perturbed estimate with covariance Sigma0.
enum class InitialMode { shared, independent };

struct InitialCovariances {
  Matrix Sigma_u;
  Matrix Sigma_e;
  Matrix S;
  Matrix X;
};

inline InitialCovariances default_initial(const TrueSystem& ts,
                                          InitialMode mode) {
  const auto N = ts.sensor_count();
  const Matrix u = ones_matrix(N);
  const Matrix mean_outer = ts.x0 * ts.x0.transpose();
  InitialCovariances ic;
  if (mode == InitialMode::shared) {
    ic.Sigma_e = kron(u, ts.Sigma0);
    ic.S = kron(u, ts.Sigma0);
    ic.X = kron(u, ts.Sigma0 + mean_outer);
  } else {
    ic.Sigma_e = kron(Matrix::Identity(N, N), ts.Sigma0);
    ic.S = Matrix::Zero(N * ts.state_dim(), N * ts.state_dim());
    ic.X = kron(u, mean_outer);
  }
  ic.Sigma_u = ic.Sigma_e;
  return ic;
}

struct CovarianceTrajectory {
  std::vector<double> times;
  std::vector<Matrix> Sigma_u;
  std::vector<Matrix> Sigma_e;
  std::vector<Matrix> S;
  std::vector<Matrix> X;
  /// d/dt Tr(Sigma_e) between consecutive records (0 at the first record).
  std::vector<double> trace_growth;
};

namespace detail {

struct MomentState {
  Matrix su, se, s, x;
};

inline MomentState axpy(const MomentState& y, double h, const MomentState& k) {
  return {y.su + h * k.su, y.se + h * k.se, y.s + h * k.s, y.x + h * k.x};
}

}  // namespace detail

/// Fixed-step classical RK4 on the coupled moment equations; Sigma blocks are
/// symmetrized after every step.
inline CovarianceTrajectory propagate(const FilterRealization& fr,
                                      const InitialCovariances& init,
                                      const TimeGrid& grid) {
  grid.validate();
  const auto dim = fr.n * fr.N;
  for (const Matrix* m : {&init.Sigma_u, &init.Sigma_e, &init.S, &init.X}) {
    if (m->rows() != dim || m->cols() != dim) {
      throw DimensionError("propagate: initial moments must be nN x nN");
    }
  }
  const Matrix& acl = fr.A_script_u;
  const Matrix acl_t = acl.transpose();
  const Matrix ad_t = fr.A_d.transpose();
  const Matrix qn = fr.network_noise(fr.Q);
  const Matrix drive_u =
      symmetrize(fr.K_du * fr.R_du * fr.K_du.transpose()) +
      fr.network_noise(fr.Q_u);
  const Matrix drive_e =
      symmetrize(fr.K_du * fr.R_d * fr.K_du.transpose()) + qn;
  const bool coupled = !fr.coupling_zero();
  const Matrix& f = fr.F_du;
  const Matrix f_t = f.transpose();

  auto rhs = [&](const detail::MomentState& y) {
    detail::MomentState d;
    d.su.noalias() = acl * y.su;
    d.su += d.su.transpose().eval();
    d.su += drive_u;
    d.se.noalias() = acl * y.se;
    d.se += d.se.transpose().eval();
    d.se += drive_e;
    if (coupled) {
      Matrix fs(dim, dim);
      fs.noalias() = y.s * f_t;
      d.se += fs + fs.transpose();
    }
    d.s.noalias() = acl * y.s;
    d.s.noalias() += y.s * ad_t;
    if (coupled) d.s.noalias() += f * y.x;
    d.s += qn;
    d.x.noalias() = fr.A_d * y.x;
    d.x += d.x.transpose().eval();
    d.x += qn;
    return d;
  };

  CovarianceTrajectory traj;
  detail::MomentState y{init.Sigma_u, init.Sigma_e, init.S, init.X};
  auto record = [&](double t) {
    if (!traj.times.empty()) {
      const double prev = traj.Sigma_e.back().trace();
      traj.trace_growth.push_back((y.se.trace() - prev) /
                                  (t - traj.times.back()));
    } else {
      traj.trace_growth.push_back(0.0);
    }
    traj.times.push_back(t);
    traj.Sigma_u.push_back(y.su);
    traj.Sigma_e.push_back(y.se);
    traj.S.push_back(y.s);
    traj.X.push_back(y.x);
  };
  record(0.0);

  const long steps = grid.steps();
  const double h = grid.dt;
  for (long k = 1; k <= steps; ++k) {
    const auto k1 = rhs(y);
    const auto k2 = rhs(detail::axpy(y, 0.5 * h, k1));
    const auto k3 = rhs(detail::axpy(y, 0.5 * h, k2));
    const auto k4 = rhs(detail::axpy(y, h, k3));
    y.su += (h / 6.0) * (k1.su + 2.0 * k2.su + 2.0 * k3.su + k4.su);
    y.se += (h / 6.0) * (k1.se + 2.0 * k2.se + 2.0 * k3.se + k4.se);
    y.s += (h / 6.0) * (k1.s + 2.0 * k2.s + 2.0 * k3.s + k4.s);
    y.x += (h / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    y.su = symmetrize(y.su);
    y.se = symmetrize(y.se);
    y.x = symmetrize(y.x);
    if (!y.se.allFinite() || !y.su.allFinite() || !y.x.allFinite()) {
      throw NumericalError("propagate: non-finite moments at step " +
                           std::to_string(k));
    }
    if (k % grid.record_stride == 0 || k == steps) {
      record(static_cast<double>(k) * h);
    }
  }
  return traj;
}

/// Integral of exp(A s) Q exp(A^T s) over [0, dt]: Van Loan on a sub-step
/// short enough that exp(-A h) stays tame, then doubled back up to dt.
inline Matrix van_loan_noise(const Matrix& a, const Matrix& q, double dt) {
  const auto n = a.rows();
  int doublings = 0;
  double h = dt;
  const double na = spectral_norm(a);
  while (na * h > 0.5 && doublings < 60) {
    h *= 0.5;
    ++doublings;
  }
  Matrix v = Matrix::Zero(2 * n, 2 * n);
  v.topLeftCorner(n, n) = -a;
  v.topRightCorner(n, n) = q;
  v.bottomRightCorner(n, n) = a.transpose();
  const Matrix ev = expm(v * h);
  Matrix e = ev.bottomRightCorner(n, n).transpose();
  Matrix w = symmetrize(e * ev.topRightCorner(n, n));
  for (int i = 0; i < doublings; ++i) {
    w = symmetrize(e * w * e.transpose() + w);
    e = e * e;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Joint error/state system xi = [eta_c; 1 (x) x]:
//   d xi = F xi dt + B d rho,  rho = [nu_c; 1 (x) omega],  E{rho rho^T} = Phi.

struct AugmentedJointSystem {
  Matrix F_script;  // [[A_script_u, F_du], [0, A_d]]
  Matrix B_script;  // [[-K_du, I], [0, I]]
  Matrix Phi;       // blockdiag(R_d, U_N (x) Q)

  Matrix noise_drive() const {
    return symmetrize(B_script * Phi * B_script.transpose());
  }
};

inline AugmentedJointSystem build_augmented(const FilterRealization& fr) {
  const auto dim = fr.n * fr.N;
  const auto meas = fr.K_du.cols();
  AugmentedJointSystem aug;
  aug.F_script = Matrix::Zero(2 * dim, 2 * dim);
  aug.F_script.topLeftCorner(dim, dim) = fr.A_script_u;
  aug.F_script.topRightCorner(dim, dim) = fr.F_du;
  aug.F_script.bottomRightCorner(dim, dim) = fr.A_d;

  aug.B_script = Matrix::Zero(2 * dim, meas + dim);
  aug.B_script.topLeftCorner(dim, meas) = -fr.K_du;
  aug.B_script.topRightCorner(dim, dim) = Matrix::Identity(dim, dim);
  aug.B_script.bottomRightCorner(dim, dim) = Matrix::Identity(dim, dim);

  aug.Phi = Matrix::Zero(meas + dim, meas + dim);
  aug.Phi.topLeftCorner(meas, meas) = fr.R_d;
  aug.Phi.bottomRightCorner(dim, dim) = fr.network_noise(fr.Q);
  return aug;
}

inline Matrix joint_initial(const InitialCovariances& init) {
  const auto dim = init.Sigma_e.rows();
  Matrix out(2 * dim, 2 * dim);
  out << init.Sigma_e, init.S, init.S.transpose(), init.X;
  return out;
}

/// RK4 on d Sigma_xi/dt = F Sigma_xi + Sigma_xi F^T + B Phi B^T.
inline std::vector<Matrix> propagate_augmented(const AugmentedJointSystem& aug,
                                               const Matrix& sigma_xi0,
                                               const TimeGrid& grid) {
  grid.validate();
  const Matrix& f = aug.F_script;
  const Matrix drive = aug.noise_drive();
  auto rhs = [&](const Matrix& y) {
    Matrix d(y.rows(), y.cols());
    d.noalias() = f * y;
    d += d.transpose().eval();
    d += drive;
    return d;
  };
  std::vector<Matrix> out{sigma_xi0};
  Matrix y = sigma_xi0;
  const long steps = grid.steps();
  const double h = grid.dt;
  for (long k = 1; k <= steps; ++k) {
    const Matrix k1 = rhs(y);
    const Matrix k2 = rhs(y + 0.5 * h * k1);
    const Matrix k3 = rhs(y + 0.5 * h * k2);
    const Matrix k4 = rhs(y + h * k3);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    y = symmetrize(y);
    if (k % grid.record_stride == 0 || k == steps) out.push_back(y);
  }
  return out;
}

/// Exact steps of dY/dt = A Y + Y A^T + W: Y <- E Y E^T + W_dt with
/// E = exp(A dt). Stable for stiff closed loops where RK4 is not.
inline std::vector<Matrix> lyapunov_flow_exact(const Matrix& a, const Matrix& w,
                                               const Matrix& y0,
                                               const TimeGrid& grid) {
  grid.validate();
  const Matrix e = expm(a * grid.dt);
  const Matrix wd = van_loan_noise(a, w, grid.dt);
  std::vector<Matrix> out{y0};
  Matrix y = y0;
  const long steps = grid.steps();
  for (long k = 1; k <= steps; ++k) {
    y = symmetrize(e * y * e.transpose() + wd);
    if (!y.allFinite()) {
      throw NumericalError("lyapunov_flow_exact: non-finite covariance");
    }
    if (k % grid.record_stride == 0 || k == steps) out.push_back(y);
  }
  return out;
}

inline std::vector<Matrix> propagate_augmented_exact(
    const AugmentedJointSystem& aug, const Matrix& sigma_xi0,
    const TimeGrid& grid) {
  return lyapunov_flow_exact(aug.F_script, aug.noise_drive(), sigma_xi0, grid);
}

/// Sigma_u(t) by exact steps.
inline std::vector<Matrix> nominal_flow_exact(const FilterRealization& fr,
                                              const Matrix& sigma_u0,
                                              const TimeGrid& grid) {
  const Matrix w = symmetrize(fr.K_du * fr.R_du * fr.K_du.transpose() +
                              fr.network_noise(fr.Q_u));
  return lyapunov_flow_exact(fr.A_script_u, w, sigma_u0, grid);
}

}  // namespace dkf
