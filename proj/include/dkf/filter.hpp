#pragma once

// The nominal consensus Kalman-Bucy filter: steady gains, the stacked
// closed-loop matrix and the consensus-parameter threshold.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "dkf/equations.hpp"
#include "dkf/graph.hpp"
#include "dkf/model.hpp"

namespace dkf {

struct FilterRealization {
  Eigen::Index n = 0;  // state dimension
  Eigen::Index N = 0;  // sensor count

  Matrix P_u;                 // steady nominal Riccati solution
  std::vector<Matrix> gains;  // K_{i,u} = N P_u C_{i,u}^T R_{i,u}^{-1}
  Matrix K_du;                // blockdiag(K_{i,u})
  Matrix G_du;                // blockdiag(A_u - K_{i,u} C_{i,u})
  Matrix F_du;                // blockdiag(A - A_u - K_{i,u}(C_i - C_{i,u}))
  Matrix A_script_u;          // G_du - gamma_u (L (x) P_u)
  Matrix A_script_u0;         // G_du - gamma_u0 (L (x) P_u)
  Matrix laplacian;

  double gamma_u = 0.0;
  double gamma_u0 = 0.0;
  /// Threshold above which A_script_u is guaranteed Hurwitz; NaN when it
  /// cannot be evaluated (singular P_u or zero algebraic connectivity).
  double gamma_u0_bar = std::numeric_limits<double>::quiet_NaN();

  // Stacked model data the covariance equations need.
  Matrix A_d, A_du, R_d, R_du, Q, Q_u;

  /// U_N (x) M.
  Matrix network_noise(const Matrix& m) const {
    return kron(ones_matrix(N), m);
  }
  bool coupling_zero() const { return is_zero_coupling(F_du, A_d); }
};

struct FilterOptions {
  /// Explicit initial consensus parameter gamma_u0.
  std::optional<double> gamma_u0;
  /// gamma_u0 = factor * gamma_u0_bar when no explicit value is given.
  double gamma_u0_factor = 1.05;
  /// Lower bound on the algebraic connectivity, used instead of the
  /// topology's own value (mismatched-topology case).
  std::optional<double> lambda_override;
};

namespace detail {

inline double gamma_threshold_from(const NominalModel& nm, const Matrix& p,
                                   double lambda, Eigen::Index sensors) {
  if (!(lambda > 0.0)) {
    throw HypothesisError(
        "gamma_threshold: algebraic connectivity is zero (graph not "
        "connected) and no override was given");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> pe(symmetrize(p));
  const double pmin = pe.eigenvalues().minCoeff();
  const double pmax = pe.eigenvalues().maxCoeff();
  if (!(pmin > 1e-12 * pmax)) {
    throw NumericalError("gamma_threshold: P_u(inf) is singular");
  }
  const Matrix p_inv = pe.eigenvectors() *
                       pe.eigenvalues().cwiseInverse().asDiagonal() *
                       pe.eigenvectors().transpose();

  std::vector<Matrix> cu, ru;
  for (const auto& s : nm.sensors) {
    cu.push_back(s.C);
    ru.push_back(s.R);
  }
  const Matrix c = vstack(cu);
  const Matrix r = block_diag(ru);
  const Matrix info = symmetrize(c.transpose() * r.llt().solve(c));

  const Matrix lyap_term = p_inv * nm.A + nm.A.transpose() * p_inv;
  const double first = spectral_norm(lyap_term);
  // alpha(M^{-1}) for symmetric positive definite M is 1 / lambda_min(M).
  const Matrix mixed = symmetrize(p_inv * nm.Q * p_inv + info);
  const double alpha_inv = 1.0 / min_sym_eigenvalue(mixed);
  const double alpha_info = max_sym_eigenvalue(info);
  const double nn = static_cast<double>(sensors);
  const double tilde = 4.0 * nn * nn * alpha_inv * alpha_info;
  return (first + tilde) / lambda;
}

inline double connectivity_or_override(const Topology& t,
                                       std::optional<double> lambda_override) {
  if (lambda_override) return *lambda_override;
  if (!is_connected(t)) return 0.0;
  return laplacian_spectrum(t).algebraic_connectivity();
}

}  // namespace detail

/// Consensus threshold: for gamma_u above it, A_script_u is Hurwitz.
inline double gamma_threshold(const NominalModel& nm, const Topology& t,
                              std::optional<double> lambda_override = {}) {
  nm.validate();
  std::vector<Matrix> cu, ru;
  for (const auto& s : nm.sensors) {
    cu.push_back(s.C);
    ru.push_back(s.R);
  }
  const Matrix p = solve_care(nm.A, vstack(cu), block_diag(ru), nm.Q);
  return detail::gamma_threshold_from(
      nm, p, detail::connectivity_or_override(t, lambda_override),
      nm.sensor_count());
}

inline FilterRealization build_filter(const NominalModel& nm,
                                      const TrueSystem& ts, const Topology& t,
                                      double gamma_u,
                                      const FilterOptions& opts = {}) {
  nm.validate();
  ts.validate();
  check_pair(ts, nm);
  if (t.node_count() != ts.sensor_count()) {
    throw DimensionError("build_filter: topology has " +
                         std::to_string(t.node_count()) + " nodes but " +
                         std::to_string(ts.sensor_count()) + " sensors");
  }
  if (!(gamma_u > 0.0)) {
    throw std::invalid_argument("build_filter: gamma_u must be positive");
  }
  const auto st = stack(ts, nm);
  FilterRealization fr;
  fr.n = ts.state_dim();
  fr.N = ts.sensor_count();
  const double nn = static_cast<double>(fr.N);

  fr.P_u = solve_care(nm.A, st.C_cu, st.R_du, nm.Q);

  std::vector<Matrix> g_blocks, f_blocks;
  for (Eigen::Index i = 0; i < fr.N; ++i) {
    const Sensor& su = nm.sensors[i];
    const Sensor& s = ts.sensors[i];
    const Matrix k =
        nn * fr.P_u * su.R.llt().solve(su.C).transpose();
    fr.gains.push_back(k);
    g_blocks.push_back(nm.A - k * su.C);
    f_blocks.push_back(ts.A - nm.A - k * (s.C - su.C));
  }
  fr.K_du = block_diag(fr.gains);
  fr.G_du = block_diag(g_blocks);
  fr.F_du = block_diag(f_blocks);
  fr.laplacian = laplacian(t);

  const Matrix coupling = kron(fr.laplacian, fr.P_u);
  fr.gamma_u = gamma_u;
  fr.A_script_u = fr.G_du - gamma_u * coupling;

  try {
    fr.gamma_u0_bar = detail::gamma_threshold_from(
        nm, fr.P_u, detail::connectivity_or_override(t, opts.lambda_override),
        fr.N);
  } catch (const std::exception&) {
    fr.gamma_u0_bar = std::numeric_limits<double>::quiet_NaN();
  }
  if (opts.gamma_u0) {
    fr.gamma_u0 = *opts.gamma_u0;
  } else if (std::isfinite(fr.gamma_u0_bar)) {
    fr.gamma_u0 = opts.gamma_u0_factor * fr.gamma_u0_bar;
  } else {
    fr.gamma_u0 = gamma_u;
  }
  fr.A_script_u0 = fr.G_du - fr.gamma_u0 * coupling;

  fr.A_d = st.A_d;
  fr.A_du = st.A_du;
  fr.R_d = st.R_d;
  fr.R_du = st.R_du;
  fr.Q = ts.Q;
  fr.Q_u = nm.Q;
  return fr;
}

}  // namespace dkf
