#pragma once

// True system, nominal (designer) model, their deviations, stacked network
// matrices and the standing-assumption checks.

#include <string>
#include <utility>
#include <vector>

#include "dkf/graph.hpp"
#include "dkf/matkit.hpp"

namespace dkf {

/// One sensor: y_i = C_i x + v_i with white-noise intensity R_i.
struct Sensor {
  Matrix C;  // m_i x n
  Matrix R;  // m_i x m_i, symmetric positive definite
};

namespace detail {

inline void validate_sensors(const std::vector<Sensor>& sensors,
                             Eigen::Index n, const char* who) {
  if (sensors.empty()) {
    throw DimensionError(std::string(who) + ": at least one sensor required");
  }
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    const auto& s = sensors[i];
    const std::string tag = std::string(who) + ": sensor " + std::to_string(i);
    if (s.C.cols() != n || s.C.rows() < 1) {
      throw DimensionError(tag + " C must have " + std::to_string(n) +
                           " columns");
    }
    if (s.R.rows() != s.C.rows() || s.R.cols() != s.C.rows()) {
      throw DimensionError(tag + " R must be m_i x m_i");
    }
    if (!is_symmetric(s.R)) {
      throw std::invalid_argument(tag + " R is not symmetric");
    }
    Eigen::LLT<Matrix> llt(symmetrize(s.R));
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument(tag + " R is not positive definite");
    }
  }
}

inline void validate_psd(const Matrix& m, Eigen::Index n, const char* what) {
  if (m.rows() != n || m.cols() != n) {
    throw DimensionError(std::string(what) + " must be " + std::to_string(n) +
                         "x" + std::to_string(n));
  }
  if (!is_symmetric(m)) {
    throw std::invalid_argument(std::string(what) + " is not symmetric");
  }
  if (min_sym_eigenvalue(m) < -kSymmetryTol * std::max(1.0, m.norm())) {
    throw std::invalid_argument(std::string(what) +
                                " is not positive semidefinite");
  }
}

}  // namespace detail

struct TrueSystem {
  Matrix A;
  Matrix Q;
  std::vector<Sensor> sensors;
  Vector x0;
  Matrix Sigma0;

  Eigen::Index state_dim() const { return A.rows(); }
  Eigen::Index sensor_count() const {
    return static_cast<Eigen::Index>(sensors.size());
  }

  void validate() const {
    require_square(A, "TrueSystem.A");
    const auto n = A.rows();
    detail::validate_psd(Q, n, "TrueSystem.Q");
    detail::validate_sensors(sensors, n, "TrueSystem");
    if (x0.size() != n) throw DimensionError("TrueSystem.x0 has wrong length");
    detail::validate_psd(Sigma0, n, "TrueSystem.Sigma0");
    if (!A.allFinite() || !Q.allFinite()) {
      throw std::invalid_argument("TrueSystem: non-finite entries");
    }
  }
};

struct NominalModel {
  Matrix A;
  Matrix Q;
  std::vector<Sensor> sensors;

  /// The nominal model that matches the true system exactly.
  static NominalModel exact(const TrueSystem& ts) {
    return NominalModel{ts.A, ts.Q, ts.sensors};
  }

  Eigen::Index state_dim() const { return A.rows(); }
  Eigen::Index sensor_count() const {
    return static_cast<Eigen::Index>(sensors.size());
  }

  void validate() const {
    require_square(A, "NominalModel.A");
    detail::validate_psd(Q, A.rows(), "NominalModel.Q");
    detail::validate_sensors(sensors, A.rows(), "NominalModel");
    if (!A.allFinite() || !Q.allFinite()) {
      throw std::invalid_argument("NominalModel: non-finite entries");
    }
  }
};

inline void check_pair(const TrueSystem& ts, const NominalModel& nm) {
  if (ts.state_dim() != nm.state_dim()) {
    throw DimensionError("nominal and true state dimensions differ");
  }
  if (ts.sensor_count() != nm.sensor_count()) {
    throw DimensionError("nominal and true sensor counts differ");
  }
  for (std::size_t i = 0; i < ts.sensors.size(); ++i) {
    if (ts.sensors[i].C.rows() != nm.sensors[i].C.rows() ||
        ts.sensors[i].C.cols() != nm.sensors[i].C.cols()) {
      throw DimensionError("sensor " + std::to_string(i) +
                           ": nominal and true measurement sizes differ");
    }
  }
}

/// Nominal minus actual, with Frobenius norms.
struct Deviations {
  Matrix dA;
  Matrix dQ;
  std::vector<Matrix> dC;
  std::vector<Matrix> dR;

  double norm_dA = 0.0;
  double norm_dQ = 0.0;
  std::vector<double> norm_dC;
  std::vector<double> norm_dR;
  /// ||Delta A_d||_F = sqrt(N) * ||Delta A||_F.
  double norm_dA_d = 0.0;
  /// ||Delta R_d||_F = sqrt(sum_j ||Delta R_j||_F^2).
  double norm_dR_d = 0.0;

  bool dynamics_exact() const {
    if (norm_dA != 0.0) return false;
    for (double v : norm_dC) {
      if (v != 0.0) return false;
    }
    return true;
  }
};

inline Deviations deviations(const TrueSystem& ts, const NominalModel& nm) {
  check_pair(ts, nm);
  Deviations d;
  d.dA = nm.A - ts.A;
  d.dQ = symmetrize(nm.Q - ts.Q);
  d.norm_dA = d.dA.norm();
  d.norm_dQ = d.dQ.norm();
  double sq = 0.0;
  for (std::size_t i = 0; i < ts.sensors.size(); ++i) {
    d.dC.push_back(nm.sensors[i].C - ts.sensors[i].C);
    d.dR.push_back(symmetrize(nm.sensors[i].R - ts.sensors[i].R));
    d.norm_dC.push_back(d.dC.back().norm());
    d.norm_dR.push_back(d.dR.back().norm());
    sq += d.dR.back().squaredNorm();
  }
  d.norm_dA_d =
      std::sqrt(static_cast<double>(ts.sensor_count())) * d.norm_dA;
  d.norm_dR_d = std::sqrt(sq);
  return d;
}

/// Network-level block matrices for the true (plain) and nominal (_u) models.
struct StackedMatrices {
  Matrix C_c, C_d, R_d, A_d;
  Matrix C_cu, C_du, R_du, A_du;
};

inline StackedMatrices stack(const TrueSystem& ts, const NominalModel& nm) {
  check_pair(ts, nm);
  const auto N = ts.sensor_count();
  std::vector<Matrix> c, cu, r, ru;
  for (Eigen::Index i = 0; i < N; ++i) {
    c.push_back(ts.sensors[i].C);
    r.push_back(ts.sensors[i].R);
    cu.push_back(nm.sensors[i].C);
    ru.push_back(nm.sensors[i].R);
  }
  StackedMatrices s;
  s.C_c = vstack(c);
  s.C_d = block_diag(c);
  s.R_d = block_diag(r);
  s.A_d = kron(Matrix::Identity(N, N), ts.A);
  s.C_cu = vstack(cu);
  s.C_du = block_diag(cu);
  s.R_du = block_diag(ru);
  s.A_du = kron(Matrix::Identity(N, N), nm.A);
  return s;
}

/// Rank of [C; CA; ...; CA^{n-1}] equals n.
inline bool is_observable(const Matrix& a, const Matrix& c,
                          double rel_tol = 1e-9) {
  const auto n = a.rows();
  Matrix obs(c.rows() * n, n);
  Matrix block = c;
  for (Eigen::Index k = 0; k < n; ++k) {
    obs.middleRows(k * c.rows(), c.rows()) = block;
    block = block * a;
  }
  return numerical_rank(obs, rel_tol) == n;
}

/// Rank of [B, AB, ..., A^{n-1}B] equals n.
inline bool is_controllable(const Matrix& a, const Matrix& b,
                            double rel_tol = 1e-9) {
  return is_observable(a.transpose(), b.transpose(), rel_tol);
}

struct AssumptionReport {
  bool connected = false;
  bool observable = false;    // (A_u, C_{c,u})
  bool controllable = false;  // (A_u, Q_u^{1/2})
  bool F_du_zero = false;
  bool A_hurwitz = false;

  bool assumption1 = false;  // undirected, connected graph
  bool assumption2 = false;  // observability and controllability
  bool assumption3 = false;  // F_du == 0 or A Hurwitz
  bool overall = false;

  std::vector<std::string> failures;
};

/// ||F_du||_F small relative to the true dynamics counts as zero.
inline bool is_zero_coupling(const Matrix& F_du, const Matrix& A) {
  return F_du.norm() <= 1e-12 * std::max(1.0, A.norm());
}

inline AssumptionReport validate_assumptions(const TrueSystem& ts,
                                             const NominalModel& nm,
                                             const Topology& t,
                                             const Matrix& F_du) {
  check_pair(ts, nm);
  AssumptionReport rep;
  const auto st = stack(ts, nm);

  rep.connected = t.node_count() == ts.sensor_count() && is_connected(t);
  rep.observable = is_observable(nm.A, st.C_cu);
  rep.controllable = is_controllable(nm.A, sqrtm_psd(nm.Q));
  rep.F_du_zero = is_zero_coupling(F_du, ts.A);
  rep.A_hurwitz = is_hurwitz(ts.A);

  rep.assumption1 = rep.connected;
  rep.assumption2 = rep.observable && rep.controllable;
  rep.assumption3 = rep.F_du_zero || rep.A_hurwitz;
  rep.overall = rep.assumption1 && rep.assumption2 && rep.assumption3;

  if (t.node_count() != ts.sensor_count()) {
    rep.failures.push_back("topology node count differs from sensor count");
  } else if (!rep.connected) {
    rep.failures.push_back("assumption 1: communication graph is not connected");
  }
  if (!rep.observable) {
    rep.failures.push_back("assumption 2: (A_u, C_cu) is not observable");
  }
  if (!rep.controllable) {
    rep.failures.push_back(
        "assumption 2: (A_u, Q_u^1/2) is not controllable");
  }
  if (!rep.assumption3) {
    rep.failures.push_back(
        "assumption 3: F_du != 0 and A is not Hurwitz");
  }
  return rep;
}

}  // namespace dkf
