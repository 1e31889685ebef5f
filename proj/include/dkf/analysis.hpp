#pragma once

// Performance analysis of the nominal filter under model mismatch: trace
// bounds on the steady error covariance, their large-gamma behaviour, a
// lower bound on the nominal index, divergence certificates for a wrong
// process-noise model, and the ordering between nominal and actual
// covariances when only noise intensities are wrong.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "dkf/covariance.hpp"

namespace dkf {

// ---------------------------------------------------------------------------
// Trace bounds.

/// Multiplier c in s = ||I (x) A_script_u + A_du (x) I||_F - c ||Delta A_d||_F.
enum class SVariant {
  proof,      // c = sqrt(nN)
  statement,  // c = sqrt(N)
};

/// ||vec(I)^T Abar^{-1}||_2 and ||vec(I)^T Abar^{-1} (K (x) K)||_2 where
/// Abar = I (x) A_script_u + A_script_u (x) I, from one Lyapunov solve:
/// with A^T Y + Y A = I, they equal ||Y||_F and ||K^T Y K||_F.
struct VecNormFactors {
  double plain = 0.0;
  double gain_weighted = 0.0;
};

inline VecNormFactors vec_norm_factors(const Matrix& a_script,
                                       const Matrix& k_du) {
  const auto d = a_script.rows();
  const Matrix y = solve_lyapunov(a_script.transpose(),
                                  -Matrix::Identity(d, d));
  return {y.norm(), (k_du.transpose() * y * k_du).norm()};
}

struct BoundsReport {
  double gamma_u = 0.0;
  double tr_sigma_u = 0.0;
  double tr_sigma_e = 0.0;
  double rho = 0.0;
  double upper = 0.0;
  double lower = 0.0;
  double s = 0.0;
  double chi = 0.0;
  double S_bar_norm_bound = 0.0;
  double X_bar_norm_bound = 0.0;
  double tr_sigma_u_lower = 0.0;

  VecNormFactors factors;
  /// Actual ||S_bar||_F and ||X_bar||_F (0 when F_du == 0).
  double S_bar_norm = 0.0;
  double X_bar_norm = 0.0;

  bool sandwich_holds() const {
    const double tol = 1e-10 * std::max(1.0, tr_sigma_e);
    return lower <= tr_sigma_e + tol && tr_sigma_e <= upper + tol;
  }
};

struct RhoInputs {
  double norm_dR_d = 0.0;
  double norm_dQ = 0.0;
  double norm_F = 0.0;
  double S_bound = 0.0;
  double N = 1.0;
};

inline double rho_from(const VecNormFactors& f, const RhoInputs& in) {
  return f.gain_weighted * in.norm_dR_d +
         f.plain * (in.N * in.norm_dQ + 2.0 * in.norm_F * in.S_bound);
}

/// Tr(Sigma_u) >= Tr(K R_du K^T + U (x) Q_u) /
///                (2 Tr(-A_u0) + 2 (gamma_u - gamma_u0) Tr(L) Tr(P_u)).
inline double tr_sigma_u_lower_bound(const FilterRealization& fr) {
  if (fr.gamma_u < fr.gamma_u0 * (1.0 - 1e-12)) {
    throw HypothesisError("lower bound requires gamma_u >= gamma_u0");
  }
  const double num =
      (fr.K_du * fr.R_du * fr.K_du.transpose()).trace() +
      static_cast<double>(fr.N) * fr.Q_u.trace();
  const double den = 2.0 * (-fr.A_script_u0).trace() +
                     2.0 * (fr.gamma_u - fr.gamma_u0) * fr.laplacian.trace() *
                         fr.P_u.trace();
  if (!(den > 0.0)) {
    throw HypothesisError("lower bound: non-positive denominator");
  }
  return num / den;
}

inline BoundsReport trace_bounds(const FilterRealization& fr,
                                 const SteadyStateResult& ss,
                                 const Deviations& dev,
                                 SVariant variant = SVariant::proof) {
  if (fr.gamma_u < fr.gamma_u0 * (1.0 - 1e-12)) {
    throw HypothesisError("trace bounds require gamma_u >= gamma_u0");
  }
  const double nn = static_cast<double>(fr.N);
  const double dim = static_cast<double>(fr.n * fr.N);
  BoundsReport rep;
  rep.gamma_u = fr.gamma_u;
  rep.tr_sigma_u = ss.Sigma_u_bar.trace();
  rep.tr_sigma_e = ss.Sigma_e_bar.trace();

  const double c = variant == SVariant::proof ? std::sqrt(dim) : std::sqrt(nn);
  rep.s = kron_sum_frobenius(fr.A_script_u, fr.A_du) - c * dev.norm_dA_d;
  rep.chi = kron_sum_frobenius(fr.A_du, fr.A_du) -
            2.0 * std::sqrt(dim) * dev.norm_dA_d;
  const double scale = std::max(1.0, fr.A_script_u.norm());
  if (std::abs(rep.s) <= 1e-12 * scale || std::abs(rep.chi) <= 1e-12 * scale) {
    throw HypothesisError("trace bounds: s or chi vanishes");
  }

  const double noise = nn * fr.Q_u.norm() + nn * dev.norm_dQ;
  const double norm_f = fr.F_du.norm();
  rep.X_bar_norm_bound = noise / std::abs(rep.chi);
  rep.S_bar_norm_bound =
      (std::sqrt(dim) * norm_f * rep.X_bar_norm_bound + noise) /
      std::abs(rep.s);
  if (ss.coupled) {
    rep.S_bar_norm = ss.S_bar.norm();
    rep.X_bar_norm = ss.X_bar.norm();
  }

  rep.factors = vec_norm_factors(fr.A_script_u, fr.K_du);
  rep.rho = rho_from(rep.factors, {dev.norm_dR_d, dev.norm_dQ, norm_f,
                                   rep.S_bar_norm_bound, nn});
  rep.upper = rep.tr_sigma_u + rep.rho;
  rep.lower = std::max(0.0, rep.tr_sigma_u - rep.rho);
  rep.tr_sigma_u_lower = tr_sigma_u_lower_bound(fr);
  return rep;
}

// ---------------------------------------------------------------------------
// Large-gamma behaviour of the vec-norm factors.

struct AsymptoticFit {
  // ||vec(I)^T Abar^{-1}||^2 ~ a1 + b1/gamma + c1/gamma^2
  double a1 = 0.0, b1 = 0.0, c1 = 0.0;
  // ||vec(I)^T Abar^{-1} (K (x) K)||^2 ~ a2 + b2/gamma + c2/gamma^2
  double a2 = 0.0, b2 = 0.0, c2 = 0.0;
  /// 1 - R^2 of the first and second fits.
  double fit_residual = 0.0;
  double fit_residual2 = 0.0;
  double gamma_bar = 0.0;

  std::vector<double> gammas;
  std::vector<double> plain_sq;
  std::vector<double> weighted_sq;

  bool a1_positive() const { return a1 > 0.0; }
  bool b1_positive() const { return b1 > 0.0; }
  bool a2_positive() const { return a2 > 0.0; }
  bool b2_positive() const { return b2 > 0.0; }

  double plain_sq_at(double g) const { return a1 + b1 / g + c1 / (g * g); }
  double weighted_sq_at(double g) const { return a2 + b2 / g + c2 / (g * g); }
};

namespace detail {

/// A stand-in true system equal to the nominal model, for computations that
/// depend on the nominal design only.
inline TrueSystem nominal_as_truth(const NominalModel& nm) {
  TrueSystem ts;
  ts.A = nm.A;
  ts.Q = nm.Q;
  ts.sensors = nm.sensors;
  ts.x0 = Vector::Zero(nm.state_dim());
  ts.Sigma0 = Matrix::Identity(nm.state_dim(), nm.state_dim());
  return ts;
}

/// Least squares y ~ a + b u + c u^2 with u = scale / gamma; returns the
/// coefficients in 1/gamma units and 1 - R^2.
inline std::array<double, 4> quadratic_inverse_fit(
    const std::vector<double>& gammas, const std::vector<double>& y,
    double scale) {
  const auto m = static_cast<Eigen::Index>(gammas.size());
  Matrix design(m, 3);
  Vector rhs(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double u = scale / gammas[i];
    design(i, 0) = 1.0;
    design(i, 1) = u;
    design(i, 2) = u * u;
    rhs(i) = y[i];
  }
  const Vector coef = design.colPivHouseholderQr().solve(rhs);
  const Vector fitted = design * coef;
  const double mean = rhs.mean();
  const double ss_tot = (rhs.array() - mean).square().sum();
  const double ss_res = (rhs - fitted).squaredNorm();
  const double one_minus_r2 = ss_tot > 0.0 ? ss_res / ss_tot : 0.0;
  return {coef(0), coef(1) * scale, coef(2) * scale * scale, one_minus_r2};
}

}  // namespace detail

inline AsymptoticFit asymptotic_fit(const NominalModel& nm, const Topology& t,
                                    const std::vector<double>& gamma_grid) {
  if (gamma_grid.size() < 6) {
    throw std::invalid_argument("asymptotic_fit: need at least 6 grid points");
  }
  const auto [lo, hi] =
      std::minmax_element(gamma_grid.begin(), gamma_grid.end());
  if (!(*lo > 0.0) || *hi < 10.0 * *lo) {
    throw std::invalid_argument("asymptotic_fit: grid must span a decade");
  }
  AsymptoticFit fit;
  fit.gamma_bar = gamma_threshold(nm, t);
  if (*lo <= fit.gamma_bar) {
    throw HypothesisError("asymptotic_fit: grid point below the threshold");
  }
  const auto ts = detail::nominal_as_truth(nm);
  for (double g : gamma_grid) {
    const auto fr = build_filter(nm, ts, t, g);
    if (!is_hurwitz(fr.A_script_u)) {
      throw HypothesisError("asymptotic_fit: closed loop not Hurwitz at gamma " +
                            std::to_string(g));
    }
    const auto f = vec_norm_factors(fr.A_script_u, fr.K_du);
    fit.gammas.push_back(g);
    fit.plain_sq.push_back(f.plain * f.plain);
    fit.weighted_sq.push_back(f.gain_weighted * f.gain_weighted);
  }
  const auto p = detail::quadratic_inverse_fit(fit.gammas, fit.plain_sq, *lo);
  const auto w = detail::quadratic_inverse_fit(fit.gammas, fit.weighted_sq, *lo);
  fit.a1 = p[0];
  fit.b1 = p[1];
  fit.c1 = p[2];
  fit.fit_residual = p[3];
  fit.a2 = w[0];
  fit.b2 = w[1];
  fit.c2 = w[2];
  fit.fit_residual2 = w[3];
  return fit;
}

// ---------------------------------------------------------------------------
// Divergence certificates.

struct DivergenceCertificate {
  double r = 0.0;          // A_u^T e = r j e
  ComplexVector e;         // unit norm
  double aug_eig_residual = 0.0;
  double nominal_residual = 0.0;  // ||A_u^T e - r j e||_2
  double q_u_residual = 0.0;      // ||Q_u e||_2
  bool will_diverge = false;
  double growth_rate = 0.0;       // N^2 e^H Q e

  bool real() const { return r == 0.0 && e.imag().norm() == 0.0; }
};

struct DivergenceReport {
  std::vector<DivergenceCertificate> certificates;
  bool any_divergent() const {
    for (const auto& c : certificates)
      if (c.will_diverge) return true;
    return false;
  }
};

namespace detail {

/// Orthonormal basis of {e : (A^T - lambda I) e = 0, Q e = 0} at tolerance.
inline ComplexMatrix quiet_eigenspace(const Matrix& a, const Matrix& q,
                                      std::complex<double> lambda) {
  const auto n = a.rows();
  const double sa = std::max(1.0, spectral_norm(a));
  const double sq = std::max(spectral_norm(q), std::numeric_limits<double>::min());
  ComplexMatrix stacked(2 * n, n);
  stacked.topRows(n) = (a.transpose().cast<std::complex<double>>() -
                        lambda * ComplexMatrix::Identity(n, n)) /
                       sa;
  stacked.bottomRows(n) = q.cast<std::complex<double>>() / sq;
  Eigen::JacobiSVD<ComplexMatrix> svd(stacked, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > 1e-8) ++rank;
  return svd.matrixV().rightCols(n - rank);
}

}  // namespace detail

inline DivergenceReport divergence_test(const NominalModel& nm,
                                        const TrueSystem& ts,
                                        const Topology& t, double gamma_u) {
  nm.validate();
  ts.validate();
  check_pair(ts, nm);
  if (!is_connected(t)) {
    throw HypothesisError("divergence_test: graph must be connected");
  }
  const auto n = nm.state_dim();
  const auto N = ts.sensor_count();
  const double nn = static_cast<double>(N);
  const double norm_a = spectral_norm(nm.A);
  const double norm_qu = spectral_norm(nm.Q);
  const double norm_q = spectral_norm(ts.Q);
  const double tol_a = 1e-8 * std::max(norm_a, 1.0);

  // Candidate marginal eigenvalues, one per cluster (upper half plane).
  const ComplexVector ev = eigenvalues(nm.A.transpose());
  const double detect = 1e-6 * std::max(1.0, norm_a);
  std::vector<double> freqs;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i).real()) > detect || ev(i).imag() < -detect) continue;
    const double r = std::max(0.0, ev(i).imag());
    bool seen = false;
    for (double f : freqs)
      if (std::abs(f - r) <= detect) seen = true;
    if (!seen) freqs.push_back(r <= detect ? 0.0 : r);
  }

  DivergenceReport rep;
  if (freqs.empty()) return rep;

  const FilterRealization fr = build_filter(nm, ts, t, gamma_u);
  const ComplexMatrix acl_t = fr.A_script_u.transpose().cast<std::complex<double>>();
  const ComplexMatrix qc = ts.Q.cast<std::complex<double>>();
  const ComplexMatrix quc = nm.Q.cast<std::complex<double>>();
  const ComplexMatrix at = nm.A.transpose().cast<std::complex<double>>();

  for (double r : freqs) {
    const std::complex<double> lambda(0.0, r);
    const ComplexMatrix basis = detail::quiet_eigenspace(nm.A, nm.Q, lambda);
    for (Eigen::Index k = 0; k < basis.cols(); ++k) {
      ComplexVector e = basis.col(k);
      // Fix the phase so the largest entry is real and positive; for real
      // eigenvalues this makes e real.
      Eigen::Index imax = 0;
      e.cwiseAbs().maxCoeff(&imax);
      e *= std::abs(e(imax)) / e(imax);
      if (r == 0.0) e = e.real().cast<std::complex<double>>();
      e.normalize();

      DivergenceCertificate c;
      c.r = r;
      c.e = e;
      c.nominal_residual = (at * e - lambda * e).norm();
      c.q_u_residual = (quc * e).norm();
      if (c.nominal_residual > tol_a ||
          c.q_u_residual > 1e-8 * std::max(norm_qu, 1e-300)) {
        continue;
      }
      ComplexVector stacked(n * N);
      for (Eigen::Index i = 0; i < N; ++i) stacked.segment(i * n, n) = e;
      c.aug_eig_residual = (acl_t * stacked - lambda * stacked).norm();
      const double qe = (qc * e).norm();
      c.will_diverge = qe > 1e-8 * std::max(norm_q, 1e-300);
      c.growth_rate = nn * nn * (e.adjoint() * qc * e)(0, 0).real();
      rep.certificates.push_back(std::move(c));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Nominal versus actual covariance when only noise intensities are wrong.

enum class Definiteness { zero, psd, nsd, indefinite };

inline const char* to_string(Definiteness d) {
  switch (d) {
    case Definiteness::zero: return "zero";
    case Definiteness::psd: return "psd";
    case Definiteness::nsd: return "nsd";
    case Definiteness::indefinite: return "indefinite";
  }
  return "?";
}

inline Definiteness classify(const Matrix& m) {
  const double scale = spectral_norm(m);
  if (scale == 0.0) return Definiteness::zero;
  const double lo = min_sym_eigenvalue(m);
  const double hi = max_sym_eigenvalue(m);
  const double tol = 1e-10 * scale;
  if (lo >= -tol) return Definiteness::psd;
  if (hi <= tol) return Definiteness::nsd;
  return Definiteness::indefinite;
}

enum class Ordering {
  nominal_above,  // Sigma_u >= Sigma_e
  nominal_below,  // Sigma_u <= Sigma_e
  undetermined,
};

inline const char* to_string(Ordering o) {
  switch (o) {
    case Ordering::nominal_above: return "Sigma_u >= Sigma_e";
    case Ordering::nominal_below: return "Sigma_u <= Sigma_e";
    case Ordering::undetermined: return "undetermined";
  }
  return "?";
}

struct RelationReport {
  Matrix delta_D;
  Definiteness delta_D_definite = Definiteness::zero;
  Definiteness E0_definite = Definiteness::zero;

  std::vector<double> times;
  std::vector<Matrix> E_ode;          // RK4 on dE/dt = A E + E A^T + dD
  std::vector<Matrix> E_closed;       // exp(A t)(E0 - Ebar)exp(A^T t) + Ebar
  std::vector<double> lambda_min;     // of E_closed
  std::vector<double> norm_E;         // ||E_closed||_2
  std::vector<double> norm_bound_curve;

  Ordering predicted = Ordering::undetermined;
  /// The predicted ordering holds at every record (vacuous if undetermined).
  bool ordering_verdict = true;
  bool bound_holds = true;
  double max_ode_closed_gap = 0.0;

  double mu_bar = 0.0;       // mu_2(A_u0) + mu_2(A_u0^T)
  double mu_L_gamma = 0.0;   // mu_2(-(gamma_u - gamma_u0)(L (x) P_u))
};

inline RelationReport relation_analysis(const FilterRealization& fr,
                                        const Deviations& dev,
                                        const Matrix& E0,
                                        const TimeGrid& grid,
                                        double order_tol = 1e-8) {
  grid.validate();
  if (!dev.dynamics_exact()) {
    throw HypothesisError(
        "relation analysis requires Delta A = 0 and Delta C_i = 0");
  }
  if (fr.gamma_u < fr.gamma_u0 * (1.0 - 1e-12)) {
    throw HypothesisError("relation analysis requires gamma_u >= gamma_u0");
  }
  require_hurwitz_closed_loop(fr);
  const auto dim = fr.n * fr.N;
  if (E0.rows() != dim || E0.cols() != dim) {
    throw DimensionError("relation_analysis: E0 must be nN x nN");
  }

  RelationReport rep;
  const Matrix& a = fr.A_script_u;
  const Matrix dr = fr.R_du - fr.R_d;
  rep.delta_D = symmetrize(fr.K_du * dr * fr.K_du.transpose() +
                           fr.network_noise(fr.Q_u - fr.Q));
  rep.delta_D_definite = classify(rep.delta_D);
  rep.E0_definite = classify(E0);

  auto nonneg = [](Definiteness d) {
    return d == Definiteness::psd || d == Definiteness::zero;
  };
  auto nonpos = [](Definiteness d) {
    return d == Definiteness::nsd || d == Definiteness::zero;
  };
  if (nonneg(rep.delta_D_definite) && nonneg(rep.E0_definite)) {
    rep.predicted = Ordering::nominal_above;
  } else if (nonpos(rep.delta_D_definite) && nonpos(rep.E0_definite)) {
    rep.predicted = Ordering::nominal_below;
  }

  rep.mu_bar = log_norm(fr.A_script_u0, LogNormKind::two) +
               log_norm(fr.A_script_u0.transpose(), LogNormKind::two);
  rep.mu_L_gamma = log_norm(
      -(fr.gamma_u - fr.gamma_u0) * kron(fr.laplacian, fr.P_u), LogNormKind::two);

  const Matrix e_bar = solve_lyapunov(a, rep.delta_D);
  const double norm_e0 = spectral_norm(E0);
  const double norm_dd = spectral_norm(rep.delta_D);

  auto rhs = [&](const Matrix& y) {
    Matrix d(dim, dim);
    d.noalias() = a * y;
    d += d.transpose().eval();
    d += rep.delta_D;
    return d;
  };
  auto record = [&](double t, const Matrix& ode) {
    const Matrix ex = expm(a * t);
    const Matrix closed =
        symmetrize(ex * (E0 - e_bar) * ex.transpose() + e_bar);
    rep.times.push_back(t);
    rep.E_ode.push_back(ode);
    rep.E_closed.push_back(closed);
    rep.lambda_min.push_back(min_sym_eigenvalue(closed));
    rep.norm_E.push_back(spectral_norm(closed));
    const double growth = std::exp(rep.mu_bar * t);
    const double integral = std::abs(rep.mu_bar) * t < 1e-12
                                ? t
                                : std::expm1(rep.mu_bar * t) / rep.mu_bar;
    rep.norm_bound_curve.push_back(norm_e0 * growth + norm_dd * integral);
    rep.max_ode_closed_gap =
        std::max(rep.max_ode_closed_gap, (ode - closed).norm());

    const double tol = order_tol * std::max(1.0, rep.norm_E.back());
    if (rep.predicted == Ordering::nominal_above) {
      rep.ordering_verdict &= rep.lambda_min.back() >= -order_tol;
    } else if (rep.predicted == Ordering::nominal_below) {
      rep.ordering_verdict &= max_sym_eigenvalue(closed) <= order_tol;
    }
    rep.bound_holds &=
        rep.norm_E.back() <= rep.norm_bound_curve.back() * (1 + 1e-12) + tol;
  };

  Matrix y = symmetrize(E0);
  record(0.0, y);
  const long steps = grid.steps();
  const double h = grid.dt;
  for (long k = 1; k <= steps; ++k) {
    const Matrix k1 = rhs(y);
    const Matrix k2 = rhs(y + 0.5 * h * k1);
    const Matrix k3 = rhs(y + 0.5 * h * k2);
    const Matrix k4 = rhs(y + h * k3);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    y = symmetrize(y);
    if (k % grid.record_stride == 0 || k == steps) {
      record(static_cast<double>(k) * h, y);
    }
  }
  return rep;
}

}  // namespace dkf
