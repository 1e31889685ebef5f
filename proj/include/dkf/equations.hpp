#pragma once

// Linear matrix equations (Sylvester, Lyapunov) and the filter-form
// continuous algebraic Riccati equation
//   0 = A P + P A^T + Q - P C^T R^{-1} C P.

#include <algorithm>
#include <cmath>
#include <string>

#include "dkf/matkit.hpp"

namespace dkf {

enum class SylvesterMethod { automatic, kronecker, bartels_stewart };

/// Largest coefficient dimension solved through the vectorized system when
/// the method is `automatic`.
inline constexpr Eigen::Index kKroneckerMaxDim = 32;

namespace detail {

/// Throws SingularEquationError when lambda_i(a) + lambda_j(b) is (nearly)
/// zero for some pair.
inline void check_sylvester_spectra(const Matrix& a, const Matrix& b) {
  const ComplexVector la = eigenvalues(a);
  const ComplexVector lb = eigenvalues(b);
  const double scale = std::max(spectral_norm(a), spectral_norm(b));
  const double tol = 1e-10 * scale;
  double closest = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < la.size(); ++i) {
    for (Eigen::Index j = 0; j < lb.size(); ++j) {
      closest = std::min(closest, std::abs(la(i) + lb(j)));
    }
  }
  if (scale == 0.0 || closest <= tol) {
    throw SingularEquationError(
        "Sylvester/Lyapunov equation is singular: lambda_i(A) + lambda_j(B) "
        "= " + std::to_string(closest) + " (tolerance " +
        std::to_string(tol) + ")");
  }
}

inline Matrix sylvester_kronecker(const Matrix& a, const Matrix& b,
                                  const Matrix& c) {
  const auto m = a.rows();
  const auto p = b.rows();
  // (I_p (x) A + B^T (x) I_m) vec(X) = vec(C)
  const Matrix op = kron(Matrix::Identity(p, p), a) +
                    kron(b.transpose(), Matrix::Identity(m, m));
  Eigen::PartialPivLU<Matrix> lu(op);
  const Vector x = lu.solve(vec(c));
  return unvec(x, m, p);
}

/// Complex Schur forms of A and B, then column-wise back substitution on the
/// triangular system T Y + Y S = U^* C V.
inline Matrix sylvester_bartels_stewart(const Matrix& a, const Matrix& b,
                                        const Matrix& c) {
  Eigen::ComplexSchur<Matrix> sa(a);
  Eigen::ComplexSchur<Matrix> sb(b);
  if (sa.info() != Eigen::Success || sb.info() != Eigen::Success) {
    throw NumericalError("Bartels-Stewart: Schur decomposition failed");
  }
  const ComplexMatrix& u = sa.matrixU();
  const ComplexMatrix& t = sa.matrixT();
  const ComplexMatrix& v = sb.matrixU();
  const ComplexMatrix& s = sb.matrixT();
  const ComplexMatrix f = u.adjoint() * c.cast<std::complex<double>>() * v;

  const auto m = a.rows();
  const auto p = b.rows();
  ComplexMatrix y(m, p);
  for (Eigen::Index k = 0; k < p; ++k) {
    ComplexVector rhs = f.col(k);
    if (k > 0) rhs -= y.leftCols(k) * s.col(k).head(k);
    ComplexMatrix lhs = t;
    lhs.diagonal().array() += s(k, k);
    y.col(k) = lhs.triangularView<Eigen::Upper>().solve(rhs);
  }
  return (u * y * v.adjoint()).real();
}

}  // namespace detail

/// Solves A X + X B = C.
inline Matrix solve_sylvester(const Matrix& a, const Matrix& b,
                              const Matrix& c,
                              SylvesterMethod method = SylvesterMethod::automatic) {
  require_square(a, "solve_sylvester(A)");
  require_square(b, "solve_sylvester(B)");
  if (c.rows() != a.rows() || c.cols() != b.rows()) {
    throw DimensionError("solve_sylvester: C must be rows(A) x rows(B)");
  }
  if (a.size() == 0 || b.size() == 0) return Matrix::Zero(c.rows(), c.cols());
  detail::check_sylvester_spectra(a, b);
  if (method == SylvesterMethod::automatic) {
    method = std::max(a.rows(), b.rows()) <= kKroneckerMaxDim
                 ? SylvesterMethod::kronecker
                 : SylvesterMethod::bartels_stewart;
  }
  Matrix x = method == SylvesterMethod::kronecker
                 ? detail::sylvester_kronecker(a, b, c)
                 : detail::sylvester_bartels_stewart(a, b, c);
  if (!x.allFinite()) {
    throw NumericalError("solve_sylvester: non-finite solution");
  }
  return x;
}

/// Solves M X + X M^T + W = 0. The result is symmetrized when W is symmetric.
inline Matrix solve_lyapunov(const Matrix& m, const Matrix& w,
                             SylvesterMethod method = SylvesterMethod::automatic) {
  require_square(m, "solve_lyapunov(M)");
  if (w.rows() != m.rows() || w.cols() != m.cols()) {
    throw DimensionError("solve_lyapunov: W must match M");
  }
  Matrix x = solve_sylvester(m, m.transpose(), -w, method);
  if (is_symmetric(w)) x = symmetrize(x);
  return x;
}

inline double lyapunov_residual(const Matrix& m, const Matrix& w,
                                const Matrix& x) {
  return (m * x + x * m.transpose() + w).norm();
}

inline double care_residual(const Matrix& a, const Matrix& c, const Matrix& r,
                            const Matrix& q, const Matrix& p) {
  const Matrix s = c.transpose() * r.llt().solve(c);
  return (a * p + p * a.transpose() + q - p * s * p).norm();
}

namespace detail {

/// Orthonormal basis (columns) of the largest A^T-invariant subspace inside
/// ker(Q), i.e. the directions the process noise never reaches.
inline Matrix noise_free_subspace(const Matrix& a, const Matrix& q) {
  const auto n = a.rows();
  Matrix stacked(n * n, n);
  Matrix block = q;
  for (Eigen::Index k = 0; k < n; ++k) {
    stacked.middleRows(k * n, n) = block;
    block = block * a.transpose();
  }
  Eigen::JacobiSVD<Matrix> svd(stacked, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double tol = 1e-9 * sv(0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++rank;
  }
  return svd.matrixV().rightCols(n - rank);
}

/// Stabilizing solution of A P + P A^T + Q - P S P = 0 from the stable
/// invariant subspace of the Hamiltonian, computed with the matrix sign
/// function.
inline Matrix care_hamiltonian(const Matrix& a, const Matrix& s,
                               const Matrix& q) {
  const auto n = a.rows();
  Matrix h(2 * n, 2 * n);
  h << a.transpose(), -s, -q, -a;

  const ComplexVector eig = eigenvalues(h);
  const double htol = 1e-8 * std::max(1.0, spectral_norm(h));
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    if (std::abs(eig(i).real()) <= htol) {
      throw NumericalError(
          "solve_care: no stabilizing solution (Hamiltonian has an "
          "eigenvalue on the imaginary axis; check detectability of (A, C) "
          "and stabilizability of (A, Q^1/2))");
    }
  }

  Matrix z = h;
  const double dim = static_cast<double>(2 * n);
  bool converged = false;
  for (int it = 0; it < 100; ++it) {
    const Matrix z_old = z;
    Eigen::PartialPivLU<Matrix> lu(z);
    const double det = std::abs(lu.determinant());
    const double scale =
        (det > 0.0 && std::isfinite(det)) ? std::pow(det, -1.0 / dim) : 1.0;
    z = 0.5 * (scale * z + lu.inverse() / scale);
    if ((z - z_old).norm() <= 1e-13 * z.norm()) {
      converged = true;
      break;
    }
  }
  if (!converged || !z.allFinite()) {
    throw NumericalError("solve_care: matrix sign iteration did not converge");
  }
  // (sign(H) + I) annihilates the stable subspace spanned by [I; P].
  Matrix lhs(2 * n, n), rhs(2 * n, n);
  lhs << z.topRightCorner(n, n), z.bottomRightCorner(n, n) + Matrix::Identity(n, n);
  rhs << z.topLeftCorner(n, n) + Matrix::Identity(n, n), z.bottomLeftCorner(n, n);
  return symmetrize(-lhs.colPivHouseholderQr().solve(rhs));
}

/// Newton-Kleinman iterations starting from a stabilizing P; keeps the
/// iterate with the smallest residual.
inline Matrix care_newton_refine(const Matrix& a, const Matrix& s,
                                 const Matrix& q, Matrix p) {
  auto residual = [&](const Matrix& x) {
    return (a * x + x * a.transpose() + q - x * s * x).norm();
  };
  double best = residual(p);
  for (int it = 0; it < 20 && best > 0.0; ++it) {
    const Matrix closed = a - p * s;
    if (!is_hurwitz(closed, 0.0)) break;
    Matrix next;
    try {
      next = solve_lyapunov(closed, q + p * s * p);
    } catch (const NumericalError&) {
      break;
    }
    const double r = residual(next);
    if (!(r < best)) break;
    p = next;
    best = r;
  }
  return p;
}

}  // namespace detail

/// Stabilizing (or, when noise-free marginal modes exist, the strong)
/// solution of 0 = A P + P A^T + Q - P C^T R^{-1} C P.
///
/// Directions e with A^T e = lambda e, Re(lambda) <= 0 and Q e = 0 receive no
/// process noise; the solution satisfies P e = 0 there, so the equation is
/// solved on the complementary A-invariant subspace. Any remaining
/// imaginary-axis Hamiltonian eigenvalue is reported as an error.
inline Matrix solve_care(const Matrix& a, const Matrix& c, const Matrix& r,
                         const Matrix& q) {
  require_square(a, "solve_care(A)");
  const auto n = a.rows();
  if (c.cols() != n) throw DimensionError("solve_care: C must have n columns");
  if (r.rows() != c.rows() || r.cols() != c.rows()) {
    throw DimensionError("solve_care: R must be m x m");
  }
  if (q.rows() != n || q.cols() != n) {
    throw DimensionError("solve_care: Q must be n x n");
  }
  const Matrix rs = checked_symmetric(r, "solve_care(R)");
  Eigen::LLT<Matrix> r_llt(rs);
  if (r_llt.info() != Eigen::Success) {
    throw std::invalid_argument("solve_care: R is not positive definite");
  }
  const Matrix qs = checked_symmetric(q, "solve_care(Q)");
  const Matrix s = symmetrize(c.transpose() * r_llt.solve(c));

  // Deflate noise-free modes on or left of the imaginary axis.
  Matrix basis = Matrix::Identity(n, n);
  const Matrix quiet = detail::noise_free_subspace(a, qs);
  if (quiet.cols() > 0) {
    const Matrix restricted = quiet.transpose() * a.transpose() * quiet;
    const ComplexVector mu = eigenvalues(restricted);
    const double tol = 1e-8 * std::max(1.0, spectral_norm(a));
    const double max_re = mu.real().maxCoeff();
    const bool any_marginal = (mu.real().array().abs() <= tol).any();
    if (max_re <= tol) {
      Eigen::JacobiSVD<Matrix> svd(quiet, Eigen::ComputeFullU);
      basis = svd.matrixU().rightCols(n - quiet.cols());
    } else if (any_marginal) {
      throw NumericalError(
          "solve_care: noise-free subspace mixes unstable and marginal "
          "modes; no stabilizing solution");
    }
  }
  if (basis.cols() == 0) return Matrix::Zero(n, n);

  const Matrix ar = basis.transpose() * a * basis;
  const Matrix sr = symmetrize(basis.transpose() * s * basis);
  const Matrix qr = symmetrize(basis.transpose() * qs * basis);

  Matrix pr = detail::care_hamiltonian(ar, sr, qr);
  pr = symmetrize(detail::care_newton_refine(ar, sr, qr, pr));
  if (!is_hurwitz(ar - pr * sr, 0.0)) {
    throw NumericalError("solve_care: computed solution is not stabilizing");
  }
  const Matrix p = symmetrize(basis * pr * basis.transpose());
  if (min_sym_eigenvalue(p) < -1e-9 * std::max(1.0, p.norm())) {
    throw NumericalError("solve_care: computed solution is not PSD");
  }
  return p;
}

}  // namespace dkf
