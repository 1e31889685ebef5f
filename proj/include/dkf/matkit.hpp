#pragma once

// Dense real-matrix kernels shared by every other header: Kronecker/vec
// algebra, logarithmic norms, spectral abscissa, matrix exponential and the
// PSD square root.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dkf/errors.hpp"

namespace dkf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

enum class LogNormKind { one, two, infinity };

/// Relative tolerance used to decide that a "symmetric" input really is.
inline constexpr double kSymmetryTol = 1e-10;

inline void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw DimensionError(std::string(what) + ": matrix must be square, got " +
                         std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()));
  }
}

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

inline Matrix symmetrize(const Matrix& a) {
  return 0.5 * (a + a.transpose());
}

/// True when ||a - a^T||_F <= tol * max(1, ||a||_F).
inline bool is_symmetric(const Matrix& a, double tol = kSymmetryTol) {
  if (a.rows() != a.cols()) return false;
  return (a - a.transpose()).norm() <= tol * std::max(1.0, a.norm());
}

/// Symmetrizes an input that is documented symmetric, rejecting inputs that
/// are asymmetric beyond kSymmetryTol.
inline Matrix checked_symmetric(const Matrix& a, const char* what) {
  require_square(a, what);
  if (!is_symmetric(a)) {
    throw std::invalid_argument(std::string(what) + ": matrix is not symmetric");
  }
  return symmetrize(a);
}

/// U_N = 1_N 1_N^T.
inline Matrix ones_matrix(Eigen::Index n) { return Matrix::Ones(n, n); }

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Columns of `a` stacked in order (column-major vectorization).
inline Vector vec(const Matrix& a) {
  return Eigen::Map<const Vector>(a.data(), a.size());
}

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) {
    throw DimensionError("unvec: length does not match rows*cols");
  }
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

inline Matrix block_diag(std::span<const Matrix> blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

inline Matrix vstack(std::span<const Matrix> blocks) {
  if (blocks.empty()) return Matrix(0, 0);
  Eigen::Index rows = 0;
  const Eigen::Index cols = blocks.front().cols();
  for (const auto& b : blocks) {
    if (b.cols() != cols) throw DimensionError("vstack: column mismatch");
    rows += b.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    out.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  return out;
}

inline double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

/// Numerical rank: singular values <= rel_tol * sigma_1 count as zero.
inline Eigen::Index numerical_rank(const Matrix& a, double rel_tol = 1e-9) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& s = svd.singularValues();
  if (s(0) == 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * s(0)) ++r;
  }
  return r;
}

inline ComplexVector eigenvalues(const Matrix& a) {
  require_square(a, "eigenvalues");
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw NumericalError("eigenvalues: eigen-solver did not converge");
  }
  return es.eigenvalues();
}

/// Largest eigenvalue of a symmetric matrix (symmetrized first).
inline double max_sym_eigenvalue(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

inline double min_sym_eigenvalue(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// alpha(a): the largest real part over the eigenvalues of a.
inline double spectral_abscissa(const Matrix& a) {
  require_square(a, "spectral_abscissa");
  if (a.size() == 0) return -std::numeric_limits<double>::infinity();
  return eigenvalues(a).real().maxCoeff();
}

/// Hurwitz test: alpha(m) < -tol. A negative `tol` selects the default
/// 1e-9 * ||m||_2, so marginally stable matrices are reported as not Hurwitz.
inline bool is_hurwitz(const Matrix& m, double tol = -1.0) {
  require_square(m, "is_hurwitz");
  if (tol < 0.0) tol = 1e-9 * spectral_norm(m);
  return spectral_abscissa(m) < -tol;
}

/// Logarithmic norm (matrix measure) induced by the 1-, 2- or inf-norm.
inline double log_norm(const Matrix& a, LogNormKind kind) {
  require_square(a, "log_norm");
  const Eigen::Index n = a.rows();
  switch (kind) {
    case LogNormKind::two:
      return max_sym_eigenvalue(a);
    case LogNormKind::one: {
      double best = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        double v = a(j, j);
        for (Eigen::Index i = 0; i < n; ++i) {
          if (i != j) v += std::abs(a(i, j));
        }
        best = std::max(best, v);
      }
      return best;
    }
    case LogNormKind::infinity: {
      double best = -std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < n; ++i) {
        double v = a(i, i);
        for (Eigen::Index j = 0; j < n; ++j) {
          if (i != j) v += std::abs(a(i, j));
        }
        best = std::max(best, v);
      }
      return best;
    }
  }
  throw std::invalid_argument("log_norm: unknown kind");
}

/// Matrix exponential (scaling and squaring with Pade approximants).
inline Matrix expm(const Matrix& a) {
  require_square(a, "expm");
  if (a.size() == 0) return a;
  return a.exp();
}

/// Symmetric PSD square root r with r*r == a.
inline Matrix sqrtm_psd(const Matrix& a) {
  const Matrix s = checked_symmetric(a, "sqrtm_psd");
  if (s.size() == 0) return s;
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  if (es.info() != Eigen::Success) {
    throw NumericalError("sqrtm_psd: eigen-solver did not converge");
  }
  const double tol = kSymmetryTol * std::max(1.0, s.norm());
  Vector d = es.eigenvalues();
  if (d.minCoeff() < -tol) {
    throw std::domain_error("sqrtm_psd: matrix has a negative eigenvalue " +
                            std::to_string(d.minCoeff()));
  }
  d = d.cwiseMax(0.0).cwiseSqrt();
  const Matrix& v = es.eigenvectors();
  return symmetrize(v * d.asDiagonal() * v.transpose());
}

/// ||I_p (x) m + p (x) I_q||_F for square m (q x q) and p (p x p), evaluated
/// without forming the (pq)^2-sized Kronecker sum:
///   p*||m||_F^2 + q*||p||_F^2 + 2*Tr(m)*Tr(p).
inline double kron_sum_frobenius(const Matrix& m, const Matrix& p) {
  require_square(m, "kron_sum_frobenius");
  require_square(p, "kron_sum_frobenius");
  const double q_dim = static_cast<double>(m.rows());
  const double p_dim = static_cast<double>(p.rows());
  const double sq = p_dim * m.squaredNorm() + q_dim * p.squaredNorm() +
                    2.0 * m.trace() * p.trace();
  return std::sqrt(std::max(0.0, sq));
}

}  // namespace dkf
