#pragma once

#include <stdexcept>
#include <string>

namespace dkf {

/// Inputs whose shapes do not agree (wrong block sizes, non-square, ...).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical kernel failed: no stabilizing Riccati solution, eigen-solver
/// failure, non-finite values during integration.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Sylvester/Lyapunov equation whose coefficient spectra violate
/// lambda_i(A) + lambda_j(B) != 0.
class SingularEquationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A precondition of an analysis result does not hold for the given inputs
/// (graph not connected, matrix not Hurwitz, deviations not zero, ...).
class HypothesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dkf
