#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stochlin {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;

// Error taxonomy. The CLI maps InvalidInput to exit code 2 and
// NumericalFailure to exit code 3.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when two routes that must agree (e.g. spectral vs. Lyapunov
// stability) disagree beyond tolerance. Indicates a bug, not bad input.
class InternalConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NotSupported : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical tolerances shared by all analyses. Defaults are the documented
/// ones; the CLI can override `eig_rel` and `margin`.
struct Tolerances {
  /// Eigenvalue comparison: |λ-μ| <= eig_rel * (1 + spectral radius).
  double eig_rel = 1e-7;
  /// Half-width of the band around Re λ = 0 treated as critical.
  double margin = 1e-8;
  /// Symmetry check: ||X - X'||_F <= sym_rel * max(1, ||X||_F).
  double sym_rel = 1e-9;
  /// Positive definiteness: λ_min(P) > pd_rel * (1 + ||P||_2).
  double pd_rel = 1e-9;
  /// Residual tolerance for the three unremovable-spectrum equations.
  double unremovable = 1e-7;
  /// Riccati residual: ||Res(P)||_F <= gare_rel * (1 + ||Q||_F).
  double gare_rel = 1e-8;
};

/// Plant data of dx = (Ax + Bu)dt + (Cx + Du)dw.
class SystemQuad {
 public:
  SystemQuad() = default;
  SystemQuad(Matrix A, Matrix B, Matrix C, Matrix D);

  [[nodiscard]] Index n() const { return A_.rows(); }
  [[nodiscard]] Index m() const { return B_.cols(); }

  [[nodiscard]] const Matrix& A() const { return A_; }
  [[nodiscard]] const Matrix& B() const { return B_; }
  [[nodiscard]] const Matrix& C() const { return C_; }
  [[nodiscard]] const Matrix& D() const { return D_; }

  /// A + BK and C + DK.
  [[nodiscard]] Matrix closed_drift(const Matrix& K) const;
  [[nodiscard]] Matrix closed_diffusion(const Matrix& K) const;
  void check_gain(const Matrix& K) const;

  /// Scalar convenience constructor (n = m = 1).
  static SystemQuad scalar(double a, double b, double c, double d);

 private:
  Matrix A_, B_, C_, D_;
};

}  // namespace stochlin
