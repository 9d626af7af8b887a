#pragma once

#include <vector>

#include "stochlin/lift.hpp"
#include "stochlin/types.hpp"

namespace stochlin {

struct EigenGroup {
  Complex value;
  int algebraic = 1;
  int geometric = 1;
};

/// Eigenvalues sorted by real part, then imaginary part, plus multiplicity
/// groups (eigenvalues within `tolerance` of each other are merged).
struct Spectrum {
  std::vector<Complex> eigenvalues;
  std::vector<EigenGroup> groups;
  double tolerance = 0.0;

  [[nodiscard]] double abscissa() const;
  [[nodiscard]] double radius() const;
  /// True when some eigenvalue lies within the spectrum tolerance of z.
  [[nodiscard]] bool contains(Complex z) const;
};

Spectrum spectrum(const Matrix& M, const Tolerances& tol = {});
Spectrum spectrum(const LiftedOperator& L, const Tolerances& tol = {});
Spectrum spectrum(const KronOperator& L0, const Tolerances& tol = {});

double spectral_abscissa(const Matrix& M);
double spectral_abscissa(const LiftedOperator& L);

enum class Verdict { kStable, kWeaklyStable, kUnstable };

const char* to_string(Verdict v);

struct CriticalEigenvalue {
  Complex value;
  int algebraic = 1;
  int geometric = 1;
  [[nodiscard]] bool semisimple() const { return algebraic == geometric; }
};

struct StabilityVerdict {
  Verdict verdict = Verdict::kUnstable;
  double abscissa = 0.0;
  /// Eigenvalues with |Re λ| <= tol.margin.
  std::vector<CriticalEigenvalue> critical;
};

/// Mean-square stability of dx = A x dt + sum_i C_i x dw_i. Decided by the
/// abscissa of the drift lift and cross-checked against positivity of the
/// solution of P A + A'P + sum C_i'P C_i = -I.
StabilityVerdict is_ms_stable(const Matrix& A, const std::vector<Matrix>& Cs,
                              const Tolerances& tol = {});

/// Weak (two-)stability of the linear ODE with matrix M: closed left half
/// plane spectrum with semisimple critical eigenvalues.
StabilityVerdict is_weakly_stable(const Matrix& M, const Tolerances& tol = {});
StabilityVerdict is_weakly_stable(const LiftedOperator& L, const Tolerances& tol = {});

}  // namespace stochlin
