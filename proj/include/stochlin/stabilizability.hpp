#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stochlin/lmi.hpp"
#include "stochlin/types.hpp"

namespace stochlin {

enum class Decision { kYes, kNo, kUnknown };

const char* to_string(Decision d);

struct StabilizabilityReport {
  /// kYes = stabilizable, kNo = not stabilizable.
  Decision decision = Decision::kUnknown;
  std::optional<Matrix> witness_gain;
  /// P from the synthesis LMI (the gain is Y P^-1).
  std::optional<Matrix> witness_certificate;
  /// Abscissa of the closed-loop lift at the witness gain.
  std::optional<double> closed_loop_abscissa;
  double lmi_margin = 0.0;
  std::string method;
  std::string diagnostic;
  /// Scalar systems with d != 0: value of b^2 + 2bcd - 2ad^2.
  std::optional<double> scalar_criterion;
};

/// Mean-square stabilizability of dx = (Ax + Bu)dt + sum_i (C_i x + D_i u)dw_i
/// decided through the strict synthesis LMI in (P > 0, Y)
///   [[AP + PA' + BY + Y'B', C_1P + D_1Y, ...], [., -P, 0], [., 0, -P]] < 0.
StabilizabilityReport is_stabilizable(const Matrix& A, const Matrix& B,
                                      const std::vector<Matrix>& Cs,
                                      const std::vector<Matrix>& Ds, const Tolerances& tol = {});

StabilizabilityReport is_stabilizable(const SystemQuad& sys, const Tolerances& tol = {});

std::optional<Matrix> stabilizing_gain(const SystemQuad& sys, const Tolerances& tol = {});

/// The synthesis LMI itself, for inspection and tests. Variables: svec(P)
/// first, then Y row by row.
lmi::LinearMatrixExpr stabilizability_lmi(const Matrix& A, const Matrix& B,
                                          const std::vector<Matrix>& Cs,
                                          const std::vector<Matrix>& Ds);

struct UnremovableSpectrumItem {
  Complex lambda;
  /// Hermitian (real symmetric when λ is real) matrix satisfying
  ///   XA + A'X + C'XC = λX,  XB + C'XD = 0,  D'XD = 0.
  CMatrix X;
  double residual_eigen = 0.0;
  double residual_input = 0.0;
  double residual_diffusion = 0.0;
  /// Complex λ: the defining property quantifies over real gains only.
  bool complex_flag = false;
};

std::vector<UnremovableSpectrumItem> unremovable_spectra(const SystemQuad& sys,
                                                         const Tolerances& tol = {});

struct PbhReport {
  Decision decision = Decision::kUnknown;  // kYes = stabilizable
  /// Unremovable eigenvalues with Re λ >= 0 (lifted test).
  std::vector<UnremovableSpectrumItem> obstructions;
  /// Eigenvalues of A with Re λ >= 0 failing the vector test ξ'A = λξ', ξ'B = 0.
  std::vector<Complex> vector_failures;
  bool applicable = true;
  std::optional<Matrix> c1;
};

/// Deterministic pair (A, B): lifted unremovable-spectrum test cross-checked
/// against the classical vector PBH test.
PbhReport deterministic_pbh(const Matrix& A, const Matrix& B, const Tolerances& tol = {});

/// C1 with C'XC = XC1 + C1'X for every symmetric X, if one exists.
std::optional<Matrix> find_c1_representation(const Matrix& C);

/// Applicable when D = 0 and C admits a C1 representation; then the verdict
/// is deterministic_pbh(A + C1, B).
PbhReport stochastic_pbh(const SystemQuad& sys, const Tolerances& tol = {});

struct WeakStabilizabilityReport {
  Decision decision = Decision::kUnknown;
  std::optional<Matrix> witness_gain;
  std::string method;
  std::string diagnostic;
};

WeakStabilizabilityReport is_weakly_stabilizable(const SystemQuad& sys, const Tolerances& tol = {});

struct ScalarAnalysis {
  /// b^2 + 2bcd - 2ad^2.
  double criterion = 0.0;
  /// Smallest closed-loop eigenvalue over all gains, 2(a + bk) + (c + dk)^2.
  /// -inf when d = 0 and b != 0.
  double min_spectrum = 0.0;
  /// Minimizer -(b + cd)/d^2 when d != 0.
  std::optional<double> minimizing_gain;
};

ScalarAnalysis scalar_analysis(double a, double b, double c, double d);

}  // namespace stochlin
