#pragma once

#include <optional>
#include <vector>

#include "stochlin/stabilizability.hpp"
#include "stochlin/types.hpp"

namespace stochlin {

/// dx = A x dt + sum_i C_i x dw_i, y = Q x.
struct OutputSystem {
  Matrix A;
  std::vector<Matrix> Cs;
  Matrix Q;
};

struct ObservabilityReport {
  bool observable = false;
  /// Rank of the lifted observability matrix and the lifted dimension.
  Index rank = 0;
  Index lifted_dimension = 0;
  /// Unobservable case: λ and symmetric X != 0 with
  /// AX + XA' + sum C_i X C_i' = λX and QX = 0.
  std::optional<Complex> lambda;
  std::optional<CMatrix> witness;
  double witness_residual = 0.0;
  /// Whether the PBH test on each eigenvalue of the lift reached the same verdict.
  bool pbh_agrees = true;
};

ObservabilityReport is_exactly_observable(const OutputSystem& osys, const Tolerances& tol = {});

struct LiuRankReport {
  Index rank = 0;
  /// Columns Q', A'Q', C'Q', A'A'Q', A'C'Q', ... for all words up to `depth`.
  Matrix P0;
  bool observable = false;
  int depth = 0;
};

/// Single-noise rank test on the stacked words in A', C' applied to Q'.
LiuRankReport liu_rank_criterion(const OutputSystem& osys, int depth);

/// Word length at which the rank test is guaranteed to have saturated.
int liu_saturation_depth(Index n);

struct DetectabilityReport {
  Decision decision = Decision::kUnknown;  // kYes = detectable
  /// Output injection with A + HQ, C_i mean-square stable.
  std::optional<Matrix> H;
  StabilizabilityReport dual;
};

/// Stabilizability of the dual (A', Q'; C_i', 0).
DetectabilityReport is_stochastically_detectable(const OutputSystem& osys, const Tolerances& tol = {});

struct DetectabilitySpectrumReport {
  /// false: some λ with Re λ >= 0 carries an X with QX = 0, so the system
  /// cannot be detectable.
  bool pass = true;
  std::optional<Complex> lambda;
  std::optional<CMatrix> witness;
  /// The dual diffusion admits a C1 representation, making a pass conclusive.
  bool conclusive = false;
};

DetectabilitySpectrumReport detectability_spectrum_check(const OutputSystem& osys,
                                                         const Tolerances& tol = {});

struct InvarianceReport {
  bool preserved = true;
  bool original_observable = false;
  bool transformed_observable = false;
  Matrix F;
};

/// F = (Q'Q + D'D)^{1/2}; checks that exact observability of [A, C | Q]
/// carries over to [A + G1 D, C + G2 D | F].
InvarianceReport check_observability_invariance(const Matrix& A, const Matrix& C, const Matrix& Q,
                                                const Matrix& D, const Matrix& G1, const Matrix& G2,
                                                const Tolerances& tol = {});

}  // namespace stochlin
