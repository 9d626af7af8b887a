#pragma once

#include <optional>
#include <vector>

#include "stochlin/types.hpp"

namespace stochlin {

// Symmetric matrices are identified with vectors of their upper triangle,
// stacked row by row: (X11, X12, ..., X1n, X22, ..., Xnn). The map is
// unweighted, so lifted operators act on the raw moment entries.

[[nodiscard]] constexpr Index svec_size(Index n) { return n * (n + 1) / 2; }

/// Inverse of svec_size; throws InvalidInput when `len` is not triangular.
Index svec_dimension(Index len);

/// Position of X(i,j), i <= j, inside svec(X).
Index svec_index(Index n, Index i, Index j);

Vector svec(const Matrix& X, const Tolerances& tol = {});
Matrix smat(const Vector& v);
CMatrix smat(const CVector& v);

enum class LiftVariant { kDirect, kAdjoint };

enum class OperatorKind { kClosedLoop, kClosedLoopAdjoint, kDrift, kDriftAdjoint };

/// Matrix representation, on svec coordinates, of
///   direct : X -> F X + X F' + sum_i G_i X G_i'
///   adjoint: X -> X F + F' X + sum_i G_i' X G_i
/// together with the drift F and diffusions G_i it was built from.
struct LiftedOperator {
  Matrix M;
  OperatorKind kind = OperatorKind::kDrift;
  Matrix drift;
  std::vector<Matrix> diffusions;

  [[nodiscard]] Index n() const { return drift.rows(); }
  [[nodiscard]] bool adjoint() const {
    return kind == OperatorKind::kClosedLoopAdjoint || kind == OperatorKind::kDriftAdjoint;
  }
};

/// Operator on all n x n matrices in row-major vec coordinates:
/// (F⊗I + I⊗F + G⊗G).
struct KronOperator {
  Matrix M0;
  Matrix drift;
  Matrix diffusion;
};

/// vec(QX) = M * svec(X) for symmetric X, with vec stacking rows of QX.
struct OutputLift {
  Matrix M;
  Index n = 0;
  Index outputs = 0;
};

LiftedOperator build_closed_loop_operator(const SystemQuad& sys, const Matrix& K,
                                          LiftVariant variant = LiftVariant::kDirect);

LiftedOperator build_drift_operator(const Matrix& A, const std::vector<Matrix>& Cs,
                                    LiftVariant variant = LiftVariant::kDirect);

KronOperator build_kron_operator(const SystemQuad& sys, const Matrix& K);

OutputLift build_output_lift(const Matrix& Q, Index n);

/// Direct evaluation of the operator a LiftedOperator represents.
Matrix apply_operator(const LiftedOperator& L, const Matrix& X);

struct ExtraSpectrumItem {
  Complex lambda;
  /// True when matched (as a multiset element) against σ(L).
  bool in_symmetric_spectrum = false;
  /// Skew-symmetric eigenvector of L0 for eigenvalues not in σ(L).
  std::optional<CMatrix> skew_witness;
  double witness_residual = 0.0;
};

/// For every eigenvalue of L0 (with multiplicity) decide whether it is
/// carried by σ(L) or only by a skew-symmetric eigenvector.
std::vector<ExtraSpectrumItem> classify_extra_spectrum(const LiftedOperator& L,
                                                       const KronOperator& L0,
                                                       const Tolerances& tol = {});

}  // namespace stochlin
