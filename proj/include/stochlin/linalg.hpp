#pragma once

#include "stochlin/types.hpp"

namespace stochlin::linalg {

/// (X + X') / 2 after checking ||X - X'||_F <= sym_rel * max(1, ||X||_F).
Matrix symmetrized(const Matrix& X, double sym_rel, const char* name);

[[nodiscard]] bool is_symmetric(const Matrix& X, double sym_rel);

/// Smallest / largest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& S);
double max_eigenvalue(const Matrix& S);

/// λ_min(P) > pd_rel * (1 + ||P||_2).
bool is_positive_definite(const Matrix& P, double pd_rel);

/// Symmetric PSD square root. Eigenvalues in [-clip, 0) are set to zero;
/// anything more negative raises InvalidInput.
Matrix psd_sqrt(const Matrix& S, double clip = 1e-10);

/// Threshold used for every numerical-rank decision:
/// order * machine-eps * ||M||_2 * 10.
double rank_threshold(const CMatrix& M);
double rank_threshold(const Matrix& M);

Index numerical_rank(const Matrix& M);
Index numerical_rank(const CMatrix& M);

/// Orthonormal basis of the numerical null space (singular values <= tol).
CMatrix null_space(const CMatrix& M, double tol);
Matrix null_space(const Matrix& M, double tol);

/// Row-major vectorization (stacking rows), matching vec(AXB') = (A⊗B)vec(X).
Vector vec_rows(const Matrix& X);
Matrix unvec_rows(const Vector& v, Index rows, Index cols);

Matrix kron(const Matrix& A, const Matrix& B);

/// Largest real part of the eigenvalues of a square matrix.
double eigen_abscissa(const Matrix& M);

}  // namespace stochlin::linalg
