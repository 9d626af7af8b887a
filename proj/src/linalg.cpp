#include "stochlin/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace stochlin::linalg {

bool is_symmetric(const Matrix& X, double sym_rel) {
  if (X.rows() != X.cols()) return false;
  return (X - X.transpose()).norm() <= sym_rel * std::max(1.0, X.norm());
}

Matrix symmetrized(const Matrix& X, double sym_rel, const char* name) {
  if (X.rows() != X.cols()) {
    throw InvalidInput(std::string(name) + " must be square");
  }
  if (!X.allFinite()) {
    throw InvalidInput(std::string(name) + " has non-finite entries");
  }
  if (!is_symmetric(X, sym_rel)) {
    throw InvalidInput(std::string(name) + " is not symmetric");
  }
  return 0.5 * (X + X.transpose());
}

double min_eigenvalue(const Matrix& S) {
  if (S.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double max_eigenvalue(const Matrix& S) {
  if (S.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

bool is_positive_definite(const Matrix& P, double pd_rel) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (P + P.transpose()), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double norm2 = std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
  return ev(0) > pd_rel * (1.0 + norm2);
}

Matrix psd_sqrt(const Matrix& S, double clip) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()));
  Vector ev = es.eigenvalues();
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -clip) {
      throw InvalidInput("matrix is indefinite (eigenvalue " + std::to_string(ev(i)) + ")");
    }
    ev(i) = std::sqrt(std::max(0.0, ev(i)));
  }
  const Matrix& V = es.eigenvectors();
  Matrix root = V * ev.asDiagonal() * V.transpose();
  return 0.5 * (root + root.transpose());
}

namespace {

template <typename Mat>
double threshold_impl(const Mat& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(M);
  const double norm2 = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
  const double order = static_cast<double>(std::max(M.rows(), M.cols()));
  return order * std::numeric_limits<double>::epsilon() * norm2 * 10.0;
}

template <typename Mat>
Index rank_impl(const Mat& M) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(M);
  const auto& sv = svd.singularValues();
  const double order = static_cast<double>(std::max(M.rows(), M.cols()));
  const double tol = order * std::numeric_limits<double>::epsilon() * sv(0) * 10.0;
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++r;
  }
  return r;
}

template <typename Mat>
Mat null_impl(const Mat& M, double tol) {
  const Index cols = M.cols();
  if (M.rows() == 0) return Mat::Identity(cols, cols);
  // Pad to at least `cols` rows so the full right singular basis is returned.
  Mat padded = Mat::Zero(std::max(M.rows(), cols), cols);
  padded.topRows(M.rows()) = M;
  Eigen::JacobiSVD<Mat> svd(padded, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  Index r = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) ++r;
  }
  return svd.matrixV().rightCols(cols - r);
}

}  // namespace

double rank_threshold(const CMatrix& M) { return threshold_impl(M); }
double rank_threshold(const Matrix& M) { return threshold_impl(M); }
Index numerical_rank(const Matrix& M) { return rank_impl(M); }
Index numerical_rank(const CMatrix& M) { return rank_impl(M); }
CMatrix null_space(const CMatrix& M, double tol) { return null_impl(M, tol); }
Matrix null_space(const Matrix& M, double tol) { return null_impl(M, tol); }

Vector vec_rows(const Matrix& X) {
  Vector v(X.size());
  for (Index i = 0; i < X.rows(); ++i) {
    for (Index j = 0; j < X.cols(); ++j) v(i * X.cols() + j) = X(i, j);
  }
  return v;
}

Matrix unvec_rows(const Vector& v, Index rows, Index cols) {
  Matrix X(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) X(i, j) = v(i * cols + j);
  }
  return X;
}

Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Index i = 0; i < A.rows(); ++i) {
    for (Index j = 0; j < A.cols(); ++j) {
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    }
  }
  return K;
}

double eigen_abscissa(const Matrix& M) {
  Eigen::EigenSolver<Matrix> es(M, false);
  if (es.info() != Eigen::Success) {
    throw NumericalFailure("eigenvalue iteration did not converge");
  }
  return es.eigenvalues().real().maxCoeff();
}

}  // namespace stochlin::linalg
