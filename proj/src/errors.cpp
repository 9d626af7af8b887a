#include "stochlin/types.hpp"

#include <string>

namespace stochlin {

namespace {

std::string shape(const Matrix& M) {
  return std::to_string(M.rows()) + "x" + std::to_string(M.cols());
}

void require_finite(const Matrix& M, const char* name) {
  if (!M.allFinite()) {
    throw InvalidInput(std::string(name) + " has non-finite entries");
  }
}

}  // namespace

SystemQuad::SystemQuad(Matrix A, Matrix B, Matrix C, Matrix D)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)) {
  const Index n = A_.rows();
  if (n < 1 || A_.cols() != n) {
    throw InvalidInput("A must be square with n >= 1, got " + shape(A_));
  }
  if (B_.rows() != n || B_.cols() < 1) {
    throw InvalidInput("B must be " + std::to_string(n) + "xm with m >= 1, got " + shape(B_));
  }
  if (C_.rows() != n || C_.cols() != n) {
    throw InvalidInput("C must be " + std::to_string(n) + "x" + std::to_string(n) + ", got " +
                       shape(C_));
  }
  if (D_.rows() != n || D_.cols() != B_.cols()) {
    throw InvalidInput("D must have the shape of B (" + shape(B_) + "), got " + shape(D_));
  }
  require_finite(A_, "A");
  require_finite(B_, "B");
  require_finite(C_, "C");
  require_finite(D_, "D");
}

Matrix SystemQuad::closed_drift(const Matrix& K) const {
  check_gain(K);
  return A_ + B_ * K;
}

Matrix SystemQuad::closed_diffusion(const Matrix& K) const {
  check_gain(K);
  return C_ + D_ * K;
}

void SystemQuad::check_gain(const Matrix& K) const {
  if (K.rows() != m() || K.cols() != n()) {
    throw InvalidInput("gain must be " + std::to_string(m()) + "x" + std::to_string(n()) +
                       ", got " + shape(K));
  }
}

SystemQuad SystemQuad::scalar(double a, double b, double c, double d) {
  return SystemQuad(Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, b),
                    Matrix::Constant(1, 1, c), Matrix::Constant(1, 1, d));
}

}  // namespace stochlin
