#pragma once

#include <map>
#include <string>
#include <vector>

#include "stochlin/types.hpp"

namespace stochlin::lmi {

/// Matrix-valued affine function of the decision vector x:
///   c + sum_k x_k * terms[k].
class AffineMatrix {
 public:
  AffineMatrix() = default;
  explicit AffineMatrix(Matrix constant) : c_(std::move(constant)) {}
  static AffineMatrix zero(Index rows, Index cols) { return AffineMatrix(Matrix::Zero(rows, cols)); }

  [[nodiscard]] Index rows() const { return c_.rows(); }
  [[nodiscard]] Index cols() const { return c_.cols(); }
  [[nodiscard]] const Matrix& constant() const { return c_; }
  [[nodiscard]] const std::map<Index, Matrix>& terms() const { return terms_; }

  void add_term(Index var, const Matrix& coef);

  [[nodiscard]] Matrix evaluate(const Vector& x) const;
  [[nodiscard]] AffineMatrix transpose() const;

  AffineMatrix& operator+=(const AffineMatrix& o);
  AffineMatrix& operator-=(const AffineMatrix& o);
  AffineMatrix& operator*=(double s);

  friend AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) { return a += b; }
  friend AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) { return a -= b; }
  friend AffineMatrix operator-(AffineMatrix a) { return a *= -1.0; }
  friend AffineMatrix operator*(double s, AffineMatrix a) { return a *= s; }
  friend AffineMatrix operator+(AffineMatrix a, const Matrix& b) { return a += AffineMatrix(b); }
  friend AffineMatrix operator-(AffineMatrix a, const Matrix& b) { return a -= AffineMatrix(b); }
  friend AffineMatrix operator-(const Matrix& b, const AffineMatrix& a) { return AffineMatrix(b) - a; }
  friend AffineMatrix operator*(const Matrix& L, const AffineMatrix& a);
  friend AffineMatrix operator*(const AffineMatrix& a, const Matrix& R);

 private:
  Matrix c_;
  std::map<Index, Matrix> terms_;
};

/// Allocates decision variables. Symmetric matrix variables are parameterized
/// by their svec coordinates.
class DecisionVariables {
 public:
  AffineMatrix symmetric(Index n, const std::string& name = "");
  AffineMatrix full(Index rows, Index cols, const std::string& name = "");
  AffineMatrix scalar(const std::string& name = "");

  [[nodiscard]] Index size() const { return count_; }
  /// First index of the variable registered under `name`.
  [[nodiscard]] Index offset(const std::string& name) const;

 private:
  Index count_ = 0;
  std::map<std::string, Index> names_;
};

/// Symmetric matrix assembled from blocks. blocks[i][j] with j < i may be
/// left empty (0x0) and is then filled with blocks[j][i]'.
AffineMatrix assemble(const std::vector<std::vector<AffineMatrix>>& blocks);

/// Block-diagonal symmetric expression; the intended constraint is
/// F(x) < 0 (or <= 0) on every block.
struct LinearMatrixExpr {
  Index num_vars = 0;
  std::vector<AffineMatrix> blocks;

  void add_block(const AffineMatrix& F);
  [[nodiscard]] Matrix evaluate(const Vector& x) const;
  /// Smallest eigenvalue of -F(x) over all blocks.
  [[nodiscard]] double margin(const Vector& x) const;
  [[nodiscard]] Index order() const;
};

enum class Goal { kStrictNegative, kNonpositive };

enum class SdpStatus { kFeasible, kInfeasible, kUnknown, kUnbounded };

const char* to_string(SdpStatus s);

struct SdpOptions {
  /// Every decision variable is confined to [-box, box].
  double box = 1.0;
  /// Strict goals need a margin above this; non-strict goals accept margins
  /// above -nonstrict_slack.
  double strict_threshold = 1e-9;
  double nonstrict_slack = 1e-9;
  /// Relative duality-gap proxy used as the stopping rule.
  double gap_rel = 1e-8;
  int max_newton = 1000;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::kUnknown;
  Vector x;
  /// min eigenvalue of -F(x), re-evaluated independently at the returned x.
  double margin = 0.0;
  double objective = 0.0;
  int iterations = 0;
  std::string diagnostic;
};

/// Maximizes t subject to F(x) <= -t I and the box. The goal decides how the
/// optimal margin is read.
SdpSolution feasibility(const LinearMatrixExpr& expr, Goal goal, const SdpOptions& opts = {});

/// Maximizes c'x subject to F(x) <= 0 and the box. A strictly feasible point
/// is found first by margin maximization.
SdpSolution maximize(const Vector& c, const LinearMatrixExpr& expr, const SdpOptions& opts = {});

/// [[M, N], [N', R]]. With R > 0 this is positive (semi)definite iff
/// M - N R^-1 N' is.
AffineMatrix schur_embed(const AffineMatrix& M, const AffineMatrix& N, const AffineMatrix& R);

/// Removes the uncertainty F (F'F <= I) from Y + H F E + E'F'H' < 0 by the
/// equivalent [[Y + eps H H', E'], [E, -eps I]] < 0 with eps a new scalar
/// variable (index `eps_var`).
AffineMatrix s_procedure_embed(const AffineMatrix& Y, const Matrix& H, const AffineMatrix& E,
                               Index eps_var);

}  // namespace stochlin::lmi
