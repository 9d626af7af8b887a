#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stochlin/types.hpp"

namespace stochlin {

/// P A + A'P + sum_i C_i' P C_i = -Q.
struct GenLyapProblem {
  Matrix A;
  std::vector<Matrix> Cs;
  Matrix Q;
};

struct GenLyapSolution {
  bool singular = false;
  std::optional<Matrix> P;
  /// Frobenius norm of P A + A'P + sum C_i'P C_i + Q.
  double residual = 0.0;
  /// Basis (as svec columns) of the kernel of the lifted operator when singular.
  Matrix null_space;
};

GenLyapSolution solve_gen_lyapunov(const GenLyapProblem& prob, const Tolerances& tol = {});

double gen_lyapunov_residual(const GenLyapProblem& prob, const Matrix& P);

enum class LyapunovClass { kStabilityCertificate, kDetectabilityConditional, kInconclusive };

const char* to_string(LyapunovClass c);

struct LyapunovClassification {
  LyapunovClass result = LyapunovClass::kInconclusive;
  bool p_positive_definite = false;
  bool p_positive_semidefinite = false;
  bool exactly_observable = false;
  bool detectable = false;
  Matrix q_root;
};

/// Applies the two stability criteria for Q >= 0: P > 0 with exact
/// observability of [A, C_1..C_k | Q^{1/2}] certifies stability; P >= 0 with
/// stochastic detectability of the same triple also implies stability.
LyapunovClassification classify_lyapunov_solution(const GenLyapProblem& prob, const Matrix& P,
                                                  const Tolerances& tol = {});

}  // namespace stochlin
