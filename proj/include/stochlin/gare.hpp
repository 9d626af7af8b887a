#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stochlin/spectra.hpp"
#include "stochlin/types.hpp"

namespace stochlin {

/// PA + A'P + C'PC + Q - (PB + C'PD)(R + D'PD)^-1 (B'P + D'PC) = 0.
struct GareProblem {
  SystemQuad sys;
  Matrix Q;
  Matrix R;
};

enum class GareClass { kFeedbackStabilizing, kWeaklyStabilizing, kStrong, kIndefinite };

const char* to_string(GareClass c);

struct GareClassification {
  GareClass label = GareClass::kIndefinite;
  /// Abscissa of the adjoint closed-loop lift at K(P).
  double abscissa = 0.0;
  bool strong = false;
  std::vector<CriticalEigenvalue> critical;
};

struct GareSolution {
  Matrix P;
  /// K = -(R + D'PD)^-1 (B'P + D'PC).
  Matrix K;
  double residual = 0.0;
  GareClassification classification;
  bool maximal = false;
  int sdp_iterations = 0;
  int newton_steps = 0;
  /// Homotopy only: ||P_k - P_{k-1}||_F along the eps schedule.
  std::vector<double> homotopy_steps;
};

/// Frobenius norm of the Riccati left-hand side. Throws InvalidInput when
/// R + D'PD is not positive definite.
double gare_residual(const GareProblem& prob, const Matrix& P, const Tolerances& tol = {});

Matrix gare_residual_matrix(const GareProblem& prob, const Matrix& P, const Tolerances& tol = {});

Matrix gare_gain(const GareProblem& prob, const Matrix& P, const Tolerances& tol = {});

/// tol_gare = gare_rel * (1 + ||Q||_F).
double gare_tolerance(const GareProblem& prob, const Tolerances& tol = {});

/// Maximal solution: maximize trace(P) over
///   [[PA + A'P + C'PC + Q, PB + C'PD], [B'P + D'PC, R + D'PD]] >= 0
/// followed by Newton refinement on the Riccati residual. Requires a
/// stabilizable plant.
GareSolution solve_gare_maximal(const GareProblem& prob, const Tolerances& tol = {});

/// Newton iteration on the Riccati residual from P0 (damped by halving).
GareSolution gare_newton(const GareProblem& prob, const Matrix& P0, int max_iter = 50,
                         const Tolerances& tol = {});

GareClassification classify_solution(const GareProblem& prob, const Matrix& P,
                                     const Tolerances& tol = {});

/// Maximal solutions for Q + eps I along a decreasing schedule, with the
/// limit refined on the original equation.
GareSolution epsilon_homotopy_strong(const GareProblem& prob, const std::vector<double>& eps_schedule,
                                     const Tolerances& tol = {});

std::vector<double> default_eps_schedule();

struct GareComparison {
  bool verified = false;
  /// Smallest eigenvalue of P_bar - P_hat.
  double min_eigenvalue = 0.0;
  Matrix P_bar;
};

/// With R >= R_hat and Q >= Q_hat, the maximal solution of `prob` dominates
/// any solution P_hat of `prob_hat`.
GareComparison compare_gare(const GareProblem& prob, const GareProblem& prob_hat, const Matrix& P_hat,
                            double psd_tol = 1e-7, const Tolerances& tol = {});

struct GareBridgeReport {
  bool has_positive_solution = false;
  std::optional<Matrix> P;
  double residual = 0.0;
  std::string diagnostic;
};

/// The Q = I, R = I instance, solved without assuming stabilizability: a
/// positive definite solution exists exactly for stabilizable plants.
GareBridgeReport stabilizability_gare(const SystemQuad& sys, const Tolerances& tol = {});

}  // namespace stochlin
