#include "stochlin/gare.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/QR>

#include "stochlin/lift.hpp"
#include "stochlin/linalg.hpp"
#include "stochlin/lmi.hpp"
#include "stochlin/stabilizability.hpp"

namespace stochlin {

const char* to_string(GareClass c) {
  switch (c) {
    case GareClass::kFeedbackStabilizing:
      return "feedback-stabilizing";
    case GareClass::kWeaklyStabilizing:
      return "weakly-stabilizing";
    case GareClass::kStrong:
      return "strong";
    case GareClass::kIndefinite:
      return "indefinite-class";
  }
  return "indefinite-class";
}

namespace {

void check_problem(const GareProblem& prob, const Tolerances& tol) {
  const Index n = prob.sys.n();
  const Index m = prob.sys.m();
  if (prob.Q.rows() != n || prob.Q.cols() != n) {
    throw InvalidInput("Q must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  if (prob.R.rows() != m || prob.R.cols() != m) {
    throw InvalidInput("R must be " + std::to_string(m) + "x" + std::to_string(m));
  }
  linalg::symmetrized(prob.Q, tol.sym_rel, "Q");
  linalg::symmetrized(prob.R, tol.sym_rel, "R");
}

Matrix control_weight(const GareProblem& prob, const Matrix& P, const Tolerances& tol) {
  const Matrix& D = prob.sys.D();
  const Matrix W = prob.R + D.transpose() * P * D;
  if (!linalg::is_positive_definite(W, tol.pd_rel)) {
    throw InvalidInput("R + D'PD is not positive definite");
  }
  return 0.5 * (W + W.transpose());
}

Matrix cross_term(const GareProblem& prob, const Matrix& P) {
  const auto& s = prob.sys;
  return s.B().transpose() * P + s.D().transpose() * P * s.C();
}

struct SdpOutcome {
  lmi::SdpSolution sol;
  Matrix P;
  double box = 0.0;
};

// Trace maximization over the Riccati LMI; the variable box is widened while
// the optimizer sits on it.
SdpOutcome sdp_maximal(const GareProblem& prob, const Tolerances& tol) {
  const auto& s = prob.sys;
  const Index n = s.n();
  const Index m = s.m();
  lmi::DecisionVariables vars;
  const lmi::AffineMatrix P = vars.symmetric(n, "P");
  const Matrix& A = s.A();
  const Matrix& B = s.B();
  const Matrix& C = s.C();
  const Matrix& D = s.D();
  const Matrix Q = linalg::symmetrized(prob.Q, tol.sym_rel, "Q");
  const Matrix R = linalg::symmetrized(prob.R, tol.sym_rel, "R");

  const lmi::AffineMatrix top = P * A + A.transpose() * P + C.transpose() * P * C + Q;
  const lmi::AffineMatrix off = P * B + C.transpose() * P * D;
  const lmi::AffineMatrix bottom = D.transpose() * P * D + R;
  const double eps = 1e-9 * (1.0 + R.norm());

  lmi::LinearMatrixExpr expr;
  expr.num_vars = vars.size();
  expr.add_block(-lmi::assemble({{top, off}, {lmi::AffineMatrix(), bottom}}));
  expr.add_block(Matrix(eps * Matrix::Identity(m, m)) - bottom);

  Vector c = Vector::Zero(vars.size());
  for (Index i = 0; i < n; ++i) c(svec_index(n, i, i)) = 1.0;

  SdpOutcome out;
  lmi::SdpOptions opts;
  opts.box = 1e3 * (1.0 + Q.norm() + R.norm());
  for (int attempt = 0; attempt < 4; ++attempt) {
    out.sol = lmi::maximize(c, expr, opts);
    out.box = opts.box;
    if (out.sol.status != lmi::SdpStatus::kUnbounded) break;
    opts.box *= 100.0;
  }
  out.P = smat(Vector(out.sol.x.head(svec_size(n))));
  return out;
}

}  // namespace

double gare_tolerance(const GareProblem& prob, const Tolerances& tol) {
  return tol.gare_rel * (1.0 + prob.Q.norm());
}

Matrix gare_gain(const GareProblem& prob, const Matrix& P, const Tolerances& tol) {
  const Matrix W = control_weight(prob, P, tol);
  return -W.ldlt().solve(cross_term(prob, P));
}

Matrix gare_residual_matrix(const GareProblem& prob, const Matrix& P, const Tolerances& tol) {
  check_problem(prob, tol);
  const Index n = prob.sys.n();
  if (P.rows() != n || P.cols() != n) throw InvalidInput("P must be n x n");
  const auto& s = prob.sys;
  const Matrix W = control_weight(prob, P, tol);
  const Matrix S = cross_term(prob, P);
  Matrix res = P * s.A() + s.A().transpose() * P + s.C().transpose() * P * s.C() + prob.Q -
               S.transpose() * W.ldlt().solve(S);
  return 0.5 * (res + res.transpose());
}

double gare_residual(const GareProblem& prob, const Matrix& P, const Tolerances& tol) {
  return gare_residual_matrix(prob, P, tol).norm();
}

GareClassification classify_solution(const GareProblem& prob, const Matrix& P, const Tolerances& tol) {
  const double res = gare_residual(prob, P, tol);
  if (res > gare_tolerance(prob, tol)) {
    std::ostringstream msg;
    msg << "P does not solve the Riccati equation (residual " << res << ")";
    throw InvalidInput(msg.str());
  }
  const Matrix K = gare_gain(prob, P, tol);
  const StabilityVerdict v =
      is_weakly_stable(build_closed_loop_operator(prob.sys, K, LiftVariant::kAdjoint), tol);
  GareClassification c;
  c.abscissa = v.abscissa;
  c.critical = v.critical;
  c.strong = v.abscissa <= tol.margin;
  if (v.abscissa < -tol.margin) {
    c.label = GareClass::kFeedbackStabilizing;
  } else if (c.strong) {
    c.label = v.verdict == Verdict::kWeaklyStable ? GareClass::kWeaklyStabilizing : GareClass::kStrong;
  } else {
    c.label = GareClass::kIndefinite;
  }
  return c;
}

GareSolution gare_newton(const GareProblem& prob, const Matrix& P0, int max_iter, const Tolerances& tol) {
  check_problem(prob, tol);
  GareSolution out;
  Matrix P = 0.5 * (P0 + P0.transpose());
  Matrix Res = gare_residual_matrix(prob, P, tol);
  double res = Res.norm();
  const double target = 1e-3 * gare_tolerance(prob, tol);
  for (int it = 0; it < max_iter && res > target; ++it) {
    const Matrix K = gare_gain(prob, P, tol);
    const LiftedOperator L = build_closed_loop_operator(prob.sys, K, LiftVariant::kAdjoint);
    const Vector step = L.M.completeOrthogonalDecomposition().solve(-svec(Res));
    const Matrix Delta = smat(step);
    bool accepted = false;
    for (double alpha = 1.0; alpha >= 1.0 / 1024.0; alpha *= 0.5) {
      const Matrix Pn = P + alpha * Delta;
      try {
        const Matrix Rn = gare_residual_matrix(prob, Pn, tol);
        if (Rn.norm() < res) {
          P = Pn;
          Res = Rn;
          res = Rn.norm();
          accepted = true;
          break;
        }
      } catch (const InvalidInput&) {
        // R + D'PD lost definiteness; shorten the step.
      }
    }
    if (!accepted) break;
    ++out.newton_steps;
  }
  out.P = P;
  out.residual = res;
  out.K = gare_gain(prob, P, tol);
  return out;
}

namespace {

GareSolution maximal_no_precondition(const GareProblem& prob, const Tolerances& tol) {
  const SdpOutcome sdp = sdp_maximal(prob, tol);
  if (sdp.sol.status != lmi::SdpStatus::kFeasible) {
    std::ostringstream msg;
    msg << "trace maximization ended with status " << lmi::to_string(sdp.sol.status);
    if (!sdp.sol.diagnostic.empty()) msg << " (" << sdp.sol.diagnostic << ")";
    throw NumericalFailure(msg.str());
  }
  GareSolution sol = gare_newton(prob, sdp.P, 50, tol);
  sol.sdp_iterations = sdp.sol.iterations;
  sol.maximal = true;
  if (sol.residual > gare_tolerance(prob, tol)) {
    std::ostringstream msg;
    msg << "Newton refinement stalled at residual " << sol.residual << " (best iterate kept)";
    throw NumericalFailure(msg.str());
  }
  sol.classification = classify_solution(prob, sol.P, tol);
  return sol;
}

void require_stabilizable(const GareProblem& prob, const Tolerances& tol) {
  const StabilizabilityReport rep = is_stabilizable(prob.sys, tol);
  if (rep.decision == Decision::kNo) {
    throw InvalidInput("precondition violated: the plant is not stabilizable");
  }
  if (rep.decision != Decision::kYes) {
    throw InvalidInput("precondition not established: stabilizability is undecided (" +
                       rep.diagnostic + ")");
  }
}

}  // namespace

GareSolution solve_gare_maximal(const GareProblem& prob, const Tolerances& tol) {
  check_problem(prob, tol);
  require_stabilizable(prob, tol);
  return maximal_no_precondition(prob, tol);
}

std::vector<double> default_eps_schedule() {
  return {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8};
}

GareSolution epsilon_homotopy_strong(const GareProblem& prob, const std::vector<double>& eps_schedule,
                                     const Tolerances& tol) {
  check_problem(prob, tol);
  if (eps_schedule.empty()) throw InvalidInput("empty eps schedule");
  for (std::size_t i = 0; i < eps_schedule.size(); ++i) {
    if (!(eps_schedule[i] > 0.0) || (i > 0 && eps_schedule[i] >= eps_schedule[i - 1])) {
      throw InvalidInput("eps schedule must be positive and strictly decreasing");
    }
  }
  require_stabilizable(prob, tol);
  const Index n = prob.sys.n();

  std::vector<double> steps;
  Matrix prev;
  std::ostringstream trace;
  for (double eps : eps_schedule) {
    GareProblem pe{prob.sys, prob.Q + eps * Matrix::Identity(n, n), prob.R};
    const GareSolution s = maximal_no_precondition(pe, tol);
    trace << "eps=" << eps << " trace(P)=" << s.P.trace() << "; ";
    if (prev.size()) steps.push_back((s.P - prev).norm());
    prev = s.P;
  }
  const double scale = 1.0 + prev.norm();
  if (!steps.empty() && steps.back() > 1e-3 * scale) {
    throw NumericalFailure("eps homotopy is not Cauchy: " + trace.str());
  }

  GareSolution out = gare_newton(prob, prev, 50, tol);
  if (out.residual > gare_tolerance(prob, tol) || (out.P - prev).norm() > 1e-3 * scale) {
    throw NumericalFailure("eps homotopy limit could not be refined: " + trace.str());
  }
  out.maximal = true;
  out.homotopy_steps = steps;
  out.classification = classify_solution(prob, out.P, tol);
  return out;
}

GareComparison compare_gare(const GareProblem& prob, const GareProblem& prob_hat, const Matrix& P_hat,
                            double psd_tol, const Tolerances& tol) {
  check_problem(prob, tol);
  check_problem(prob_hat, tol);
  const auto same = [](const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a - b).norm() == 0.0;
  };
  const auto& s = prob.sys;
  const auto& h = prob_hat.sys;
  if (!same(s.A(), h.A()) || !same(s.B(), h.B()) || !same(s.C(), h.C()) || !same(s.D(), h.D())) {
    throw InvalidInput("precondition violated: both problems must share (A, B, C, D)");
  }
  const Matrix dR = prob.R - prob_hat.R;
  const Matrix dQ = prob.Q - prob_hat.Q;
  if (linalg::min_eigenvalue(dR) < -tol.pd_rel * (1.0 + dR.norm())) {
    throw InvalidInput("precondition violated: R - R_hat is not positive semidefinite");
  }
  if (linalg::min_eigenvalue(dQ) < -tol.pd_rel * (1.0 + dQ.norm())) {
    throw InvalidInput("precondition violated: Q - Q_hat is not positive semidefinite");
  }
  if (gare_residual(prob_hat, P_hat, tol) > gare_tolerance(prob_hat, tol)) {
    throw InvalidInput("precondition violated: P_hat does not solve the hat problem");
  }
  GareComparison out;
  out.P_bar = solve_gare_maximal(prob, tol).P;
  out.min_eigenvalue = linalg::min_eigenvalue(out.P_bar - P_hat);
  out.verified = out.min_eigenvalue >= -psd_tol;
  return out;
}

GareBridgeReport stabilizability_gare(const SystemQuad& sys, const Tolerances& tol) {
  const GareProblem prob{sys, Matrix::Identity(sys.n(), sys.n()), Matrix::Identity(sys.m(), sys.m())};
  GareBridgeReport rep;
  try {
    const GareSolution s = maximal_no_precondition(prob, tol);
    rep.P = s.P;
    rep.residual = s.residual;
    rep.has_positive_solution = linalg::is_positive_definite(s.P, tol.pd_rel);
    if (!rep.has_positive_solution) rep.diagnostic = "maximal solution is not positive definite";
  } catch (const NumericalFailure& e) {
    rep.diagnostic = e.what();
  }
  return rep;
}

}  // namespace stochlin
