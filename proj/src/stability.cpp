#include "stochlin/stability.hpp"

#include <sstream>

#include <Eigen/SVD>

#include "stochlin/lift.hpp"
#include "stochlin/linalg.hpp"
#include "stochlin/observability.hpp"

namespace stochlin {

double gen_lyapunov_residual(const GenLyapProblem& prob, const Matrix& P) {
  Matrix R = P * prob.A + prob.A.transpose() * P + prob.Q;
  for (const auto& C : prob.Cs) R += C.transpose() * P * C;
  return R.norm();
}

GenLyapSolution solve_gen_lyapunov(const GenLyapProblem& prob, const Tolerances& tol) {
  const Index n = prob.A.rows();
  if (prob.Q.rows() != n || prob.Q.cols() != n) {
    throw InvalidInput("Q must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  const Matrix Q = linalg::symmetrized(prob.Q, tol.sym_rel, "Q");
  const LiftedOperator L = build_drift_operator(prob.A, prob.Cs, LiftVariant::kAdjoint);

  GenLyapSolution sol;
  Eigen::JacobiSVD<Matrix> svd(L.M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double thr = linalg::rank_threshold(L.M);
  const auto& sv = svd.singularValues();
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > thr) ++rank;
  }
  if (rank < sv.size()) {
    sol.singular = true;
    sol.null_space = svd.matrixV().rightCols(sv.size() - rank);
    return sol;
  }

  const Vector rhs = -svec(Q, tol);
  Vector p = svd.solve(rhs);
  p += svd.solve(rhs - L.M * p);  // one step of iterative refinement
  sol.P = smat(p);
  GenLyapProblem sym_prob{prob.A, prob.Cs, Q};
  sol.residual = gen_lyapunov_residual(sym_prob, *sol.P);
  if (sol.residual > 1e-9 * (1.0 + Q.norm())) {
    std::ostringstream msg;
    msg << "generalized Lyapunov residual " << sol.residual << " exceeds tolerance";
    throw NumericalFailure(msg.str());
  }
  return sol;
}

const char* to_string(LyapunovClass c) {
  switch (c) {
    case LyapunovClass::kStabilityCertificate:
      return "stability-certificate";
    case LyapunovClass::kDetectabilityConditional:
      return "detectability-conditional";
    case LyapunovClass::kInconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

LyapunovClassification classify_lyapunov_solution(const GenLyapProblem& prob, const Matrix& P,
                                                  const Tolerances& tol) {
  const Matrix Q = linalg::symmetrized(prob.Q, tol.sym_rel, "Q");
  LyapunovClassification out;
  // psd_sqrt rejects Q with eigenvalues below -1e-10.
  out.q_root = linalg::psd_sqrt(Q, 1e-10);

  const Matrix Ps = linalg::symmetrized(P, tol.sym_rel, "P");
  const double pnorm = Ps.size() ? Ps.operatorNorm() : 0.0;
  out.p_positive_definite = linalg::is_positive_definite(Ps, tol.pd_rel);
  out.p_positive_semidefinite = linalg::min_eigenvalue(Ps) >= -tol.pd_rel * (1.0 + pnorm);

  const OutputSystem osys{prob.A, prob.Cs, out.q_root};
  out.exactly_observable = is_exactly_observable(osys, tol).observable;
  out.detectable = is_stochastically_detectable(osys, tol).decision == Decision::kYes;

  if (out.p_positive_definite && out.exactly_observable) {
    out.result = LyapunovClass::kStabilityCertificate;
  } else if (out.p_positive_semidefinite && out.detectable) {
    out.result = LyapunovClass::kDetectabilityConditional;
  } else {
    out.result = LyapunovClass::kInconclusive;
  }
  return out;
}

}  // namespace stochlin
