#include "stochlin/stabilizability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "stochlin/lift.hpp"
#include "stochlin/linalg.hpp"
#include "stochlin/spectra.hpp"

namespace stochlin {

const char* to_string(Decision d) {
  switch (d) {
    case Decision::kYes:
      return "yes";
    case Decision::kNo:
      return "no";
    case Decision::kUnknown:
      return "unknown";
  }
  return "unknown";
}

namespace {

void check_quadruple(const Matrix& A, const Matrix& B, const std::vector<Matrix>& Cs,
                     const std::vector<Matrix>& Ds) {
  const Index n = A.rows();
  if (n < 1 || A.cols() != n) throw InvalidInput("A must be square and non-empty");
  if (B.rows() != n || B.cols() < 1) throw InvalidInput("B must have n rows and at least one column");
  if (Cs.size() != Ds.size()) throw InvalidInput("need one D_i per diffusion C_i");
  for (std::size_t i = 0; i < Cs.size(); ++i) {
    if (Cs[i].rows() != n || Cs[i].cols() != n) {
      throw InvalidInput("C[" + std::to_string(i) + "] must be n x n");
    }
    if (Ds[i].rows() != n || Ds[i].cols() != B.cols()) {
      throw InvalidInput("D[" + std::to_string(i) + "] must have the shape of B");
    }
  }
}

double closed_loop_abscissa(const Matrix& A, const Matrix& B, const std::vector<Matrix>& Cs,
                            const std::vector<Matrix>& Ds, const Matrix& K) {
  std::vector<Matrix> G;
  for (std::size_t i = 0; i < Cs.size(); ++i) G.push_back(Cs[i] + Ds[i] * K);
  return spectral_abscissa(build_drift_operator(A + B * K, G, LiftVariant::kDirect));
}

}  // namespace

lmi::LinearMatrixExpr stabilizability_lmi(const Matrix& A, const Matrix& B,
                                          const std::vector<Matrix>& Cs,
                                          const std::vector<Matrix>& Ds) {
  check_quadruple(A, B, Cs, Ds);
  const Index n = A.rows();
  const Index m = B.cols();
  lmi::DecisionVariables vars;
  const lmi::AffineMatrix P = vars.symmetric(n, "P");
  const lmi::AffineMatrix Y = vars.full(m, n, "Y");

  const lmi::AffineMatrix BY = B * Y;
  const lmi::AffineMatrix top = A * P + P * A.transpose() + BY + BY.transpose();
  lmi::LinearMatrixExpr expr;
  expr.num_vars = vars.size();
  if (Cs.empty()) {
    expr.add_block(top);
    expr.add_block(-P);
    return expr;
  }
  const std::size_t k = Cs.size();
  std::vector<std::vector<lmi::AffineMatrix>> blocks(k + 1, std::vector<lmi::AffineMatrix>(k + 1));
  blocks[0][0] = top;
  for (std::size_t i = 0; i < k; ++i) {
    blocks[0][i + 1] = Cs[i] * P + Ds[i] * Y;
    blocks[i + 1][i + 1] = -P;
    for (std::size_t j = i + 1; j < k; ++j) blocks[i + 1][j + 1] = lmi::AffineMatrix::zero(n, n);
  }
  expr.add_block(lmi::assemble(blocks));
  return expr;
}

StabilizabilityReport is_stabilizable(const Matrix& A, const Matrix& B,
                                      const std::vector<Matrix>& Cs,
                                      const std::vector<Matrix>& Ds, const Tolerances& tol) {
  check_quadruple(A, B, Cs, Ds);
  const Index n = A.rows();
  const Index m = B.cols();
  StabilizabilityReport rep;
  rep.method = "strict synthesis LMI, K = Y P^-1";

  const lmi::LinearMatrixExpr expr = stabilizability_lmi(A, B, Cs, Ds);
  const lmi::SdpSolution sol = lmi::feasibility(expr, lmi::Goal::kStrictNegative);
  rep.lmi_margin = sol.margin;
  rep.diagnostic = sol.diagnostic;

  if (sol.status == lmi::SdpStatus::kFeasible) {
    const Matrix P = smat(Vector(sol.x.head(svec_size(n))));
    const Matrix Y = linalg::unvec_rows(sol.x.segment(svec_size(n), m * n), m, n);
    const Matrix K = P.ldlt().solve(Y.transpose()).transpose();
    const double abscissa = closed_loop_abscissa(A, B, Cs, Ds, K);
    rep.closed_loop_abscissa = abscissa;
    if (std::isfinite(abscissa) && abscissa < -tol.margin) {
      rep.decision = Decision::kYes;
      rep.witness_gain = K;
      rep.witness_certificate = P;
    } else {
      std::ostringstream msg;
      msg << "LMI margin " << sol.margin << " but gain verification gave abscissa " << abscissa;
      rep.diagnostic = msg.str();
    }
  } else if (sol.status == lmi::SdpStatus::kInfeasible) {
    rep.decision = Decision::kNo;
  }

  // Scalar single-noise plants have a closed-form criterion.
  if (n == 1 && m == 1 && Cs.size() == 1 && Ds[0](0, 0) != 0.0) {
    const ScalarAnalysis sa = scalar_analysis(A(0, 0), B(0, 0), Cs[0](0, 0), Ds[0](0, 0));
    rep.scalar_criterion = sa.criterion;
    const Decision expected = sa.criterion > 0.0 ? Decision::kYes : Decision::kNo;
    if (rep.decision != Decision::kUnknown && rep.decision != expected) {
      rep.diagnostic = "LMI verdict disagrees with the scalar criterion";
      rep.decision = Decision::kUnknown;
      rep.witness_gain.reset();
      rep.witness_certificate.reset();
    }
  }
  return rep;
}

StabilizabilityReport is_stabilizable(const SystemQuad& sys, const Tolerances& tol) {
  return is_stabilizable(sys.A(), sys.B(), {sys.C()}, {sys.D()}, tol);
}

std::optional<Matrix> stabilizing_gain(const SystemQuad& sys, const Tolerances& tol) {
  StabilizabilityReport rep = is_stabilizable(sys, tol);
  if (rep.decision == Decision::kYes) return rep.witness_gain;
  return std::nullopt;
}

// ------------------------------------------------------ unremovable spectra

std::vector<UnremovableSpectrumItem> unremovable_spectra(const SystemQuad& sys,
                                                         const Tolerances& tol) {
  const Index n = sys.n();
  const Index N = svec_size(n);
  const Matrix& A = sys.A();
  const Matrix& B = sys.B();
  const Matrix& C = sys.C();
  const Matrix& D = sys.D();

  const LiftedOperator L = build_drift_operator(A, {C}, LiftVariant::kAdjoint);
  const Spectrum s = spectrum(L, tol);
  const CMatrix Mc = L.M.cast<Complex>();

  // Columns of the constraint map X -> (XB + C'XD, D'XD) on svec coordinates.
  auto constraints = [&](const CMatrix& X) {
    const CMatrix r1 = X * B.cast<Complex>() + C.transpose().cast<Complex>() * X * D.cast<Complex>();
    const CMatrix r2 = D.transpose().cast<Complex>() * X * D.cast<Complex>();
    CVector v(r1.size() + r2.size());
    Index k = 0;
    for (Index i = 0; i < r1.rows(); ++i) {
      for (Index j = 0; j < r1.cols(); ++j) v(k++) = r1(i, j);
    }
    for (Index i = 0; i < r2.rows(); ++i) {
      for (Index j = 0; j < r2.cols(); ++j) v(k++) = r2(i, j);
    }
    return v;
  };

  std::vector<UnremovableSpectrumItem> out;
  const double eig_thr = 0.5 * tol.unremovable;
  for (const auto& g : s.groups) {
    const CMatrix shifted = Mc - g.value * CMatrix::Identity(N, N);
    const CMatrix V = linalg::null_space(shifted, eig_thr);
    if (V.cols() == 0) continue;
    CMatrix W(B.size() + D.cols() * D.cols(), V.cols());
    for (Index k = 0; k < V.cols(); ++k) W.col(k) = constraints(smat(CVector(V.col(k))));
    const CMatrix coeffs = linalg::null_space(W, 0.5 * tol.unremovable);
    if (coeffs.cols() == 0) continue;

    UnremovableSpectrumItem item;
    item.lambda = g.value;
    item.complex_flag = std::abs(g.value.imag()) > s.tolerance;
    CVector v = V * coeffs.col(0);
    // Rotate to make the largest entry real, so real λ gives a real X.
    Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    v *= std::conj(v(imax)) / std::abs(v(imax));
    if (!item.complex_flag) v = v.real().cast<Complex>();
    item.X = smat(v);
    const double xn = item.X.norm();
    if (xn == 0.0) continue;
    item.X /= xn;
    const CMatrix Ac = A.cast<Complex>();
    const CMatrix Cc = C.cast<Complex>();
    item.residual_eigen =
        (item.X * Ac + Ac.transpose() * item.X + Cc.transpose() * item.X * Cc - g.value * item.X)
            .norm();
    const CVector cv = constraints(item.X);
    item.residual_input = cv.head(B.size()).norm();
    item.residual_diffusion = cv.tail(D.cols() * D.cols()).norm();
    if (item.residual_eigen <= tol.unremovable && item.residual_input <= tol.unremovable &&
        item.residual_diffusion <= tol.unremovable) {
      out.push_back(std::move(item));
    }
  }
  return out;
}

// ---------------------------------------------------------------- PBH tests

PbhReport deterministic_pbh(const Matrix& A, const Matrix& B, const Tolerances& tol) {
  const Index n = A.rows();
  const SystemQuad sys(A, B, Matrix::Zero(n, n), Matrix::Zero(n, B.cols()));
  PbhReport rep;
  for (auto& item : unremovable_spectra(sys, tol)) {
    if (item.lambda.real() > -tol.margin) rep.obstructions.push_back(std::move(item));
  }

  Eigen::EigenSolver<Matrix> es(A, false);
  if (es.info() != Eigen::Success) throw NumericalFailure("eigenvalues of A did not converge");
  Matrix AB(n, n + B.cols());
  AB << A, B;
  const double thr = tol.unremovable * (1.0 + AB.operatorNorm());
  for (Index i = 0; i < n; ++i) {
    const Complex mu = es.eigenvalues()(i);
    if (mu.real() <= -tol.margin) continue;
    CMatrix T(n, n + B.cols());
    T << A.cast<Complex>() - mu * CMatrix::Identity(n, n), B.cast<Complex>();
    Eigen::JacobiSVD<CMatrix> svd(T);
    if (svd.singularValues()(n - 1) <= thr) rep.vector_failures.push_back(mu);
  }

  const bool lifted_ok = rep.obstructions.empty();
  const bool vector_ok = rep.vector_failures.empty();
  if (lifted_ok != vector_ok) {
    throw InternalConsistencyError("lifted and vector PBH tests disagree");
  }
  rep.decision = lifted_ok ? Decision::kYes : Decision::kNo;
  return rep;
}

std::optional<Matrix> find_c1_representation(const Matrix& C) {
  const Index n = C.rows();
  if (C.cols() != n || n < 1) throw InvalidInput("C must be square");
  const Index N = svec_size(n);

  auto basis = [n](Index i, Index j) {
    Matrix E = Matrix::Zero(n, n);
    E(i, j) = 1.0;
    E(j, i) = 1.0;
    return E;
  };
  auto upper = [n, N](const Matrix& Y) {
    Vector v(N);
    Index k = 0;
    for (Index i = 0; i < n; ++i) {
      for (Index j = i; j < n; ++j) v(k++) = 0.5 * (Y(i, j) + Y(j, i));
    }
    return v;
  };

  Matrix S(N * N, n * n);
  Vector rhs(N * N);
  Index row = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      const Matrix E = basis(i, j);
      rhs.segment(row, N) = upper(C.transpose() * E * C);
      for (Index p = 0; p < n; ++p) {
        for (Index q = 0; q < n; ++q) {
          Matrix U = Matrix::Zero(n, n);
          U(p, q) = 1.0;
          S.block(row, p * n + q, N, 1) = upper(E * U + U.transpose() * E);
        }
      }
      row += N;
    }
  }
  const Vector c1 = S.completeOrthogonalDecomposition().solve(rhs);
  const double res = (S * c1 - rhs).norm();
  if (res > 1e-9 * std::max(1.0, rhs.norm())) return std::nullopt;
  return linalg::unvec_rows(c1, n, n);
}

PbhReport stochastic_pbh(const SystemQuad& sys, const Tolerances& tol) {
  PbhReport rep;
  if (sys.D().cwiseAbs().maxCoeff() != 0.0) {
    rep.applicable = false;
    return rep;
  }
  rep.c1 = find_c1_representation(sys.C());
  if (!rep.c1) {
    rep.applicable = false;
    return rep;
  }
  const Matrix c1 = *rep.c1;
  rep = deterministic_pbh(sys.A() + c1, sys.B(), tol);
  rep.c1 = c1;
  return rep;
}

// ------------------------------------------------------ weak stabilizability

ScalarAnalysis scalar_analysis(double a, double b, double c, double d) {
  ScalarAnalysis s;
  s.criterion = b * b + 2.0 * b * c * d - 2.0 * a * d * d;
  if (d != 0.0) {
    const double k = -(b + c * d) / (d * d);
    s.minimizing_gain = k;
    s.min_spectrum = 2.0 * (a + b * k) + (c + d * k) * (c + d * k);
  } else if (b != 0.0) {
    s.min_spectrum = -std::numeric_limits<double>::infinity();
  } else {
    s.min_spectrum = 2.0 * a + c * c;
  }
  return s;
}

WeakStabilizabilityReport is_weakly_stabilizable(const SystemQuad& sys, const Tolerances& tol) {
  const Index n = sys.n();
  const Index m = sys.m();
  WeakStabilizabilityReport rep;

  auto weakly_stable_at = [&](const Matrix& K) {
    const StabilityVerdict v =
        is_weakly_stable(build_closed_loop_operator(sys, K, LiftVariant::kDirect), tol);
    return v.verdict != Verdict::kUnstable;
  };

  // Gain-independent closed loop: the spectrum decides exactly.
  const bool decoupled = sys.B().cwiseAbs().maxCoeff() == 0.0 && sys.D().cwiseAbs().maxCoeff() == 0.0;
  if (decoupled) {
    const Matrix K = Matrix::Zero(m, n);
    rep.method = "closed-loop lift independent of the gain";
    rep.decision = weakly_stable_at(K) ? Decision::kYes : Decision::kNo;
    if (rep.decision == Decision::kYes) rep.witness_gain = K;
    return rep;
  }
  if (n == 1 && m == 1) {
    const ScalarAnalysis sa = scalar_analysis(sys.A()(0, 0), sys.B()(0, 0), sys.C()(0, 0), sys.D()(0, 0));
    rep.method = "scalar closed-form minimal spectrum";
    if (sa.min_spectrum <= tol.margin) {
      rep.decision = Decision::kYes;
      double k = 0.0;
      if (sa.minimizing_gain) {
        k = *sa.minimizing_gain;
      } else {
        // d = 0, b != 0: any k with 2(a + bk) + c^2 < 0.
        const double a = sys.A()(0, 0), b = sys.B()(0, 0), c = sys.C()(0, 0);
        k = -(2.0 * a + c * c + 2.0) / (2.0 * b);
      }
      rep.witness_gain = Matrix::Constant(1, 1, k);
    } else {
      rep.decision = Decision::kNo;
    }
    return rep;
  }

  const StabilizabilityReport strict = is_stabilizable(sys, tol);
  if (strict.decision == Decision::kYes) {
    rep.decision = Decision::kYes;
    rep.witness_gain = strict.witness_gain;
    rep.method = "mean-square stabilizable";
    return rep;
  }
  const Matrix K0 = Matrix::Zero(m, n);
  if (weakly_stable_at(K0)) {
    rep.decision = Decision::kYes;
    rep.witness_gain = K0;
    rep.method = "open loop weakly stable";
    return rep;
  }

  // Non-strict synthesis LMI relaxed by eps; each candidate gain is checked
  // with the exact spectral test.
  const lmi::LinearMatrixExpr base = stabilizability_lmi(sys.A(), sys.B(), {sys.C()}, {sys.D()});
  std::ostringstream diag;
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    lmi::LinearMatrixExpr expr;
    expr.num_vars = base.num_vars;
    const auto& F = base.blocks.front();
    expr.add_block(F - eps * Matrix::Identity(F.rows(), F.rows()));
    lmi::DecisionVariables vars;
    expr.add_block(-vars.symmetric(n));
    const lmi::SdpSolution sol = lmi::feasibility(expr, lmi::Goal::kStrictNegative);
    diag << "eps=" << eps << " margin=" << sol.margin << "; ";
    if (sol.status != lmi::SdpStatus::kFeasible) continue;
    const Matrix P = smat(Vector(sol.x.head(svec_size(n))));
    const Matrix Y = linalg::unvec_rows(sol.x.segment(svec_size(n), m * n), m, n);
    const Matrix K = P.ldlt().solve(Y.transpose()).transpose();
    if (K.allFinite() && weakly_stable_at(K)) {
      rep.decision = Decision::kYes;
      rep.witness_gain = K;
      rep.method = "relaxed non-strict synthesis LMI, verified spectrally";
      rep.diagnostic = diag.str();
      return rep;
    }
  }
  rep.method = "sufficient conditions inconclusive";
  rep.diagnostic = diag.str();
  return rep;
}

}  // namespace stochlin
