#include "stochlin/observability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "stochlin/lift.hpp"
#include "stochlin/linalg.hpp"
#include "stochlin/spectra.hpp"

namespace stochlin {

namespace {

void check_output_system(const OutputSystem& osys) {
  const Index n = osys.A.rows();
  if (n < 1 || osys.A.cols() != n) throw InvalidInput("A must be square and non-empty");
  for (std::size_t i = 0; i < osys.Cs.size(); ++i) {
    if (osys.Cs[i].rows() != n || osys.Cs[i].cols() != n) {
      throw InvalidInput("C[" + std::to_string(i) + "] must be " + std::to_string(n) + "x" +
                         std::to_string(n));
    }
  }
  if (osys.Q.cols() != n) {
    throw InvalidInput("Q must have " + std::to_string(n) + " columns");
  }
  if (!osys.A.allFinite() || !osys.Q.allFinite()) throw InvalidInput("non-finite system data");
}

// Orthonormal basis of span([V, W]) given orthonormal V.
Matrix extend_basis(const Matrix& V, const Matrix& W, double thr) {
  Matrix R = W;
  if (V.cols() > 0) {
    R -= V * (V.transpose() * R);
    R -= V * (V.transpose() * R);  // second pass keeps orthogonality
  }
  if (R.cols() == 0) return V;
  Eigen::JacobiSVD<Matrix> svd(R, Eigen::ComputeThinU);
  Index r = 0;
  for (Index i = 0; i < svd.singularValues().size(); ++i) {
    if (svd.singularValues()(i) > thr) ++r;
  }
  Matrix out(V.rows(), V.cols() + r);
  out << V, svd.matrixU().leftCols(r);
  return out;
}

// Orthonormal basis of the orthogonal complement of range(V) in R^N.
Matrix complement(const Matrix& V, Index N) {
  if (V.cols() == 0) return Matrix::Identity(N, N);
  Eigen::JacobiSVD<Matrix> svd(V, Eigen::ComputeFullU);
  return svd.matrixU().rightCols(N - V.cols());
}

}  // namespace

ObservabilityReport is_exactly_observable(const OutputSystem& osys, const Tolerances& tol) {
  check_output_system(osys);
  const Index n = osys.A.rows();
  const Index N = svec_size(n);
  const LiftedOperator L = build_drift_operator(osys.A, osys.Cs, LiftVariant::kDirect);
  const Matrix H = build_output_lift(osys.Q, n).M;

  ObservabilityReport rep;
  rep.lifted_dimension = N;
  const double scale = std::max({1.0, L.M.operatorNorm(), H.size() ? H.operatorNorm() : 0.0});
  const double thr = static_cast<double>(N) * std::numeric_limits<double>::epsilon() * scale * 10.0;

  // Observable subspace: smallest M'-invariant subspace containing range(H').
  Matrix V = extend_basis(Matrix(N, 0), H.transpose(), thr);
  for (Index it = 0; it < N && V.cols() < N; ++it) {
    const Index before = V.cols();
    V = extend_basis(V, L.M.transpose() * V, thr);
    if (V.cols() == before) break;
  }
  rep.rank = V.cols();
  rep.observable = rep.rank == N;

  if (!rep.observable) {
    // range(V)^perp is M-invariant and annihilated by H; any eigenvector of
    // the restriction is a witness.
    const Matrix U = complement(V, N);
    const Matrix R = U.transpose() * L.M * U;
    Eigen::EigenSolver<Matrix> es(R, true);
    if (es.info() != Eigen::Success) throw NumericalFailure("eigenvalue iteration did not converge");
    Index best = 0;
    for (Index i = 1; i < es.eigenvalues().size(); ++i) {
      if (es.eigenvalues()(i).real() > es.eigenvalues()(best).real()) best = i;
    }
    const Complex lambda = es.eigenvalues()(best);
    CVector x = U.cast<Complex>() * es.eigenvectors().col(best);
    Index imax = 0;
    x.cwiseAbs().maxCoeff(&imax);
    x *= std::conj(x(imax)) / std::abs(x(imax));
    CMatrix X = smat(x);
    X /= X.norm();
    const CMatrix Ac = osys.A.cast<Complex>();
    CMatrix res = Ac * X + X * Ac.transpose() - lambda * X;
    for (const auto& C : osys.Cs) res += C.cast<Complex>() * X * C.transpose().cast<Complex>();
    rep.witness_residual = res.norm() + (osys.Q.cast<Complex>() * X).norm();
    rep.lambda = lambda;
    rep.witness = X;
  }

  // PBH on the lifted pair: rank [M - λI; H] = N for every eigenvalue λ.
  const Spectrum s = spectrum(L.M, tol);
  const double pbh_thr = tol.eig_rel * (1.0 + scale);
  bool pbh_observable = true;
  for (const auto& g : s.groups) {
    CMatrix T(N + H.rows(), N);
    T << L.M.cast<Complex>() - g.value * CMatrix::Identity(N, N), H.cast<Complex>();
    Eigen::JacobiSVD<CMatrix> svd(T);
    if (svd.singularValues()(N - 1) <= pbh_thr) pbh_observable = false;
  }
  rep.pbh_agrees = pbh_observable == rep.observable;
  return rep;
}

int liu_saturation_depth(Index n) { return static_cast<int>(svec_size(n)); }

LiuRankReport liu_rank_criterion(const OutputSystem& osys, int depth) {
  check_output_system(osys);
  if (osys.Cs.size() != 1) {
    throw NotSupported("the word-rank test is defined for exactly one noise channel");
  }
  if (depth < 0 || depth > 20) throw InvalidInput("depth must lie in [0, 20]");
  const Matrix At = osys.A.transpose();
  const Matrix Ct = osys.Cs.front().transpose();

  std::vector<Matrix> level{osys.Q.transpose()};
  std::vector<Matrix> all = level;
  for (int d = 1; d <= depth; ++d) {
    std::vector<Matrix> next;
    next.reserve(2 * level.size());
    for (const auto& W : level) {
      next.push_back(At * W);
      next.push_back(Ct * W);
    }
    all.insert(all.end(), next.begin(), next.end());
    level = std::move(next);
  }
  const Index n = osys.A.rows();
  const Index l = osys.Q.rows();
  LiuRankReport rep;
  rep.depth = depth;
  rep.P0.resize(n, static_cast<Index>(all.size()) * l);
  for (std::size_t k = 0; k < all.size(); ++k) rep.P0.middleCols(static_cast<Index>(k) * l, l) = all[k];
  rep.rank = rep.P0.size() ? linalg::numerical_rank(rep.P0) : 0;
  rep.observable = rep.rank == n;
  return rep;
}

DetectabilityReport is_stochastically_detectable(const OutputSystem& osys, const Tolerances& tol) {
  check_output_system(osys);
  const Index n = osys.A.rows();
  const Matrix Q = osys.Q.rows() > 0 ? osys.Q : Matrix::Zero(1, n);
  std::vector<Matrix> Cts;
  std::vector<Matrix> Ds;
  for (const auto& C : osys.Cs) {
    Cts.push_back(C.transpose());
    Ds.push_back(Matrix::Zero(n, Q.rows()));
  }
  DetectabilityReport rep;
  rep.dual = is_stabilizable(osys.A.transpose(), Q.transpose(), Cts, Ds, tol);
  rep.decision = rep.dual.decision;
  if (rep.dual.witness_gain) {
    Matrix H = rep.dual.witness_gain->transpose();
    if (osys.Q.rows() == 0) H = Matrix::Zero(n, 0);
    rep.H = H;
  }
  return rep;
}

DetectabilitySpectrumReport detectability_spectrum_check(const OutputSystem& osys,
                                                         const Tolerances& tol) {
  check_output_system(osys);
  const Index n = osys.A.rows();
  const Index N = svec_size(n);
  const LiftedOperator L = build_drift_operator(osys.A, osys.Cs, LiftVariant::kDirect);
  const Matrix H = build_output_lift(osys.Q, n).M;
  const Spectrum s = spectrum(L.M, tol);

  DetectabilitySpectrumReport rep;
  for (const auto& g : s.groups) {
    if (g.value.real() <= -tol.margin) continue;
    CMatrix T(N + H.rows(), N);
    T << L.M.cast<Complex>() - g.value * CMatrix::Identity(N, N), H.cast<Complex>();
    const CMatrix ns = linalg::null_space(T, 0.5 * tol.unremovable);
    if (ns.cols() == 0) continue;
    CVector x = ns.col(0);
    Index imax = 0;
    x.cwiseAbs().maxCoeff(&imax);
    x *= std::conj(x(imax)) / std::abs(x(imax));
    CMatrix X = smat(x);
    rep.pass = false;
    rep.lambda = g.value;
    rep.witness = X / X.norm();
    break;
  }
  if (osys.Cs.size() == 1) {
    rep.conclusive = find_c1_representation(osys.Cs.front().transpose()).has_value();
  } else if (osys.Cs.empty()) {
    rep.conclusive = true;
  }
  return rep;
}

InvarianceReport check_observability_invariance(const Matrix& A, const Matrix& C, const Matrix& Q,
                                                const Matrix& D, const Matrix& G1, const Matrix& G2,
                                                const Tolerances& tol) {
  const Index n = A.rows();
  if (D.cols() != n) throw InvalidInput("D must have " + std::to_string(n) + " columns");
  if (G1.rows() != n || G1.cols() != D.rows()) throw InvalidInput("G1 must be n x rows(D)");
  if (G2.rows() != n || G2.cols() != D.rows()) throw InvalidInput("G2 must be n x rows(D)");
  if (Q.cols() != n) throw InvalidInput("Q must have " + std::to_string(n) + " columns");

  InvarianceReport rep;
  const Matrix S = Q.transpose() * Q + D.transpose() * D;
  rep.F = linalg::psd_sqrt(S, 1e-10 * (1.0 + S.norm()));
  rep.original_observable = is_exactly_observable({A, {C}, Q}, tol).observable;
  rep.transformed_observable = is_exactly_observable({A + G1 * D, {C + G2 * D}, rep.F}, tol).observable;
  rep.preserved = !rep.original_observable || rep.transformed_observable;
  return rep;
}

}  // namespace stochlin
