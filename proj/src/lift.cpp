#include "stochlin/lift.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include <Eigen/Eigenvalues>

#include "stochlin/linalg.hpp"

namespace stochlin {

Index svec_dimension(Index len) {
  const auto n = static_cast<Index>(std::llround((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0));
  if (len < 1 || svec_size(n) != len) {
    throw InvalidInput("vector length " + std::to_string(len) + " is not a triangular number");
  }
  return n;
}

Index svec_index(Index n, Index i, Index j) {
  if (i > j) std::swap(i, j);
  // Rows 0..i-1 contribute n, n-1, ..., n-i+1 entries.
  return i * n - i * (i - 1) / 2 + (j - i);
}

Vector svec(const Matrix& X, const Tolerances& tol) {
  const Matrix S = linalg::symmetrized(X, tol.sym_rel, "X");
  const Index n = S.rows();
  Vector v(svec_size(n));
  Index k = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) v(k++) = S(i, j);
  }
  return v;
}

namespace {

template <typename Vec, typename Mat>
Mat smat_impl(const Vec& v) {
  const Index n = svec_dimension(v.size());
  Mat X(n, n);
  Index k = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      X(i, j) = v(k);
      X(j, i) = v(k);
      ++k;
    }
  }
  return X;
}

// Unit symmetric basis element whose svec is e_k.
Matrix svec_basis(Index n, Index i, Index j) {
  Matrix E = Matrix::Zero(n, n);
  E(i, j) = 1.0;
  E(j, i) = 1.0;
  return E;
}

// Upper triangle of a symmetric result, no symmetry check (the operators we
// lift map symmetric matrices to symmetric matrices exactly up to rounding).
Vector upper(const Matrix& Y) {
  const Index n = Y.rows();
  Vector v(svec_size(n));
  Index k = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) v(k++) = 0.5 * (Y(i, j) + Y(j, i));
  }
  return v;
}

Matrix lift_map(Index n, const std::function<Matrix(const Matrix&)>& op) {
  const Index N = svec_size(n);
  Matrix M(N, N);
  Index k = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) M.col(k++) = upper(op(svec_basis(n, i, j)));
  }
  return M;
}

void check_square(const Matrix& M, Index n, const std::string& name) {
  if (M.rows() != n || M.cols() != n) {
    throw InvalidInput(name + " must be " + std::to_string(n) + "x" + std::to_string(n));
  }
}

LiftedOperator make_operator(const Matrix& F, std::vector<Matrix> Gs, OperatorKind kind) {
  LiftedOperator L;
  L.kind = kind;
  L.drift = F;
  L.diffusions = std::move(Gs);
  L.M = lift_map(F.rows(), [&](const Matrix& X) { return apply_operator(L, X); });
  return L;
}

}  // namespace

Matrix smat(const Vector& v) { return smat_impl<Vector, Matrix>(v); }
CMatrix smat(const CVector& v) { return smat_impl<CVector, CMatrix>(v); }

Matrix apply_operator(const LiftedOperator& L, const Matrix& X) {
  const Matrix& F = L.drift;
  Matrix Y;
  if (L.adjoint()) {
    Y = X * F + F.transpose() * X;
    for (const auto& G : L.diffusions) Y += G.transpose() * X * G;
  } else {
    Y = F * X + X * F.transpose();
    for (const auto& G : L.diffusions) Y += G * X * G.transpose();
  }
  return Y;
}

LiftedOperator build_closed_loop_operator(const SystemQuad& sys, const Matrix& K,
                                          LiftVariant variant) {
  const Matrix F = sys.closed_drift(K);
  const Matrix G = sys.closed_diffusion(K);
  const bool adj = variant == LiftVariant::kAdjoint;
  return make_operator(F, {G},
                       adj ? OperatorKind::kClosedLoopAdjoint : OperatorKind::kClosedLoop);
}

LiftedOperator build_drift_operator(const Matrix& A, const std::vector<Matrix>& Cs,
                                    LiftVariant variant) {
  const Index n = A.rows();
  if (n < 1) throw InvalidInput("A must be non-empty");
  check_square(A, n, "A");
  for (std::size_t i = 0; i < Cs.size(); ++i) check_square(Cs[i], n, "C[" + std::to_string(i) + "]");
  const bool adj = variant == LiftVariant::kAdjoint;
  return make_operator(A, Cs, adj ? OperatorKind::kDriftAdjoint : OperatorKind::kDrift);
}

KronOperator build_kron_operator(const SystemQuad& sys, const Matrix& K) {
  KronOperator op;
  op.drift = sys.closed_drift(K);
  op.diffusion = sys.closed_diffusion(K);
  const Matrix I = Matrix::Identity(sys.n(), sys.n());
  op.M0 = linalg::kron(op.drift, I) + linalg::kron(I, op.drift) +
          linalg::kron(op.diffusion, op.diffusion);
  return op;
}

OutputLift build_output_lift(const Matrix& Q, Index n) {
  if (Q.cols() != n) {
    throw InvalidInput("output map must have " + std::to_string(n) + " columns");
  }
  OutputLift out;
  out.n = n;
  out.outputs = Q.rows();
  out.M = Matrix::Zero(Q.rows() * n, svec_size(n));
  Index k = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      out.M.col(k++) = linalg::vec_rows(Q * svec_basis(n, i, j));
    }
  }
  return out;
}

std::vector<ExtraSpectrumItem> classify_extra_spectrum(const LiftedOperator& L,
                                                       const KronOperator& L0,
                                                       const Tolerances& tol) {
  const bool closed_loop =
      L.kind == OperatorKind::kClosedLoop || L.kind == OperatorKind::kClosedLoopAdjoint;
  auto same = [](const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           (a - b).norm() <= 1e-12 * (1.0 + a.norm());
  };
  if (!closed_loop || L.diffusions.size() != 1 || !same(L.drift, L0.drift) ||
      !same(L.diffusions.front(), L0.diffusion)) {
    throw InvalidInput("lifted operators were not built from the same (system, gain)");
  }
  const Index n = L.n();

  Eigen::EigenSolver<Matrix> es0(L0.M0, false);
  Eigen::EigenSolver<Matrix> es(L.M, false);
  if (es0.info() != Eigen::Success || es.info() != Eigen::Success) {
    throw NumericalFailure("eigenvalue iteration did not converge");
  }
  std::vector<Complex> full(es0.eigenvalues().data(),
                            es0.eigenvalues().data() + es0.eigenvalues().size());
  std::sort(full.begin(), full.end(), [](Complex a, Complex b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  std::vector<Complex> sym(es.eigenvalues().data(),
                           es.eigenvalues().data() + es.eigenvalues().size());
  std::vector<bool> used(sym.size(), false);

  double radius = 0.0;
  for (auto z : full) radius = std::max(radius, std::abs(z));
  const double eig_tol = tol.eig_rel * (1.0 + radius);

  // Skew-symmetric subspace: columns vec(e_i e_j' - e_j e_i'), i < j.
  const Index ns = n * (n - 1) / 2;
  Matrix S = Matrix::Zero(n * n, ns);
  Index k = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      S(i * n + j, k) = 1.0;
      S(j * n + i, k) = -1.0;
      ++k;
    }
  }
  Matrix Kskew;
  Eigen::EigenSolver<Matrix> es_skew;
  if (ns > 0) {
    Kskew = 0.5 * S.transpose() * L0.M0 * S;
    es_skew.compute(Kskew, true);
  }

  std::vector<ExtraSpectrumItem> out;
  for (auto lambda : full) {
    ExtraSpectrumItem item;
    item.lambda = lambda;
    for (std::size_t s = 0; s < sym.size(); ++s) {
      if (!used[s] && std::abs(sym[s] - lambda) <= eig_tol) {
        used[s] = true;
        item.in_symmetric_spectrum = true;
        break;
      }
    }
    if (!item.in_symmetric_spectrum && ns > 0) {
      Index best = 0;
      for (Index s = 1; s < ns; ++s) {
        if (std::abs(es_skew.eigenvalues()(s) - lambda) <
            std::abs(es_skew.eigenvalues()(best) - lambda)) {
          best = s;
        }
      }
      const CVector v = S.cast<Complex>() * es_skew.eigenvectors().col(best);
      CMatrix X(n, n);
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) X(i, j) = v(i * n + j);
      }
      X /= X.norm();
      const CVector x = v / v.norm();
      item.witness_residual = (L0.M0.cast<Complex>() * x - lambda * x).norm();
      if (item.witness_residual <= eig_tol * (1.0 + L0.M0.norm()) &&
          (X + X.transpose()).norm() <= 1e-12) {
        item.skew_witness = X;
      }
    }
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace stochlin
