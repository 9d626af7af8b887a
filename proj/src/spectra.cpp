#include "stochlin/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "stochlin/linalg.hpp"
#include "stochlin/stability.hpp"

namespace stochlin {

double Spectrum::abscissa() const {
  double a = -std::numeric_limits<double>::infinity();
  for (auto z : eigenvalues) a = std::max(a, z.real());
  return a;
}

double Spectrum::radius() const {
  double r = 0.0;
  for (auto z : eigenvalues) r = std::max(r, std::abs(z));
  return r;
}

bool Spectrum::contains(Complex z) const {
  return std::any_of(eigenvalues.begin(), eigenvalues.end(),
                     [&](Complex e) { return std::abs(e - z) <= tolerance; });
}

namespace {

int find_root(std::vector<int>& parent, int i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

Spectrum spectrum(const Matrix& M, const Tolerances& tol) {
  if (M.rows() != M.cols()) throw InvalidInput("spectrum needs a square matrix");
  if (!M.allFinite()) throw InvalidInput("matrix has non-finite entries");
  Spectrum s;
  const Index N = M.rows();
  if (N == 0) return s;

  Eigen::EigenSolver<Matrix> es(M, false);
  if (es.info() != Eigen::Success) {
    throw NumericalFailure("real Schur iteration did not converge");
  }
  s.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + N);
  std::sort(s.eigenvalues.begin(), s.eigenvalues.end(), [](Complex a, Complex b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  s.tolerance = tol.eig_rel * (1.0 + s.radius());

  // Single-linkage clustering at the eigenvalue tolerance.
  std::vector<int> parent(N);
  std::iota(parent.begin(), parent.end(), 0);
  for (Index i = 0; i < N; ++i) {
    for (Index j = i + 1; j < N; ++j) {
      if (std::abs(s.eigenvalues[i] - s.eigenvalues[j]) <= s.tolerance) {
        parent[find_root(parent, static_cast<int>(i))] = find_root(parent, static_cast<int>(j));
      }
    }
  }
  std::vector<std::vector<Complex>> clusters;
  std::vector<int> cluster_of(N, -1);
  for (Index i = 0; i < N; ++i) {
    const int r = find_root(parent, static_cast<int>(i));
    if (cluster_of[r] < 0) {
      cluster_of[r] = static_cast<int>(clusters.size());
      clusters.emplace_back();
    }
    clusters[cluster_of[r]].push_back(s.eigenvalues[i]);
  }

  const double rank_tol = linalg::rank_threshold(M);
  const CMatrix Mc = M.cast<Complex>();
  for (const auto& cl : clusters) {
    EigenGroup g;
    Complex mean(0.0, 0.0);
    for (auto z : cl) mean += z;
    mean /= static_cast<double>(cl.size());
    double spread = 0.0;
    for (auto z : cl) spread = std::max(spread, std::abs(z - mean));
    g.value = mean;
    g.algebraic = static_cast<int>(cl.size());
    if (g.algebraic == 1) {
      g.geometric = 1;
    } else {
      // Singular values of M - λI at the size of the cluster spread come
      // from rounding; a genuine Jordan coupling is O(1) relative to that.
      const CMatrix shifted = Mc - mean * CMatrix::Identity(N, N);
      Eigen::JacobiSVD<CMatrix> svd(shifted);
      const double thr = std::max(rank_tol, 10.0 * spread);
      int nullity = 0;
      for (Index i = 0; i < svd.singularValues().size(); ++i) {
        if (svd.singularValues()(i) <= thr) ++nullity;
      }
      g.geometric = std::clamp(nullity, 1, g.algebraic);
    }
    s.groups.push_back(g);
  }
  return s;
}

Spectrum spectrum(const LiftedOperator& L, const Tolerances& tol) { return spectrum(L.M, tol); }
Spectrum spectrum(const KronOperator& L0, const Tolerances& tol) { return spectrum(L0.M0, tol); }

double spectral_abscissa(const Matrix& M) {
  if (M.rows() != M.cols()) throw InvalidInput("spectral abscissa needs a square matrix");
  return linalg::eigen_abscissa(M);
}

double spectral_abscissa(const LiftedOperator& L) { return spectral_abscissa(L.M); }

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kStable:
      return "stable";
    case Verdict::kWeaklyStable:
      return "weakly-stable";
    case Verdict::kUnstable:
      return "unstable";
  }
  return "unknown";
}

StabilityVerdict is_weakly_stable(const Matrix& M, const Tolerances& tol) {
  const Spectrum s = spectrum(M, tol);
  StabilityVerdict v;
  v.abscissa = s.abscissa();
  bool all_semisimple = true;
  for (const auto& g : s.groups) {
    if (std::abs(g.value.real()) <= tol.margin) {
      v.critical.push_back({g.value, g.algebraic, g.geometric});
      all_semisimple = all_semisimple && g.algebraic == g.geometric;
    }
  }
  if (v.abscissa < -tol.margin) {
    v.verdict = Verdict::kStable;
  } else if (v.abscissa <= tol.margin && all_semisimple) {
    v.verdict = Verdict::kWeaklyStable;
  } else {
    v.verdict = Verdict::kUnstable;
  }
  return v;
}

StabilityVerdict is_weakly_stable(const LiftedOperator& L, const Tolerances& tol) {
  return is_weakly_stable(L.M, tol);
}

StabilityVerdict is_ms_stable(const Matrix& A, const std::vector<Matrix>& Cs,
                              const Tolerances& tol) {
  const LiftedOperator L = build_drift_operator(A, Cs, LiftVariant::kDirect);
  StabilityVerdict v = is_weakly_stable(L, tol);
  const bool spectral_stable = v.verdict == Verdict::kStable;

  GenLyapProblem prob{A, Cs, Matrix::Identity(A.rows(), A.rows())};
  const GenLyapSolution sol = solve_gen_lyapunov(prob, tol);
  const bool lyapunov_stable =
      !sol.singular && linalg::is_positive_definite(*sol.P, tol.pd_rel);

  // Inside a band around the boundary the Lyapunov route is ill-conditioned;
  // only a clear disagreement is reported.
  const bool clear = std::abs(v.abscissa) > 10.0 * tol.margin * (1.0 + L.M.norm());
  if (clear && spectral_stable != lyapunov_stable) {
    std::ostringstream msg;
    msg << "mean-square stability routes disagree (abscissa " << v.abscissa
        << ", Lyapunov P " << (lyapunov_stable ? "positive" : "not positive") << ")";
    throw InternalConsistencyError(msg.str());
  }
  return v;
}

}  // namespace stochlin
