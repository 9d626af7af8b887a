#include "stochlin/robust.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "stochlin/lift.hpp"
#include "stochlin/linalg.hpp"

namespace stochlin {

namespace {

Matrix zeros_if_empty(const Matrix& M, Index rows, Index cols) {
  return M.size() == 0 ? Matrix::Zero(rows, cols) : M;
}

// One S-procedure term H F Ebar + Ebar' F' H' of a structured uncertainty.
struct UncTerm {
  Matrix H;
  lmi::AffineMatrix Ebar;
};

// Embeds each term with its own multiplier; returns the enlarged block.
lmi::AffineMatrix embed_terms(lmi::AffineMatrix Y, const std::vector<UncTerm>& terms,
                              const std::vector<Index>& eps_vars) {
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const Index pad = Y.rows() - terms[t].H.rows();
    Matrix H = Matrix::Zero(Y.rows(), terms[t].H.cols());
    H.topRows(terms[t].H.rows()) = terms[t].H;
    lmi::AffineMatrix E = terms[t].Ebar;
    if (pad > 0) {
      Matrix Lc = Matrix::Zero(E.cols(), E.cols() + pad);
      Lc.leftCols(E.cols()).setIdentity();
      E = E * Lc;
    }
    Y = lmi::s_procedure_embed(Y, H, E, eps_vars[t]);
  }
  return Y;
}

// Closed-loop generator of V(x) = x'Px for a fixed F.
Matrix generator(const SystemQuad& sys, const UncertaintyModel& u, const Matrix& K, const Matrix& P,
                 const Matrix& F) {
  const Matrix EF = u.E * F;
  const Matrix Acl = sys.closed_drift(K) + EF * (u.G1 + u.G2 * K);
  const Matrix Ccl = sys.closed_diffusion(K) + EF * u.G3;
  const Matrix G = P * Acl + Acl.transpose() * P + Ccl.transpose() * P * Ccl;
  return 0.5 * (G + G.transpose());
}

Matrix random_orthogonal(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Matrix Z(n, n);
  for (Index i = 0; i < Z.size(); ++i) Z.data()[i] = nd(rng);
  Eigen::HouseholderQR<Matrix> qr(Z);
  Matrix Q = qr.householderQ();
  const Matrix R = qr.matrixQR();
  for (Index i = 0; i < n; ++i) {
    if (R(i, i) < 0.0) Q.col(i) *= -1.0;
  }
  return Q;
}

// Rank-one F maximizing x'(generator)x for the drift/input part at x.
std::optional<Matrix> rank_one_worst(const UncertaintyModel& u, const Matrix& K, const Matrix& P,
                                     const Vector& x) {
  const Vector a = u.E.transpose() * P * x;
  const Vector b = (u.G1 + u.G2 * K) * x;
  if (a.norm() == 0.0 || b.norm() == 0.0) return std::nullopt;
  return Matrix((a / a.norm()) * (b / b.norm()).transpose());
}

}  // namespace

bool UncertaintyModel::extended() const {
  return (G2.size() > 0 && G2.norm() > 0.0) || (G3.size() > 0 && G3.norm() > 0.0);
}

UncertaintyModel UncertaintyModel::normalized(const SystemQuad& sys) const {
  const Index n = sys.n();
  const Index m = sys.m();
  if (E.rows() != n) throw InvalidInput("E must have " + std::to_string(n) + " rows");
  if (G1.cols() != n) throw InvalidInput("G must have " + std::to_string(n) + " columns");
  const Index k = E.cols();
  const Index j = G1.rows();
  if (k < 1 || j < 1) throw InvalidInput("E and G must be non-empty");
  UncertaintyModel out{E, G1, zeros_if_empty(G2, j, m), zeros_if_empty(G3, j, n)};
  if (out.G2.rows() != j || out.G2.cols() != m) {
    throw InvalidInput("G2 must be " + std::to_string(j) + "x" + std::to_string(m));
  }
  if (out.G3.rows() != j || out.G3.cols() != n) {
    throw InvalidInput("G3 must be " + std::to_string(j) + "x" + std::to_string(n));
  }
  if (!E.allFinite() || !G1.allFinite() || !out.G2.allFinite() || !out.G3.allFinite()) {
    throw InvalidInput("non-finite uncertainty data");
  }
  return out;
}

const char* to_string(QsForm f) {
  switch (f) {
    case QsForm::kPrimal: return "primal";
    case QsForm::kThreeBlock: return "three-block";
    case QsForm::kThreeBlockWithEE: return "three-block-with-EE";
  }
  return "?";
}

const char* to_string(QsVerdict v) {
  switch (v) {
    case QsVerdict::kCertified: return "certified";
    case QsVerdict::kRefuted: return "refuted";
    case QsVerdict::kInconclusive: return "inconclusive";
  }
  return "?";
}

Matrix sample_contraction(Index rows, Index cols, std::uint64_t seed) {
  std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
  std::mt19937_64 rng(ss);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const Matrix U = random_orthogonal(rows, rng);
  const Matrix V = random_orthogonal(cols, rng);
  Matrix S = Matrix::Zero(rows, cols);
  for (Index i = 0; i < std::min(rows, cols); ++i) S(i, i) = ud(rng);
  return U * S * V.transpose();
}

QsLmi assemble_qs_lmi(const SystemQuad& sys, const UncertaintyModel& unc_in, QsForm form) {
  const UncertaintyModel u = unc_in.normalized(sys);
  const Index n = sys.n();
  const Index m = sys.m();
  const Index j = u.j();
  const Matrix& A = sys.A();
  const Matrix& B = sys.B();
  const Matrix& C = sys.C();
  const Matrix& D = sys.D();

  lmi::DecisionVariables vars;
  QsLmi out;
  const lmi::AffineMatrix X = vars.symmetric(n, "X");
  const lmi::AffineMatrix Y = vars.full(m, n, "Y");
  out.x_offset = vars.offset("X");
  out.y_offset = vars.offset("Y");
  const lmi::AffineMatrix BY = B * Y;
  lmi::AffineMatrix top = A * X + X * A.transpose() + BY + BY.transpose();
  const lmi::AffineMatrix GX = u.G1 * X + u.G2 * Y;

  if (form == QsForm::kPrimal) {
    vars.scalar("eps");
    out.eps_offset = vars.offset("eps");
    const lmi::AffineMatrix CXDY = C * X + D * Y;
    const lmi::AffineMatrix core =
        lmi::assemble({{top, CXDY.transpose()}, {lmi::AffineMatrix(), -X}});
    Matrix H = Matrix::Zero(2 * n, u.k());
    H.topRows(n) = u.E;
    Matrix Lc = Matrix::Zero(n, 2 * n);
    Lc.leftCols(n).setIdentity();
    out.expr.num_vars = vars.size();
    out.expr.add_block(lmi::s_procedure_embed(core, H, GX * Lc, out.eps_offset));
    out.expr.add_block(-X);
    return out;
  }

  // Three-block form with constant corner.
  const lmi::AffineMatrix DY = D * Y;
  top += C * X * C.transpose() + C * DY.transpose() + DY * C.transpose();
  if (form == QsForm::kThreeBlockWithEE) top += lmi::AffineMatrix(Matrix(u.E * u.E.transpose()));
  out.expr.num_vars = vars.size();
  out.expr.add_block(lmi::assemble({{top, DY, GX.transpose()},
                                    {lmi::AffineMatrix(), -X, lmi::AffineMatrix::zero(n, j)},
                                    {lmi::AffineMatrix(), lmi::AffineMatrix(),
                                     lmi::AffineMatrix(Matrix(-Matrix::Identity(j, j)))}}));
  out.expr.add_block(-X);
  return out;
}

namespace {

struct DecayLmi {
  bool solved = false;
  double alpha = 0.0;
  double eps1 = 0.0;
  std::string diagnostic;
};

// Largest alpha with T G(F) T <= -alpha I for all F, G the generator of x'Px,
// through the S-procedure (exact without diffusion uncertainty). R = P^1/2.
DecayLmi max_decay(const UncertaintyModel& u, const Matrix& P, const Matrix& R, const Matrix& T,
                   const Matrix& Acl, const Matrix& Ccl, const Matrix& W, double box) {
  const Index n = P.rows();
  const bool diffusion_unc = u.G3.norm() > 0.0;
  lmi::DecisionVariables vars;
  std::vector<Index> eps_vars{vars.size()};
  vars.scalar("e1");
  if (diffusion_unc) {
    eps_vars.push_back(vars.size());
    vars.scalar("e2");
  }
  const Index alpha_var = vars.size();
  vars.scalar("alpha");

  // [[T(P Acl + Acl'P)T + alpha I, (R Ccl T)'], [R Ccl T, -I]]
  const Matrix RCT = R * Ccl * T;
  Matrix lead = Matrix::Zero(2 * n, 2 * n);
  lead.topLeftCorner(n, n) = T * (P * Acl + Acl.transpose() * P) * T;
  lead.topRightCorner(n, n) = RCT.transpose();
  lead.bottomLeftCorner(n, n) = RCT;
  lead.bottomRightCorner(n, n) = -Matrix::Identity(n, n);
  lmi::AffineMatrix Y(0.5 * (lead + lead.transpose()));
  Matrix Iup = Matrix::Zero(2 * n, 2 * n);
  Iup.topLeftCorner(n, n).setIdentity();
  Y.add_term(alpha_var, Iup);

  std::vector<UncTerm> terms;
  {
    Matrix H = Matrix::Zero(2 * n, u.k());
    H.topRows(n) = T * P * u.E;
    Matrix Eb = Matrix::Zero(u.j(), 2 * n);
    Eb.leftCols(n) = W * T;
    terms.push_back({H, lmi::AffineMatrix(Eb)});
  }
  if (diffusion_unc) {
    Matrix H = Matrix::Zero(2 * n, u.k());
    H.bottomRows(n) = R * u.E;
    Matrix Eb = Matrix::Zero(u.j(), 2 * n);
    Eb.leftCols(n) = u.G3 * T;
    terms.push_back({H, lmi::AffineMatrix(Eb)});
  }
  lmi::LinearMatrixExpr expr;
  expr.num_vars = vars.size();
  expr.add_block(embed_terms(Y, terms, eps_vars));

  lmi::SdpOptions opts;
  opts.box = box;
  Vector c = Vector::Zero(vars.size());
  c(alpha_var) = 1.0;
  const lmi::SdpSolution sol = lmi::maximize(c, expr, opts);
  DecayLmi out;
  out.solved = sol.status == lmi::SdpStatus::kFeasible || sol.status == lmi::SdpStatus::kUnbounded;
  out.diagnostic = std::string(lmi::to_string(sol.status)) + ": " + sol.diagnostic;
  if (out.solved) {
    out.alpha = sol.x(alpha_var);
    out.eps1 = sol.x(eps_vars[0]);
  }
  return out;
}

}  // namespace

QsVerification verify_quadratic_stability(const SystemQuad& sys, const UncertaintyModel& unc_in,
                                           const Matrix& K, const Matrix& P_in, std::uint64_t seed,
                                           int samples) {
  const UncertaintyModel u = unc_in.normalized(sys);
  sys.check_gain(K);
  const Index n = sys.n();
  if (P_in.rows() != n || P_in.cols() != n) throw InvalidInput("P must be n x n");
  const Matrix Ps = linalg::symmetrized(P_in, 1e-9, "P");
  if (!linalg::is_positive_definite(Ps, 1e-12)) throw InvalidInput("P must be positive definite");
  // The test is invariant under scaling P; work with unit norm.
  const double pnorm = linalg::max_eigenvalue(Ps);
  const Matrix P = Ps / pnorm;
  Eigen::SelfAdjointEigenSolver<Matrix> pes(P);
  const Vector pe = pes.eigenvalues();
  const Matrix R = pes.eigenvectors() * pe.cwiseSqrt().asDiagonal() * pes.eigenvectors().transpose();
  const Matrix Rinv =
      pes.eigenvectors() * pe.cwiseSqrt().cwiseInverse().asDiagonal() * pes.eigenvectors().transpose();

  const Matrix Acl = sys.closed_drift(K);
  const Matrix Ccl = sys.closed_diffusion(K);
  const Matrix W = u.G1 + u.G2 * K;
  const double scale = 1.0 + Acl.norm() + Ccl.norm() * Ccl.norm() +
                       u.E.norm() * (W.norm() + u.G3.norm());

  // Verdict in P^-1/2 coordinates, where the test reads G(F) <= -alpha P.
  const DecayLmi rel = max_decay(u, P, R, Rinv, Acl, Ccl, W, 1e3 * scale / pe.minCoeff());
  // Decay rate in the |x|^2 form.
  const DecayLmi abs = max_decay(u, P, R, Matrix::Identity(n, n), Acl, Ccl, W, 1e3 * scale);

  QsVerification rep;
  rep.samples = samples;
  rep.diagnostic = rel.diagnostic;
  const bool certified = rel.solved && rel.alpha > 1e-9 * scale;
  if (certified) rep.alpha = std::max(rel.alpha * pe.minCoeff(), abs.solved ? abs.alpha : 0.0);
  else if (abs.solved) rep.alpha = abs.alpha;

  // Sampling never certifies; it only looks for a violating F.
  double worst = -std::numeric_limits<double>::infinity();
  std::optional<Matrix> worst_F;
  const auto consider = [&](const Matrix& F) {
    const double lam = linalg::max_eigenvalue(generator(sys, u, K, P, F));
    if (lam > worst) {
      worst = lam;
      worst_F = F;
    }
  };
  consider(Matrix::Zero(u.k(), u.j()));
  for (int s = 0; s < samples; ++s) {
    consider(sample_contraction(u.k(), u.j(), seed * 1000003ULL + static_cast<std::uint64_t>(s)));
  }
  if (!certified && rel.solved) {
    // Worst-case directions at the optimal multiplier.
    const double e1 = std::max(rel.eps1, 1e-300);
    const Matrix TPE = Rinv * P * u.E;
    const Matrix WT = W * Rinv;
    Matrix S = Rinv * (P * Acl + Acl.transpose() * P + Ccl.transpose() * P * Ccl) * Rinv +
               e1 * TPE * TPE.transpose() + WT.transpose() * WT / e1;
    S = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    for (Index i = n - 1; i >= 0; --i) {
      const auto F = rank_one_worst(u, K, P, Rinv * es.eigenvectors().col(i));
      if (F) consider(*F);
    }
  }
  rep.worst_sampled = worst * pnorm;
  rep.alpha *= pnorm;

  if (certified) {
    if (worst > 0.0) {
      std::ostringstream msg;
      msg << "certified alpha " << rep.alpha << " contradicted by a sampled F with generator eigenvalue "
          << rep.worst_sampled;
      throw InternalConsistencyError(msg.str());
    }
    rep.verdict = QsVerdict::kCertified;
  } else if (worst >= -1e-12 * scale) {
    rep.verdict = QsVerdict::kRefuted;
    rep.witness_F = worst_F;
  } else {
    rep.verdict = QsVerdict::kInconclusive;
  }
  return rep;
}

namespace {

QsSynthesis synthesize_impl(const SystemQuad& sys, const UncertaintyModel& u, std::uint64_t seed) {
  const Index n = sys.n();
  const Index m = sys.m();
  const Matrix& A = sys.A();
  const Matrix& B = sys.B();
  const Matrix& C = sys.C();
  const Matrix& D = sys.D();
  const bool diffusion_unc = u.G3.norm() > 0.0;

  lmi::DecisionVariables vars;
  const lmi::AffineMatrix X = vars.symmetric(n, "X");
  const lmi::AffineMatrix Y = vars.full(m, n, "Y");
  std::vector<Index> eps_vars{vars.size()};
  vars.scalar("e1");
  if (diffusion_unc) {
    eps_vars.push_back(vars.size());
    vars.scalar("e2");
  }
  const lmi::AffineMatrix BY = B * Y;
  const lmi::AffineMatrix top = A * X + X * A.transpose() + BY + BY.transpose();
  const lmi::AffineMatrix CXDY = C * X + D * Y;
  const lmi::AffineMatrix core = lmi::assemble({{top, CXDY.transpose()}, {lmi::AffineMatrix(), -X}});

  Matrix Lc = Matrix::Zero(n, 2 * n);
  Lc.leftCols(n).setIdentity();
  std::vector<UncTerm> terms;
  {
    Matrix H = Matrix::Zero(2 * n, u.k());
    H.topRows(n) = u.E;
    terms.push_back({H, (u.G1 * X + u.G2 * Y) * Lc});
  }
  if (diffusion_unc) {
    Matrix H = Matrix::Zero(2 * n, u.k());
    H.bottomRows(n) = u.E;
    terms.push_back({H, (u.G3 * X) * Lc});
  }
  lmi::LinearMatrixExpr expr;
  expr.num_vars = vars.size();
  expr.add_block(embed_terms(core, terms, eps_vars));
  expr.add_block(-X);

  const lmi::SdpSolution sol = lmi::feasibility(expr, lmi::Goal::kStrictNegative);
  QsSynthesis out;
  out.lmi_margin = sol.margin;
  out.diagnostic = sol.diagnostic;
  if (sol.status != lmi::SdpStatus::kFeasible) {
    if (sol.status == lmi::SdpStatus::kUnknown) out.diagnostic = "solver inconclusive: " + sol.diagnostic;
    return out;
  }
  const Matrix Xv = smat(Vector(sol.x.head(svec_size(n))));
  const Matrix Yv = linalg::unvec_rows(sol.x.segment(svec_size(n), m * n), m, n);
  const Matrix P = Xv.inverse();
  const Matrix K = Xv.ldlt().solve(Yv.transpose()).transpose();
  const QsVerification ver = verify_quadratic_stability(sys, u, K, 0.5 * (P + P.transpose()), seed);
  if (ver.verdict != QsVerdict::kCertified) {
    if (diffusion_unc && ver.verdict == QsVerdict::kInconclusive) {
      out.diagnostic = "synthesized gain could not be certified";
      return out;
    }
    std::ostringstream msg;
    msg << "synthesized certificate failed verification (" << to_string(ver.verdict)
        << ", LMI margin " << sol.margin << ", alpha " << ver.alpha << ", worst sampled "
        << ver.worst_sampled << ", " << ver.diagnostic << ")";
    throw InternalConsistencyError(msg.str());
  }
  out.feasible = true;
  out.certificate = QuadStabCertificate{0.5 * (P + P.transpose()), K, ver.alpha, sol.margin};
  return out;
}

}  // namespace

QsSynthesis synthesize_quadratic_stabilizer(const SystemQuad& sys, const UncertaintyModel& unc,
                                            std::uint64_t seed) {
  UncertaintyModel u = unc.normalized(sys);
  if (u.extended()) {
    throw InvalidInput("G2/G3 given; use the extended synthesis for uncertainty in B or C");
  }
  return synthesize_impl(sys, u, seed);
}

QsSynthesis synthesize_extended(const SystemQuad& sys, const UncertaintyModel& unc, std::uint64_t seed) {
  return synthesize_impl(sys, unc.normalized(sys), seed);
}

}  // namespace stochlin
