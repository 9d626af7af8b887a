#include "stochlin/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "stochlin/lift.hpp"
#include "stochlin/linalg.hpp"

namespace stochlin::lmi {

// ---------------------------------------------------------------- AffineMatrix

void AffineMatrix::add_term(Index var, const Matrix& coef) {
  if (coef.rows() != rows() || coef.cols() != cols()) {
    throw InvalidInput("coefficient shape does not match the affine matrix");
  }
  auto it = terms_.find(var);
  if (it == terms_.end()) {
    terms_.emplace(var, coef);
  } else {
    it->second += coef;
  }
}

Matrix AffineMatrix::evaluate(const Vector& x) const {
  Matrix out = c_;
  for (const auto& [k, T] : terms_) {
    if (k >= x.size()) throw InvalidInput("decision vector too short");
    out += x(k) * T;
  }
  return out;
}

AffineMatrix AffineMatrix::transpose() const {
  AffineMatrix t(c_.transpose());
  for (const auto& [k, T] : terms_) t.terms_.emplace(k, T.transpose());
  return t;
}

AffineMatrix& AffineMatrix::operator+=(const AffineMatrix& o) {
  if (o.rows() != rows() || o.cols() != cols()) {
    throw InvalidInput("affine matrix shapes differ in addition");
  }
  c_ += o.c_;
  for (const auto& [k, T] : o.terms_) add_term(k, T);
  return *this;
}

AffineMatrix& AffineMatrix::operator-=(const AffineMatrix& o) {
  AffineMatrix neg = o;
  neg *= -1.0;
  return *this += neg;
}

AffineMatrix& AffineMatrix::operator*=(double s) {
  c_ *= s;
  for (auto& [k, T] : terms_) T *= s;
  return *this;
}

AffineMatrix operator*(const Matrix& L, const AffineMatrix& a) {
  if (L.cols() != a.rows()) throw InvalidInput("shape mismatch in left product");
  AffineMatrix out(L * a.c_);
  for (const auto& [k, T] : a.terms_) out.terms_.emplace(k, L * T);
  return out;
}

AffineMatrix operator*(const AffineMatrix& a, const Matrix& R) {
  if (a.cols() != R.rows()) throw InvalidInput("shape mismatch in right product");
  AffineMatrix out(a.c_ * R);
  for (const auto& [k, T] : a.terms_) out.terms_.emplace(k, T * R);
  return out;
}

// ----------------------------------------------------------- DecisionVariables

AffineMatrix DecisionVariables::symmetric(Index n, const std::string& name) {
  if (!name.empty()) names_[name] = count_;
  AffineMatrix X = AffineMatrix::zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j) {
      Matrix E = Matrix::Zero(n, n);
      E(i, j) = 1.0;
      E(j, i) = 1.0;
      X.add_term(count_ + svec_index(n, i, j), E);
    }
  }
  count_ += svec_size(n);
  return X;
}

AffineMatrix DecisionVariables::full(Index rows, Index cols, const std::string& name) {
  if (!name.empty()) names_[name] = count_;
  AffineMatrix X = AffineMatrix::zero(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      Matrix E = Matrix::Zero(rows, cols);
      E(i, j) = 1.0;
      X.add_term(count_ + i * cols + j, E);
    }
  }
  count_ += rows * cols;
  return X;
}

AffineMatrix DecisionVariables::scalar(const std::string& name) { return full(1, 1, name); }

Index DecisionVariables::offset(const std::string& name) const {
  auto it = names_.find(name);
  if (it == names_.end()) throw InvalidInput("unknown decision variable '" + name + "'");
  return it->second;
}

AffineMatrix assemble(const std::vector<std::vector<AffineMatrix>>& blocks) {
  const std::size_t nb = blocks.size();
  std::vector<Index> sizes(nb, 0);
  for (std::size_t i = 0; i < nb; ++i) {
    if (blocks[i].size() != nb) throw InvalidInput("block layout must be square");
    sizes[i] = blocks[i][i].rows();
    if (blocks[i][i].cols() != sizes[i]) throw InvalidInput("diagonal blocks must be square");
  }
  std::vector<Index> off(nb + 1, 0);
  for (std::size_t i = 0; i < nb; ++i) off[i + 1] = off[i] + sizes[i];
  const Index N = off[nb];

  AffineMatrix out = AffineMatrix::zero(N, N);
  for (std::size_t i = 0; i < nb; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      AffineMatrix b = blocks[i][j];
      if (j < i && b.rows() == 0 && b.cols() == 0) b = blocks[j][i].transpose();
      if (b.rows() == 0 && b.cols() == 0) b = AffineMatrix::zero(sizes[i], sizes[j]);
      if (b.rows() != sizes[i] || b.cols() != sizes[j]) {
        std::ostringstream msg;
        msg << "block (" << i << "," << j << ") is " << b.rows() << "x" << b.cols() << ", expected "
            << sizes[i] << "x" << sizes[j];
        throw InvalidInput(msg.str());
      }
      // Embed through selector matrices so the terms stay in one map.
      Matrix Li = Matrix::Zero(N, sizes[i]);
      Li.block(off[i], 0, sizes[i], sizes[i]).setIdentity();
      Matrix Rj = Matrix::Zero(sizes[j], N);
      Rj.block(0, off[j], sizes[j], sizes[j]).setIdentity();
      out += Li * b * Rj;
    }
  }
  return out;
}

// ------------------------------------------------------------ LinearMatrixExpr

void LinearMatrixExpr::add_block(const AffineMatrix& F) {
  if (F.rows() != F.cols() || F.rows() == 0) throw InvalidInput("LMI blocks must be square");
  const double scale = 1.0 + F.constant().norm();
  if ((F.constant() - F.constant().transpose()).norm() > 1e-12 * scale) {
    throw InvalidInput("LMI block constant is not symmetric");
  }
  for (const auto& [k, T] : F.terms()) {
    if ((T - T.transpose()).norm() > 1e-12 * (1.0 + T.norm())) {
      throw InvalidInput("LMI block coefficient is not symmetric");
    }
    num_vars = std::max(num_vars, k + 1);
  }
  blocks.push_back(F);
}

Index LinearMatrixExpr::order() const {
  Index n = 0;
  for (const auto& b : blocks) n += b.rows();
  return n;
}

Matrix LinearMatrixExpr::evaluate(const Vector& x) const {
  const Index N = order();
  Matrix out = Matrix::Zero(N, N);
  Index o = 0;
  for (const auto& b : blocks) {
    out.block(o, o, b.rows(), b.rows()) = b.evaluate(x);
    o += b.rows();
  }
  return out;
}

double LinearMatrixExpr::margin(const Vector& x) const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& b : blocks) {
    const Matrix F = b.evaluate(x);
    m = std::min(m, -linalg::max_eigenvalue(0.5 * (F + F.transpose())));
  }
  return m;
}

const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::kFeasible:
      return "feasible";
    case SdpStatus::kInfeasible:
      return "infeasible-to-tolerance";
    case SdpStatus::kUnknown:
      return "unknown";
    case SdpStatus::kUnbounded:
      return "unbounded";
  }
  return "unknown";
}

// -------------------------------------------------------------- barrier solver

namespace {

// G(z) = G0 + sum_k z_k G_k, constrained to be positive definite.
struct BarrierBlock {
  Matrix G0;
  std::vector<std::pair<Index, Matrix>> coefs;

  [[nodiscard]] Matrix value(const Vector& z) const {
    Matrix G = G0;
    for (const auto& [k, T] : coefs) G += z(k) * T;
    return G;
  }
  [[nodiscard]] Matrix direction(const Vector& d) const {
    Matrix G = Matrix::Zero(G0.rows(), G0.cols());
    for (const auto& [k, T] : coefs) G += d(k) * T;
    return G;
  }
};

struct BarrierResult {
  Vector z;
  bool converged = false;
  bool unbounded = false;
  int iterations = 0;
  std::string diagnostic;
};

bool chol(const Matrix& G, Eigen::LLT<Matrix>& llt) {
  llt.compute(G);
  return llt.info() == Eigen::Success;
}

// Maximizes c'z over {z : G_b(z) > 0 for all b} by a log-det barrier
// path-following method with exact line search along each Newton direction.
BarrierResult barrier_maximize(const std::vector<BarrierBlock>& blocks, const Vector& c, Vector z,
                               double gap_rel, int max_newton) {
  BarrierResult res;
  const Index N = z.size();
  double m = 0.0;
  for (const auto& b : blocks) m += static_cast<double>(b.G0.rows());

  double tau = 1.0;
  int newton = 0;
  Eigen::LLT<Matrix> llt;
  for (int outer = 0; outer < 200; ++outer) {
    for (int inner = 0; inner < 100; ++inner) {
      Vector grad = -tau * c;
      Matrix H = Matrix::Zero(N, N);
      std::vector<Eigen::LLT<Matrix>> facs(blocks.size());
      for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        const auto& b = blocks[bi];
        if (!chol(b.value(z), facs[bi])) {
          res.z = z;
          res.diagnostic = "iterate left the interior";
          return res;
        }
        std::vector<Matrix> S;
        std::vector<Index> idx;
        S.reserve(b.coefs.size());
        for (const auto& [k, T] : b.coefs) {
          Matrix Sk = facs[bi].matrixL().solve(T);
          Sk = facs[bi].matrixL().solve(Sk.transpose()).transpose();
          grad(k) -= Sk.trace();
          S.push_back(std::move(Sk));
          idx.push_back(k);
        }
        for (std::size_t a = 0; a < S.size(); ++a) {
          for (std::size_t e = a; e < S.size(); ++e) {
            const double h = (S[a].array() * S[e].array()).sum();
            H(idx[a], idx[e]) += h;
            if (a != e) H(idx[e], idx[a]) += h;
          }
        }
      }
      Eigen::LDLT<Matrix> ldlt(H);
      Vector d;
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        d = ldlt.solve(-grad);
      } else {
        d = H.completeOrthogonalDecomposition().solve(-grad);
      }
      const double dec2 = -grad.dot(d);
      ++newton;
      if (!d.allFinite()) {
        res.z = z;
        res.diagnostic = "Newton system is singular";
        return res;
      }
      if (dec2 < 1e-12) break;

      // phi(a) = -tau c'd a - sum log(1 + a e_k); minimize on [0, a_max).
      std::vector<double> ev;
      double a_max = std::numeric_limits<double>::infinity();
      for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        Matrix S = facs[bi].matrixL().solve(blocks[bi].direction(d));
        S = facs[bi].matrixL().solve(S.transpose()).transpose();
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
        for (Index k = 0; k < es.eigenvalues().size(); ++k) {
          const double e = es.eigenvalues()(k);
          ev.push_back(e);
          if (e < 0) a_max = std::min(a_max, -1.0 / e);
        }
      }
      const double lin = -tau * c.dot(d);
      auto dphi = [&](double a) {
        double s = lin;
        for (double e : ev) s -= e / (1.0 + a * e);
        return s;
      };
      double lo = 0.0;
      double hi;
      if (std::isfinite(a_max)) {
        hi = a_max;
      } else {
        hi = 1.0;
        while (dphi(hi) < 0.0) {
          hi *= 2.0;
          if (hi > 1e30) {
            res.z = z;
            res.unbounded = true;
            res.diagnostic = "objective unbounded along a recession direction";
            return res;
          }
        }
      }
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (dphi(mid) < 0.0) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      double step = lo;
      if (std::isfinite(a_max)) step = std::min(step, 0.99 * a_max);
      // The eigenvalue bound is exact in exact arithmetic only; near the
      // boundary of badly conditioned blocks, back off until every block
      // factors again.
      bool inside = false;
      for (int bt = 0; bt < 60 && step > 0.0; ++bt) {
        const Vector zn = z + step * d;
        inside = true;
        for (const auto& b : blocks) {
          if (!chol(b.value(zn), llt)) {
            inside = false;
            break;
          }
        }
        if (inside) break;
        step *= 0.5;
      }
      if (!inside || step <= 0.0) break;
      z += step * d;
      if (newton >= max_newton) break;
      if (dec2 < 1e-9) break;
    }
    res.iterations = newton;
    if (m / tau <= gap_rel * (1.0 + std::abs(c.dot(z)))) {
      res.converged = true;
      break;
    }
    if (newton >= max_newton) {
      res.diagnostic = "Newton iteration limit reached";
      break;
    }
    tau *= 8.0;
  }
  res.z = z;
  return res;
}

// Blocks encoding -F_b(x) - t I > 0 (t is z(nx)) plus the box on x.
std::vector<BarrierBlock> margin_blocks(const LinearMatrixExpr& expr, Index nx, double box,
                                        bool with_t) {
  std::vector<BarrierBlock> out;
  for (const auto& F : expr.blocks) {
    BarrierBlock b;
    b.G0 = -F.constant();
    for (const auto& [k, T] : F.terms()) b.coefs.emplace_back(k, -T);
    if (with_t) b.coefs.emplace_back(nx, -Matrix::Identity(F.rows(), F.rows()));
    out.push_back(std::move(b));
  }
  for (Index k = 0; k < nx; ++k) {
    BarrierBlock up;
    up.G0 = Matrix::Constant(1, 1, box);
    up.coefs.emplace_back(k, Matrix::Constant(1, 1, -1.0));
    out.push_back(up);
    BarrierBlock dn;
    dn.G0 = Matrix::Constant(1, 1, box);
    dn.coefs.emplace_back(k, Matrix::Constant(1, 1, 1.0));
    out.push_back(dn);
  }
  return out;
}

void validate(const LinearMatrixExpr& expr, const SdpOptions& opts) {
  if (expr.blocks.empty()) throw InvalidInput("LMI has no blocks");
  if (!(opts.box > 0.0) || !std::isfinite(opts.box)) throw InvalidInput("box bound must be positive");
  for (const auto& b : expr.blocks) {
    if (!b.constant().allFinite()) throw InvalidInput("LMI has non-finite entries");
    for (const auto& [k, T] : b.terms()) {
      if (!T.allFinite()) throw InvalidInput("LMI has non-finite entries");
    }
  }
}

SdpSolution max_margin(const LinearMatrixExpr& expr, const SdpOptions& opts) {
  const Index nx = expr.num_vars;
  Vector z = Vector::Zero(nx + 1);
  z(nx) = expr.margin(Vector::Zero(nx)) - 1.0;
  Vector c = Vector::Zero(nx + 1);
  c(nx) = 1.0;
  const auto blocks = margin_blocks(expr, nx, opts.box, true);
  BarrierResult br = barrier_maximize(blocks, c, z, opts.gap_rel, opts.max_newton);

  SdpSolution sol;
  sol.x = br.z.head(nx);
  sol.margin = expr.margin(sol.x);
  sol.objective = br.z(nx);
  sol.iterations = br.iterations;
  sol.diagnostic = br.diagnostic;
  sol.status = br.converged ? SdpStatus::kFeasible : SdpStatus::kUnknown;
  return sol;
}

}  // namespace

SdpSolution feasibility(const LinearMatrixExpr& expr, Goal goal, const SdpOptions& opts) {
  validate(expr, opts);
  SdpSolution sol = max_margin(expr, opts);
  const bool ok = goal == Goal::kStrictNegative ? sol.margin > opts.strict_threshold
                                                : sol.margin >= -opts.nonstrict_slack;
  if (ok) {
    sol.status = SdpStatus::kFeasible;
  } else if (sol.status == SdpStatus::kFeasible) {
    // Converged, and the best achievable margin is not good enough.
    sol.status = SdpStatus::kInfeasible;
    std::ostringstream msg;
    msg << "best achievable margin " << sol.margin;
    sol.diagnostic = msg.str();
  }
  return sol;
}

SdpSolution maximize(const Vector& c, const LinearMatrixExpr& expr, const SdpOptions& opts) {
  validate(expr, opts);
  if (c.size() > std::max<Index>(expr.num_vars, 0)) {
    throw InvalidInput("objective has more entries than decision variables");
  }
  const Index nx = expr.num_vars;
  Vector cc = Vector::Zero(nx);
  cc.head(c.size()) = c;

  SdpSolution start = max_margin(expr, opts);
  if (!(start.margin > 0.0)) {
    start.status = start.status == SdpStatus::kFeasible ? SdpStatus::kInfeasible : SdpStatus::kUnknown;
    std::ostringstream msg;
    msg << "no strictly feasible point (best margin " << start.margin << ")";
    start.diagnostic = msg.str();
    return start;
  }

  const auto blocks = margin_blocks(expr, nx, opts.box, false);
  BarrierResult br = barrier_maximize(blocks, cc, start.x, opts.gap_rel, opts.max_newton);
  SdpSolution sol;
  sol.x = br.z;
  sol.margin = expr.margin(sol.x);
  sol.objective = cc.dot(sol.x);
  sol.iterations = start.iterations + br.iterations;
  sol.diagnostic = br.diagnostic;
  if (br.unbounded) {
    sol.status = SdpStatus::kUnbounded;
  } else if (!br.converged) {
    sol.status = SdpStatus::kUnknown;
  } else if (sol.x.size() > 0 && sol.x.cwiseAbs().maxCoeff() >= opts.box * (1.0 - 1e-6)) {
    sol.status = SdpStatus::kUnbounded;
    sol.diagnostic = "optimizer sits on the variable box";
  } else {
    sol.status = SdpStatus::kFeasible;
  }
  return sol;
}

AffineMatrix schur_embed(const AffineMatrix& M, const AffineMatrix& N, const AffineMatrix& R) {
  if (M.rows() != M.cols() || R.rows() != R.cols() || N.rows() != M.rows() ||
      N.cols() != R.rows()) {
    throw InvalidInput("schur_embed: shapes of M, N, R are inconsistent");
  }
  return assemble({{M, N}, {AffineMatrix(), R}});
}

AffineMatrix s_procedure_embed(const AffineMatrix& Y, const Matrix& H, const AffineMatrix& E,
                               Index eps_var) {
  if (Y.rows() != Y.cols() || H.rows() != Y.rows() || E.cols() != Y.rows()) {
    throw InvalidInput("s_procedure_embed: shapes of Y, H, E are inconsistent");
  }
  if (H.cols() == 0 || E.rows() == 0) return Y;
  AffineMatrix top = Y;
  top.add_term(eps_var, H * H.transpose());
  AffineMatrix corner = AffineMatrix::zero(E.rows(), E.rows());
  corner.add_term(eps_var, -Matrix::Identity(E.rows(), E.rows()));
  return assemble({{top, E.transpose()}, {AffineMatrix(), corner}});
}

}  // namespace stochlin::lmi
