#include "stochlin/sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <thread>

#include <Eigen/Eigenvalues>

#include "stochlin/lift.hpp"
#include "stochlin/linalg.hpp"

namespace stochlin {

namespace {

constexpr double kOverflowGuard = 1e150;
constexpr double kStderrFloor = 1e-12;

struct Grid {
  long steps = 0;
  double h = 0.0;
  std::vector<long> record;  // step index of each grid point
  std::vector<double> t;
};

Grid make_grid(double T, double dt, int grid_points, long multiple = 1) {
  Grid g;
  const long unit = grid_points * multiple;
  g.steps = std::max<long>(1, static_cast<long>(std::ceil(T / dt - 1e-9)));
  g.steps = ((g.steps + unit - 1) / unit) * unit;
  g.h = T / static_cast<double>(g.steps);
  const long stride = g.steps / grid_points;
  for (int k = 0; k <= grid_points; ++k) {
    g.record.push_back(k * stride);
    g.t.push_back(T * k / grid_points);
  }
  return g;
}

double spectral_radius(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Reduction in trial index order, so the thread count does not change any
// bit of the result.
void moments(const std::vector<Vector>& samples, Vector& mean, Vector& se) {
  const auto N = static_cast<double>(samples.size());
  // Accumulate deviations from the first sample: identical paths then give
  // exactly zero spread, and cancellation stays small.
  const Vector& ref = samples.front();
  Vector sd = Vector::Zero(ref.size());
  Vector ss = Vector::Zero(ref.size());
  for (const auto& s : samples) {
    const Vector d = s - ref;
    sd += d;
    ss += d.cwiseAbs2();
  }
  mean = ref + sd / N;
  if (samples.size() > 1) {
    const Vector var = ((ss - sd.cwiseAbs2() / N) / (N - 1.0)).cwiseMax(0.0);
    se = (var / N).cwiseSqrt();
  } else {
    se = Vector::Zero(ref.size());
  }
}

// One Euler-Maruyama path; fills samples[p][trial] on the grid and returns
// the first overflowing step, or -1. With `extrapolate`, a companion path at
// step 2h reuses the summed increments and the recorded sample is
// 2 svec(x x') - svec(y y'), which cancels the O(h) weak error.
template <int Dim>
long em_path(const Matrix& Fh_in, const Matrix& G_in, const Vector& x0, double sq, const Grid& g,
             bool extrapolate, std::mt19937_64& rng, std::vector<std::vector<Vector>>& samples,
             std::size_t trial) {
  using Mat = Eigen::Matrix<double, Dim, Dim>;
  using Vec = Eigen::Matrix<double, Dim, 1>;
  const Mat Fh = Fh_in;
  const Mat G = G_in;
  Vec x = x0;
  Vec y = x0;
  Vec fx(x0.size());
  Vec gx(x0.size());
  std::normal_distribution<double> nd;
  std::size_t next = 0;
  double dw_prev = 0.0;
  for (long step = 0; step <= g.steps; ++step) {
    if (next < g.record.size() && g.record[next] == step) {
      samples[next][trial] = svec(Matrix(x * x.transpose()));
      if (extrapolate) samples[next][trial] = 2.0 * samples[next][trial] - svec(Matrix(y * y.transpose()));
      ++next;
    }
    if (step == g.steps) break;
    const double dw = sq * nd(rng);
    fx.noalias() = Fh * x;
    gx.noalias() = G * x;
    x += fx + dw * gx;
    if (!(x.cwiseAbs().maxCoeff() <= kOverflowGuard)) return step + 1;
    if (!extrapolate) continue;
    if (step % 2 == 0) {
      dw_prev = dw;
      continue;
    }
    fx.noalias() = Fh * y;
    gx.noalias() = G * y;
    y += 2.0 * fx + (dw_prev + dw) * gx;
    if (!(y.cwiseAbs().maxCoeff() <= kOverflowGuard)) return step + 1;
  }
  return -1;
}

}  // namespace

void validate(const SimConfig& cfg, Index n) {
  if (cfg.x0.size() != n) throw InvalidInput("x0 must have " + std::to_string(n) + " entries");
  if (!cfg.x0.allFinite()) throw InvalidInput("x0 must be finite");
  if (!(cfg.T > 0.0) || !std::isfinite(cfg.T)) throw InvalidInput("T must be positive");
  if (cfg.dt < 0.0 || !std::isfinite(cfg.dt)) throw InvalidInput("dt must be positive (or 0 for default)");
  if (cfg.dt > 0.0 && cfg.T < cfg.dt) throw InvalidInput("T must be at least dt");
  if (cfg.trials < 1) throw InvalidInput("trials must be at least 1");
  if (cfg.grid_points < 1) throw InvalidInput("grid_points must be at least 1");
  if (cfg.threads < 0) throw InvalidInput("threads must be non-negative");
}

double effective_dt(const SystemQuad& sys, const Matrix& K, const SimConfig& cfg) {
  if (cfg.dt > 0.0) return cfg.dt;
  const double rho = spectral_radius(build_closed_loop_operator(sys, K).M);
  return rho > 0.0 ? std::min(1e-3, 0.1 / rho) : 1e-3;
}

MomentTrajectory moment_trajectory(const SystemQuad& sys, const Matrix& K, const Matrix& X0_in,
                                   const SimConfig& cfg) {
  sys.check_gain(K);
  const Index n = sys.n();
  if (X0_in.rows() != n || X0_in.cols() != n) throw InvalidInput("X0 must be n x n");
  const Matrix X0 = linalg::symmetrized(X0_in, 1e-9, "X0");
  if (linalg::min_eigenvalue(X0) < -1e-10 * (1.0 + X0.norm())) {
    throw InvalidInput("X0 must be positive semidefinite");
  }
  SimConfig c = cfg;
  c.x0 = Vector::Zero(n);
  validate(c, n);

  const Matrix M = build_closed_loop_operator(sys, K).M;
  const Grid g = make_grid(cfg.T, effective_dt(sys, K, cfg), cfg.grid_points, cfg.extrapolate ? 2 : 1);
  // Substeps keep h |M| <= 0.01 so the propagator tracks exp(M t) closely.
  const double mnorm = M.operatorNorm();
  const long sub = std::max<long>(1, static_cast<long>(std::ceil(g.h * mnorm / 0.01)));
  const double h = g.h / static_cast<double>(sub);
  // One RK4 step of a linear ODE is the degree-4 Taylor polynomial of exp(hM).
  const Index N = M.rows();
  const Matrix hM = h * M;
  Matrix Phi = Matrix::Identity(N, N);
  Matrix term = Matrix::Identity(N, N);
  for (int k = 1; k <= 4; ++k) {
    term = term * hM / static_cast<double>(k);
    Phi += term;
  }

  MomentTrajectory out;
  Vector v = svec(X0);
  std::size_t next = 0;
  for (long step = 0; step <= g.steps; ++step) {
    if (next < g.record.size() && g.record[next] == step) {
      Matrix X = smat(v);
      X = 0.5 * (X + X.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> es(X);
      const double lo = es.eigenvalues().minCoeff();
      if (lo < 0.0) {
        const double thr = -1e-10 * std::max(1.0, X.norm());
        if (lo < thr) {
          throw NumericalFailure("moment propagation lost positive semidefiniteness at t = " +
                                 std::to_string(g.t[next]));
        }
        X = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
            es.eigenvectors().transpose();
        ++out.clipped;
      }
      out.t.push_back(g.t[next]);
      out.X.push_back(X);
      ++next;
    }
    if (step == g.steps) break;
    for (long s = 0; s < sub; ++s) v = Phi * v;
    if (!v.allFinite() || v.cwiseAbs().maxCoeff() > kOverflowGuard) {
      out.diverged = true;
      out.first_bad_step = step + 1;
      break;
    }
  }
  return out;
}

EnsembleResult euler_maruyama_ensemble(const SystemQuad& sys, const Matrix& K, const SimConfig& cfg) {
  sys.check_gain(K);
  const Index n = sys.n();
  validate(cfg, n);
  const Matrix F = sys.closed_drift(K);
  const Matrix G = sys.closed_diffusion(K);
  const double dt = effective_dt(sys, K, cfg);
  const Grid g = make_grid(cfg.T, dt, cfg.grid_points, cfg.extrapolate ? 2 : 1);
  const double sq = std::sqrt(g.h);
  const Matrix Fh = g.h * F;
  const std::size_t npts = g.record.size();
  const Index N = svec_size(n);

  // samples[p][trial] = svec(x x') at grid point p.
  std::vector<std::vector<Vector>> samples(npts, std::vector<Vector>(static_cast<std::size_t>(cfg.trials)));
  std::vector<long> bad(static_cast<std::size_t>(cfg.trials), -1);

  const auto run_trial = [&](int trial) {
    std::seed_seq ss{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                     static_cast<std::uint32_t>(trial), 0x9e3779b9u};
    std::mt19937_64 rng(ss);
    const auto t = static_cast<std::size_t>(trial);
    long b = -1;
    switch (n) {
      case 1: b = em_path<1>(Fh, G, cfg.x0, sq, g, cfg.extrapolate, rng, samples, t); break;
      case 2: b = em_path<2>(Fh, G, cfg.x0, sq, g, cfg.extrapolate, rng, samples, t); break;
      case 3: b = em_path<3>(Fh, G, cfg.x0, sq, g, cfg.extrapolate, rng, samples, t); break;
      case 4: b = em_path<4>(Fh, G, cfg.x0, sq, g, cfg.extrapolate, rng, samples, t); break;
      default: b = em_path<Eigen::Dynamic>(Fh, G, cfg.x0, sq, g, cfg.extrapolate, rng, samples, t); break;
    }
    if (b >= 0) {
      bad[t] = b;
      for (std::size_t p = 0; p < npts; ++p) {
        if (samples[p][t].size() == 0) {
          samples[p][t] = Vector::Constant(N, std::numeric_limits<double>::quiet_NaN());
        }
      }
    }
  };

  int threads = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, std::max(1, cfg.trials));
  if (threads == 1) {
    for (int i = 0; i < cfg.trials; ++i) run_trial(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (int i = w; i < cfg.trials; i += threads) run_trial(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  EnsembleResult out;
  out.t = g.t;
  out.trials = cfg.trials;
  out.dt = g.h;
  for (long b : bad) {
    if (b >= 0) {
      out.diverged = true;
      out.first_bad_step = out.first_bad_step ? std::min(*out.first_bad_step, b) : b;
    }
  }
  for (std::size_t p = 0; p < npts; ++p) {
    Vector mean;
    Vector se;
    moments(samples[p], mean, se);
    out.mean.push_back(smat(mean));
    out.stderr_.push_back(smat(se));
  }
  return out;
}

SimComparison compare_empirical_vs_exact(const SystemQuad& sys, const Matrix& K, const SimConfig& cfg) {
  validate(cfg, sys.n());
  SimConfig c = cfg;
  c.dt = effective_dt(sys, K, cfg);
  const EnsembleResult emp = euler_maruyama_ensemble(sys, K, c);
  const MomentTrajectory ex = moment_trajectory(sys, K, cfg.x0 * cfg.x0.transpose(), c);

  SimComparison out;
  out.low_power = cfg.trials < 2;
  out.deterministic = sys.closed_diffusion(K).norm() == 0.0;
  out.diverged = emp.diverged || ex.diverged;
  const Index n = sys.n();
  const std::size_t npts = std::min(emp.mean.size(), ex.X.size());
  for (std::size_t p = 0; p < npts; ++p) {
    for (Index i = 0; i < n; ++i) {
      for (Index j = i; j < n; ++j) {
        const double e = ex.X[p](i, j);
        const double m = emp.mean[p](i, j);
        const double s = emp.stderr_[p](i, j);
        out.rows.push_back({emp.t[p], i, j, e, m, s});
        const double dev = std::abs(m - e) / std::max(s, kStderrFloor);
        if (std::isnan(dev)) {
          out.max_deviation = std::numeric_limits<double>::infinity();
        } else {
          out.max_deviation = std::max(out.max_deviation, dev);
        }
        out.max_relative_error = std::max(out.max_relative_error, std::abs(m - e) / (1.0 + std::abs(e)));
      }
    }
  }
  return out;
}

void write_csv(std::ostream& os, const SimComparison& cmp) {
  const auto prec = os.precision(17);
  os << "t,entry_i,entry_j,exact,empirical,stderr\n";
  for (const auto& r : cmp.rows) {
    os << r.t << ',' << r.i << ',' << r.j << ',' << r.exact << ',' << r.empirical << ',' << r.stderr_
       << '\n';
  }
  os.precision(prec);
}

}  // namespace stochlin
