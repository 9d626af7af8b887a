#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "stochlin/lift.hpp"
#include "stochlin/sim.hpp"
#include "stochlin/spectra.hpp"
#include "test_util.hpp"

using namespace stochlin;

namespace {

Matrix one(double v) { return Matrix::Constant(1, 1, v); }

SimConfig config(const Vector& x0, double T, int trials, int grid = 10) {
  SimConfig cfg;
  cfg.x0 = x0;
  cfg.T = T;
  cfg.trials = trials;
  cfg.grid_points = grid;
  return cfg;
}

SystemQuad diagonal_diffusion_plant() {
  return SystemQuad(-Matrix::Identity(2, 2), Matrix::Zero(2, 1), Matrix(Eigen::Vector2d(3, 4).asDiagonal()),
                    Matrix::Zero(2, 1));
}

}  // namespace

TEST(MomentTrajectory, ScalarClosedForm) {
  const SystemQuad sys = SystemQuad::scalar(-1, 0, 1, 0);
  const auto tr = moment_trajectory(sys, one(0), one(4), config(Vector::Constant(1, 2), 1.0, 1));
  ASSERT_EQ(tr.t.size(), 11u);
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    EXPECT_NEAR(tr.X[k](0, 0), 4 * std::exp(-tr.t[k]), 1e-12);
  }
  EXPECT_FALSE(tr.diverged);
}

TEST(MomentTrajectory, DiagonalDiffusionGrowthRate) {
  Matrix X0 = Matrix::Zero(2, 2);
  X0(0, 0) = 1;
  const auto tr = moment_trajectory(diagonal_diffusion_plant(), Matrix::Zero(1, 2), X0,
                                    config(Vector::Unit(2, 0), 0.5, 1, 5));
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    EXPECT_NEAR(tr.X[k](0, 0), std::exp(7 * tr.t[k]), 1e-10 * std::exp(7 * tr.t[k]));
    EXPECT_EQ(tr.X[k](1, 1), 0.0);
  }
  EXPECT_NEAR(std::log(tr.X.back()(0, 0)) / 0.5, 7.0, 1e-10);
}

TEST(MomentTrajectory, DefectiveLiftGrowsPolynomially) {
  Matrix A(2, 2);
  A << 0, 1, 0, 0;
  const SystemQuad sys(A, Matrix::Zero(2, 1), Matrix::Zero(2, 2), Matrix::Zero(2, 1));
  Matrix X0 = Matrix::Zero(2, 2);
  X0(1, 1) = 1;
  const auto tr = moment_trajectory(sys, Matrix::Zero(1, 2), X0, config(Vector::Unit(2, 1), 3.0, 1, 6));
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    const double t = tr.t[k];
    EXPECT_NEAR(tr.X[k](0, 0), t * t, 1e-10 * (1 + t * t));
    EXPECT_NEAR(tr.X[k](0, 1), t, 1e-10 * (1 + t));
    EXPECT_NEAR(tr.X[k](1, 1), 1.0, 1e-12);
  }
}

TEST(MomentTrajectory, RejectsIndefiniteInitialMoment) {
  const SystemQuad sys = SystemQuad::scalar(-1, 0, 1, 0);
  EXPECT_THROW(moment_trajectory(sys, one(0), one(-1), config(Vector::Ones(1), 1.0, 1)), InvalidInput);
}

TEST(MomentTrajectory, MatchesMatrixExponentialProperty) {
  testutil::Rng rng(101);
  for (int t = 0; t < 20; ++t) {
    const Index n = 1 + t % 3;
    const SystemQuad sys(rng.matrix(n, n) - 2.0 * Matrix::Identity(n, n), rng.matrix(n, 1),
                         rng.matrix(n, n, 0.5), rng.matrix(n, 1, 0.5));
    const Matrix K = rng.matrix(1, n, 0.3);
    const Matrix X0 = rng.pd(n);
    const double T = 2.0;
    const auto tr = moment_trajectory(sys, K, X0, config(Vector::Ones(n), T, 1, 4));
    const Matrix M = build_closed_loop_operator(sys, K).M;
    for (std::size_t k = 0; k < tr.t.size(); ++k) {
      const Matrix E = (M * tr.t[k]).exp();
      const Matrix ref = smat(Vector(E * svec(X0)));
      EXPECT_LE((tr.X[k] - ref).norm(), 1e-8 * ref.norm()) << "t=" << t << " k=" << k;
    }
  }
}

TEST(MomentTrajectory, DecayMatchesAbscissaSignProperty) {
  testutil::Rng rng(102);
  int stable = 0;
  int unstable = 0;
  for (int t = 0; t < 30; ++t) {
    const Index n = 1 + t % 2;
    const SystemQuad sys(rng.matrix(n, n) - rng.uniform(0, 2) * Matrix::Identity(n, n), rng.matrix(n, 1),
                         rng.matrix(n, n, 0.6), rng.matrix(n, 1, 0.6));
    const Matrix K = rng.matrix(1, n, 0.3);
    const double ab = spectral_abscissa(build_closed_loop_operator(sys, K));
    if (std::abs(ab) < 0.05) continue;
    const Matrix X0 = Matrix::Identity(n, n);
    const auto tr = moment_trajectory(sys, K, X0, config(Vector::Ones(n), 50.0 / std::abs(ab), 1, 1));
    if (tr.diverged) {
      EXPECT_GT(ab, 0);
      ++unstable;
      continue;
    }
    const bool decayed = tr.X.back().norm() < 1e-6 * X0.norm();
    EXPECT_EQ(decayed, ab < 0) << "t=" << t << " abscissa=" << ab;
    (ab < 0 ? stable : unstable)++;
  }
  EXPECT_GT(stable, 3);
  EXPECT_GT(unstable, 3);
}

TEST(Ensemble, ScalarWithinFourStandardErrors) {
  const SystemQuad sys = SystemQuad::scalar(-1, 0, 1, 0);
  SimConfig cfg = config(Vector::Ones(1), 1.0, 10000);
  cfg.seed = 7;
  const auto cmp = compare_empirical_vs_exact(sys, one(0), cfg);
  EXPECT_LE(cmp.max_deviation, 4.0);
  EXPECT_FALSE(cmp.low_power);
  EXPECT_FALSE(cmp.deterministic);
}

TEST(Ensemble, DeterministicSystemHasZeroSpread) {
  Matrix A(2, 2);
  A << -1, 2, 0, -0.5;
  const SystemQuad sys(A, Matrix::Zero(2, 1), Matrix::Zero(2, 2), Matrix::Zero(2, 1));
  const SimConfig cfg = config((Vector(2) << 1, -1).finished(), 1.0, 50);
  const auto ens = euler_maruyama_ensemble(sys, Matrix::Zero(1, 2), cfg);
  for (const auto& se : ens.stderr_) EXPECT_EQ(se.maxCoeff(), 0.0);
  const auto cmp = compare_empirical_vs_exact(sys, Matrix::Zero(1, 2), cfg);
  EXPECT_TRUE(cmp.deterministic);
  // Euler-Maruyama is first order; with dt = 1e-3 the relative gap is O(dt).
  EXPECT_LE(cmp.max_relative_error, 5e-3);
}

TEST(Ensemble, ExtrapolationRemovesFirstOrderBias) {
  // Deterministic decay: the plain scheme is off by O(dt), the extrapolated
  // one by O(dt^2).
  const SystemQuad sys = SystemQuad::scalar(-3, 0, 0, 0);
  SimConfig cfg = config(Vector::Ones(1), 1.0, 1, 4);
  cfg.dt = 0.01;
  const auto plain = compare_empirical_vs_exact(sys, one(0), cfg);
  cfg.extrapolate = true;
  const auto rich = compare_empirical_vs_exact(sys, one(0), cfg);
  EXPECT_GT(plain.max_relative_error, 1e-3);
  EXPECT_LT(rich.max_relative_error, 0.05 * plain.max_relative_error);
  cfg.dt = 0.005;
  const auto half = compare_empirical_vs_exact(sys, one(0), cfg);
  const double ratio = rich.max_relative_error / half.max_relative_error;
  EXPECT_GT(ratio, 3.5);
  EXPECT_LT(ratio, 4.5);
}

TEST(Ensemble, ExtrapolatedLowNoiseLoopWithinFourStandardErrors) {
  // Fast decay with weak noise: standard errors fall below the single-step bias.
  const SystemQuad sys = SystemQuad::scalar(-3, 0, 0.2, 0);
  SimConfig cfg = config(Vector::Ones(1), 1.0, 10000, 10);
  cfg.seed = 11;
  cfg.extrapolate = true;
  const auto cmp = compare_empirical_vs_exact(sys, one(0), cfg);
  EXPECT_LE(cmp.max_deviation, 4.0);
  cfg.threads = 1;
  const auto again = compare_empirical_vs_exact(sys, one(0), cfg);
  EXPECT_EQ(again.max_deviation, cmp.max_deviation);
}

TEST(Ensemble, SingleTrialIsLowPower) {
  const auto cmp = compare_empirical_vs_exact(SystemQuad::scalar(-1, 0, 1, 0), one(0),
                                              config(Vector::Ones(1), 1.0, 1));
  EXPECT_TRUE(cmp.low_power);
  EXPECT_TRUE(std::isfinite(cmp.max_deviation));
}

// The relative variance of x1^2 is exp(36 t) - 1, so the growth rate is only
// estimable from moderate path counts over a short window.
TEST(Ensemble, DiagonalDiffusionEmpiricalGrowthRate) {
  SimConfig cfg = config(Vector::Unit(2, 0), 0.1, 100000, 1);
  cfg.seed = 3;
  const auto ens = euler_maruyama_ensemble(diagonal_diffusion_plant(), Matrix::Zero(1, 2), cfg);
  ASSERT_FALSE(ens.diverged);
  const double slope = std::log(ens.mean.back()(0, 0)) / 0.1;
  EXPECT_NEAR(slope, 7.0, 0.7);
}

TEST(Ensemble, SeedReproducibleAndThreadIndependent) {
  testutil::Rng rng(103);
  const SystemQuad sys(rng.matrix(2, 2) - 2.0 * Matrix::Identity(2, 2), rng.matrix(2, 1),
                       rng.matrix(2, 2, 0.5), rng.matrix(2, 1, 0.5));
  const Matrix K = rng.matrix(1, 2, 0.3);
  SimConfig cfg = config(Vector::Ones(2), 1.0, 500);
  cfg.threads = 1;
  const auto a = euler_maruyama_ensemble(sys, K, cfg);
  const auto b = euler_maruyama_ensemble(sys, K, cfg);
  cfg.threads = 3;
  const auto c = euler_maruyama_ensemble(sys, K, cfg);
  for (std::size_t k = 0; k < a.mean.size(); ++k) {
    EXPECT_EQ(a.mean[k], b.mean[k]);
    EXPECT_EQ(a.mean[k], c.mean[k]);
    EXPECT_EQ(a.stderr_[k], c.stderr_[k]);
  }
  cfg.seed = 2;
  EXPECT_NE(euler_maruyama_ensemble(sys, K, cfg).mean.back(), a.mean.back());
}

TEST(Ensemble, UnstableLoopReportsDivergence) {
  SimConfig cfg = config(Vector::Ones(1), 200.0, 10, 2);
  cfg.dt = 0.01;
  const auto ens = euler_maruyama_ensemble(SystemQuad::scalar(5, 0, 0, 0), one(0), cfg);
  EXPECT_TRUE(ens.diverged);
  ASSERT_TRUE(ens.first_bad_step.has_value());
  EXPECT_GT(*ens.first_bad_step, 0);
}

TEST(SimConfig, Validation) {
  EXPECT_THROW(validate(config(Vector::Ones(2), 1.0, 10), 1), InvalidInput);
  EXPECT_THROW(validate(config(Vector::Ones(1), 1.0, 0), 1), InvalidInput);
  SimConfig bad = config(Vector::Ones(1), 1.0, 10);
  bad.dt = 2.0;
  EXPECT_THROW(validate(bad, 1), InvalidInput);
  bad.dt = -1.0;
  EXPECT_THROW(validate(bad, 1), InvalidInput);
  EXPECT_NO_THROW(validate(config(Vector::Ones(1), 1.0, 10), 1));
}

TEST(SimConfig, DefaultStep) {
  const SimConfig cfg = config(Vector::Unit(2, 0), 1.0, 1);
  EXPECT_DOUBLE_EQ(effective_dt(diagonal_diffusion_plant(), Matrix::Zero(1, 2), cfg), 1e-3);
  EXPECT_DOUBLE_EQ(effective_dt(SystemQuad::scalar(-100, 0, 0, 0), one(0), cfg), 0.1 / 200.0);
  EXPECT_DOUBLE_EQ(effective_dt(SystemQuad::scalar(-0.1, 0, 0, 0), one(0), cfg), 1e-3);
}

TEST(SimCsv, HeaderAndRowCount) {
  const auto cmp = compare_empirical_vs_exact(diagonal_diffusion_plant(), Matrix::Zero(1, 2),
                                              config(Vector::Unit(2, 0), 0.1, 20, 4));
  std::ostringstream os;
  write_csv(os, cmp);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "t,entry_i,entry_j,exact,empirical,stderr");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 5 * 3);
  EXPECT_EQ(cmp.rows.size(), 15u);
}
