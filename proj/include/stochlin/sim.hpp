#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "stochlin/types.hpp"

namespace stochlin {

struct SimConfig {
  Vector x0;
  double T = 1.0;
  /// 0 selects min(1e-3, 0.1 / spectral radius of L(K)).
  double dt = 0.0;
  int trials = 1000;
  std::uint64_t seed = 1;
  /// Recorded grid: t_k = k T / grid_points, k = 0..grid_points.
  int grid_points = 10;
  /// 0 uses the hardware concurrency. Results do not depend on it.
  int threads = 0;
  /// Richardson extrapolation over step sizes h and 2h on shared increments.
  /// Removes the first-order bias of the ensemble means at 1.5x the cost.
  bool extrapolate = false;
};

/// Checks the configuration against the plant dimension; throws InvalidInput.
void validate(const SimConfig& cfg, Index n);

/// Step actually used for the configuration (resolves dt = 0).
double effective_dt(const SystemQuad& sys, const Matrix& K, const SimConfig& cfg);

struct MomentTrajectory {
  std::vector<double> t;
  std::vector<Matrix> X;
  bool diverged = false;
  /// First integration step whose state overflowed.
  std::optional<long> first_bad_step;
  /// Grid points where slightly negative eigenvalues were clipped to zero.
  int clipped = 0;
};

/// X(t) = E[x x'] from dX/dt = L_K(X), integrated by fixed-step fourth-order
/// Runge-Kutta on the lifted ODE.
MomentTrajectory moment_trajectory(const SystemQuad& sys, const Matrix& K, const Matrix& X0,
                                   const SimConfig& cfg);

struct EnsembleResult {
  std::vector<double> t;
  /// Empirical E[x x'] and per-entry standard errors on the grid.
  std::vector<Matrix> mean;
  std::vector<Matrix> stderr_;
  int trials = 0;
  double dt = 0.0;
  bool diverged = false;
  std::optional<long> first_bad_step;
};

/// Euler-Maruyama paths of dx = (A + BK)x dt + (C + DK)x dw. Trial i draws
/// from a generator seeded by (seed, i).
EnsembleResult euler_maruyama_ensemble(const SystemQuad& sys, const Matrix& K, const SimConfig& cfg);

struct MomentRow {
  double t;
  Index i;
  Index j;
  double exact;
  double empirical;
  double stderr_;
};

struct SimComparison {
  /// max |empirical - exact| / max(stderr, 1e-12) over the grid and entries.
  double max_deviation = 0.0;
  double max_relative_error = 0.0;
  /// Fewer than two trials: the standard errors carry no information.
  bool low_power = false;
  /// Zero diffusion: all paths coincide.
  bool deterministic = false;
  bool diverged = false;
  std::vector<MomentRow> rows;
};

SimComparison compare_empirical_vs_exact(const SystemQuad& sys, const Matrix& K, const SimConfig& cfg);

/// Header `t,entry_i,entry_j,exact,empirical,stderr`, one row per grid point
/// and upper-triangular entry.
void write_csv(std::ostream& os, const SimComparison& cmp);

}  // namespace stochlin
