// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "stochlin/gare.hpp"
#include "stochlin/lift.hpp"
#include "stochlin/linalg.hpp"
#include "stochlin/observability.hpp"
#include "stochlin/robust.hpp"
#include "stochlin/sim.hpp"
#include "stochlin/spectra.hpp"
#include "stochlin/stabilizability.hpp"
#include "test_util.hpp"

using namespace stochlin;

namespace {

// Pinned tolerances and budgets.
constexpr double kGoldenSpectrumTol = 1e-10;
constexpr double kGoldenResidualTol = 1e-12;
constexpr double kScalarGareTol = 1e-8;
constexpr double kComparePsdTol = 1e-7;
constexpr double kHomotopyTol = 1e-6;
constexpr double kHomotopyAbscissaTol = 1e-8;
constexpr double kSimSigmas = 4.0;
constexpr double kFaithfulnessTol = 1e-12;
constexpr double kBudgetSpectrumMs = 1.0;
constexpr double kBudgetUnstabilizablePairMs = 50.0;
constexpr double kBudgetSimMs = 60000.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Matrix one(double v) { return Matrix::Constant(1, 1, v); }

SystemQuad diagonal_diffusion_plant() {
  return SystemQuad(-Matrix::Identity(2, 2), Matrix::Zero(2, 1), Matrix(Eigen::Vector2d(3, 4).asDiagonal()),
                    Matrix::Zero(2, 1));
}

SystemQuad unstabilizable_pair_plant() {
  Matrix A(2, 2), B(2, 1), C(2, 2);
  A << 0, 1, 0, -1;
  B << 0, 1;
  C << 1, -1, 0, 0;
  return SystemQuad(A, B, C, Matrix::Zero(2, 1));
}

Outcome golden_diagonal_spectrum() {
  const SystemQuad sys = diagonal_diffusion_plant();
  const Matrix K = Matrix::Zero(1, 2);
  std::vector<double> times;
  Spectrum s;
  for (int i = 0; i < 21; ++i) {
    const auto t0 = Clock::now();
    s = spectrum(build_closed_loop_operator(sys, K, LiftVariant::kAdjoint));
    times.push_back(ms_since(t0));
  }
  std::nth_element(times.begin(), times.begin() + 10, times.end());
  const double median_ms = times[10];
  std::vector<double> re;
  double im = 0.0;
  for (const auto& z : s.eigenvalues) {
    re.push_back(z.real());
    im = std::max(im, std::abs(z.imag()));
  }
  std::sort(re.begin(), re.end());
  const std::vector<double> want{7, 10, 14};
  double err = im;
  bool ok = re.size() == 3;
  for (std::size_t i = 0; ok && i < 3; ++i) err = std::max(err, std::abs(re[i] - want[i]));
  ok = ok && err <= kGoldenSpectrumTol && median_ms < kBudgetSpectrumMs;
  return {ok, "max error " + fmt("%.2e", err) + ", median " + fmt("%.3f", median_ms) + " ms"};
}

Outcome golden_output_lift() {
  Matrix Q(2, 2);
  Q << 3, 2, 5, 7;
  Matrix expected(4, 3);
  expected << 3, 2, 0, 0, 3, 2, 5, 7, 0, 0, 5, 7;
  const Matrix M = build_output_lift(Q, 2).M;
  const bool ok = M.rows() == 4 && M.cols() == 3 && M == expected;
  return {ok, ok ? "bit-exact 4x3" : "mismatch"};
}

Outcome golden_unstabilizable_pair() {
  const auto t0 = Clock::now();
  const SystemQuad sys = unstabilizable_pair_plant();
  const auto st = is_stabilizable(sys);
  const GareProblem prob{sys, Matrix::Identity(2, 2), one(1)};
  const double r1 = gare_residual(prob, Matrix(Eigen::Vector2d(-1, 0).asDiagonal()));
  const double r2 = gare_residual(prob, Matrix(Eigen::Vector2d(-1, -2).asDiagonal()));
  const auto items = unremovable_spectra(sys);
  const double ms = ms_since(t0);
  bool rhp = false;
  for (const auto& it : items) rhp = rhp || it.lambda.real() >= 0;
  const bool ok = st.decision == Decision::kNo && r1 <= kGoldenResidualTol && r2 <= kGoldenResidualTol &&
                  !rhp && ms < kBudgetUnstabilizablePairMs;
  return {ok, std::string("verdict ") + to_string(st.decision) + ", residuals " + fmt("%.1e", r1) + "/" +
                  fmt("%.1e", r2) + ", " + std::to_string(items.size()) + " unremovable items" +
                  (rhp ? " (one in Re>=0)" : "") + ", " + fmt("%.1f", ms) + " ms"};
}

Outcome scalar_suite() {
  testutil::Rng rng(4001);
  int mismatches = 0;
  int gare_checked = 0;
  double gare_err = 0.0;
  for (int t = 0; t < 500; ++t) {
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2), c = rng.uniform(-2, 2);
    double d = rng.uniform(-2, 2);
    if (std::abs(d) < 1e-3) d = 1.0;
    const double crit = testutil::scalar_criterion(a, b, c, d);
    const SystemQuad sys = SystemQuad::scalar(a, b, c, d);
    const auto st = is_stabilizable(sys);
    if ((st.decision == Decision::kYes) != (crit > 0)) ++mismatches;
    if (st.decision != Decision::kYes) continue;
    const auto sol = solve_gare_maximal({sys, one(0), one(1)});
    const double want = std::max(0.0, (2 * a + c * c) / crit);
    gare_err = std::max(gare_err, std::abs(sol.P(0, 0) - want));
    ++gare_checked;
  }
  const bool ok = mismatches == 0 && gare_err <= kScalarGareTol && gare_checked > 0;
  return {ok, std::to_string(mismatches) + " criterion mismatches / 500, max GARE error " + fmt("%.1e", gare_err) +
                  " over " + std::to_string(gare_checked)};
}

Outcome observability_goldens() {
  Matrix Ao(2, 2), Co(2, 2), Qo(1, 2);
  Ao << 0, 0, 1, -1;
  Co << 1, 0, -1, 0;
  Qo << 0, 1;
  const OutputSystem obs{Ao, {Co}, Qo};
  const OutputSystem det{-Matrix::Identity(2, 2), {-Matrix::Identity(2, 2)}, Matrix::Zero(2, 2)};
  const bool o_obs = is_exactly_observable(obs).observable;
  const bool o_det = is_stochastically_detectable(obs).decision == Decision::kYes;
  const bool d_obs = is_exactly_observable(det).observable;
  const bool d_det = is_stochastically_detectable(det).decision == Decision::kYes;
  const bool ok = o_obs && !o_det && d_det && !d_obs;
  return {ok, std::string("first: observable=") + (o_obs ? "yes" : "no") + " detectable=" + (o_det ? "yes" : "no") +
                  "; second: observable=" + (d_obs ? "yes" : "no") + " detectable=" + (d_det ? "yes" : "no")};
}

Outcome liu_agreement() {
  testutil::Rng rng(4002);
  int disagree = 0;
  int observable = 0;
  for (int t = 0; t < 200; ++t) {
    const Index n = 1 + t % 3;
    Matrix A = rng.matrix(n, n);
    Matrix C = rng.matrix(n, n);
    Matrix Q = rng.matrix(1, n);
    if (t % 2 == 0 && n > 1) {
      // Hide the first coordinate from the output.
      A.row(0).tail(n - 1).setZero();
      C.row(0).tail(n - 1).setZero();
      A = A.transpose().eval();
      C = C.transpose().eval();
      Q(0, 0) = 0;
    }
    const OutputSystem osys{A, {C}, Q};
    const bool lifted = is_exactly_observable(osys).observable;
    const bool liu = liu_rank_criterion(osys, liu_saturation_depth(n)).observable;
    disagree += lifted != liu;
    observable += lifted;
  }
  return {disagree == 0, std::to_string(disagree) + " disagreements / 200 (" + std::to_string(observable) +
                             " observable)"};
}

Outcome gare_monotonicity() {
  testutil::Rng rng(4003);
  int systems = 0;
  int unverified = 0;
  double min_eig = INFINITY;
  double homotopy_gap = 0.0;
  double homotopy_abscissa = -INFINITY;
  for (int t = 0; systems < 100 && t < 1000; ++t) {
    const Index n = 1 + t % 2;
    const SystemQuad sys(rng.matrix(n, n), rng.matrix(n, 1), rng.matrix(n, n, 0.5), rng.matrix(n, 1, 0.5));
    if (is_stabilizable(sys).decision != Decision::kYes) continue;
    ++systems;
    const GareProblem hat{sys, rng.psd(n, 1), rng.pd(1)};
    const GareProblem big{sys, hat.Q + rng.psd(n, 1), hat.R + rng.psd(1, 1)};
    const auto Ph = solve_gare_maximal(hat).P;
    const auto cmp = compare_gare(big, hat, Ph, kComparePsdTol);
    unverified += !cmp.verified;
    min_eig = std::min(min_eig, cmp.min_eigenvalue);
    const auto lim = epsilon_homotopy_strong(hat, default_eps_schedule());
    homotopy_gap = std::max(homotopy_gap, (lim.P - Ph).norm() / (1.0 + Ph.norm()));
    homotopy_abscissa = std::max(homotopy_abscissa, lim.classification.abscissa);
  }
  const bool ok = systems == 100 && unverified == 0 && min_eig >= -kComparePsdTol &&
                  homotopy_gap <= kHomotopyTol && homotopy_abscissa <= kHomotopyAbscissaTol;
  return {ok, std::to_string(unverified) + " unverified / " + std::to_string(systems) + ", min eig " +
                  fmt("%.2e", min_eig) + ", homotopy gap " + fmt("%.1e", homotopy_gap) + ", abscissa " +
                  fmt("%.1e", homotopy_abscissa)};
}

Outcome synthesis_soundness() {
  testutil::Rng rng(4004);
  int certificates = 0;
  int failed = 0;
  int nominal_mismatch = 0;
  for (int t = 0; t < 200; ++t) {
    const Index n = 1 + t % 3;
    const SystemQuad sys(rng.matrix(n, n), rng.matrix(n, 1), rng.matrix(n, n, 0.4), rng.matrix(n, 1, 0.4));
    const UncertaintyModel unc{rng.matrix(n, 1, 0.6), rng.matrix(1, n, 0.6), {}, {}};
    const auto r = synthesize_quadratic_stabilizer(sys, unc, t);
    if (r.feasible) {
      ++certificates;
      const auto v = verify_quadratic_stability(sys, unc, r.certificate->K, r.certificate->P, t, 100);
      failed += v.verdict != QsVerdict::kCertified || v.worst_sampled >= 0;
    }
    const UncertaintyModel none{Matrix::Zero(n, 1), Matrix::Zero(1, n), {}, {}};
    const auto nominal = synthesize_quadratic_stabilizer(sys, none, t);
    const auto st = is_stabilizable(sys);
    nominal_mismatch += st.decision == Decision::kUnknown || nominal.feasible != (st.decision == Decision::kYes);
  }
  const bool ok = certificates > 0 && failed == 0 && nominal_mismatch == 0;
  return {ok, std::to_string(failed) + " failed / " + std::to_string(certificates) + " certificates, " +
                  std::to_string(nominal_mismatch) + " zero-uncertainty mismatches / 200"};
}

Outcome simulation_cross_check() {
  const auto t0 = Clock::now();
  testutil::Rng rng(4005);
  int loops = 0;
  double worst = 0.0;
  bool reproducible = true;
  for (int t = 0; loops < 20 && t < 500; ++t) {
    const Index n = 1 + t % 3;
    const SystemQuad sys(rng.matrix(n, n) - Matrix::Identity(n, n), rng.matrix(n, 1), rng.matrix(n, n, 0.5),
                         rng.matrix(n, 1, 0.5));
    const Matrix K = rng.matrix(1, n, 0.3);
    if (spectral_abscissa(build_closed_loop_operator(sys, K)) > -0.1) continue;
    ++loops;
    SimConfig cfg;
    cfg.x0 = Vector::Ones(n);
    cfg.T = 1.0;
    cfg.trials = 10000;
    cfg.grid_points = 10;
    cfg.seed = 1000 + static_cast<std::uint64_t>(t);
    // Low-noise fast loops have standard errors below the O(dt) weak error of
    // a single step size; the two-step extrapolation removes that term.
    cfg.extrapolate = true;
    const auto cmp = compare_empirical_vs_exact(sys, K, cfg);
    worst = std::max(worst, cmp.diverged ? INFINITY : cmp.max_deviation);
    if (loops == 1) {
      const auto a = euler_maruyama_ensemble(sys, K, cfg);
      cfg.threads = 1;
      const auto b = euler_maruyama_ensemble(sys, K, cfg);
      for (std::size_t k = 0; k < a.mean.size(); ++k) reproducible = reproducible && a.mean[k] == b.mean[k];
    }
  }
  const double ms = ms_since(t0);
  const bool ok = loops == 20 && worst <= kSimSigmas && reproducible && ms < kBudgetSimMs;
  return {ok, std::to_string(loops) + " loops, worst " + fmt("%.2f", worst) + " standard errors, " +
                  (reproducible ? "bit-reproducible" : "NOT reproducible") + ", " + fmt("%.1f", ms / 1000) + " s"};
}

Outcome lift_discrepancy() {
  Matrix A(2, 2);
  A << -3, 0.5, -1, -1;
  const Matrix C = Matrix(Eigen::Vector2d(2, 0).asDiagonal());
  const SystemQuad sys(A, Matrix::Identity(2, 2), C, C);
  const Matrix K = Matrix::Identity(2, 2);
  const Matrix M = build_closed_loop_operator(sys, K).M;
  Matrix printed(3, 3);
  printed << 0, 1, 0, -1, 0, 0.5, 0, -2, 1;

  testutil::Rng rng(4006);
  double faith = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Matrix X = rng.symmetric(2);
    const Matrix lifted = smat(Vector(M * svec(X)));
    const Matrix direct = testutil::direct_oracle(sys.closed_drift(K), {sys.closed_diffusion(K)}, X);
    faith = std::max(faith, (lifted - direct).norm() / (1.0 + direct.norm()));
  }
  const double gap = (M - printed).norm();
  std::printf("  definitional L(K) rows: [%g %g %g] [%g %g %g] [%g %g %g]\n", M(0, 0), M(0, 1), M(0, 2), M(1, 0),
              M(1, 1), M(1, 2), M(2, 0), M(2, 1), M(2, 2));
  std::printf("  printed matrix rows:    [%g %g %g] [%g %g %g] [%g %g %g]\n", printed(0, 0), printed(0, 1),
              printed(0, 2), printed(1, 0), printed(1, 1), printed(1, 2), printed(2, 0), printed(2, 1),
              printed(2, 2));
  const bool ok = faith <= kFaithfulnessTol;
  return {ok, "faithfulness error " + fmt("%.1e", faith) + ", documented gap to printed matrix " + fmt("%.3g", gap)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"adjoint lift spectrum {7,10,14}", golden_diagonal_spectrum},
      {"output lift integer instance", golden_output_lift},
      {"unstabilizable pair goldens", golden_unstabilizable_pair},
      {"scalar stabilizability and GARE suite", scalar_suite},
      {"observability/detectability goldens", observability_goldens},
      {"lifted PBH vs rank criterion", liu_agreement},
      {"GARE comparison and homotopy", gare_monotonicity},
      {"robust synthesis soundness", synthesis_soundness},
      {"Euler-Maruyama vs exact moments", simulation_cross_check},
      {"identity-gain lift regression", lift_discrepancy},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
