#include <gtest/gtest.h>

#include "stochlin/lift.hpp"
#include "stochlin/linalg.hpp"
#include "stochlin/robust.hpp"
#include "stochlin/spectra.hpp"
#include "stochlin/stabilizability.hpp"
#include "stochlin/stability.hpp"
#include "test_util.hpp"

using namespace stochlin;

namespace {

Matrix one(double v) { return Matrix::Constant(1, 1, v); }

UncertaintyModel matched(const Matrix& E, const Matrix& G) { return {E, G, {}, {}}; }

// Largest eigenvalue of the closed-loop generator
//   P(A + EFG + BK) + (.)'P + (C + DK)'P(C + DK).
double generator_max(const SystemQuad& sys, const Matrix& E, const Matrix& G, const Matrix& F,
                     const Matrix& K, const Matrix& P) {
  const Matrix Acl = sys.A() + E * F * G + sys.B() * K;
  const Matrix Ccl = sys.closed_diffusion(K);
  return linalg::max_eigenvalue(P * Acl + Acl.transpose() * P + Ccl.transpose() * P * Ccl);
}

}  // namespace

TEST(QsLmi, ScalarLayouts) {
  const SystemQuad sys = SystemQuad::scalar(0, 1, 0, 0);
  const auto unc = matched(one(1), one(1));

  const QsLmi displayed = assemble_qs_lmi(sys, unc, QsForm::kThreeBlock);
  Vector x = Vector::Zero(displayed.expr.num_vars);
  x(displayed.x_offset) = 1;
  x(displayed.y_offset) = -2;
  Matrix expected(3, 3);
  expected << -4, 0, 1, 0, -1, 0, 1, 0, -1;
  EXPECT_EQ(displayed.expr.blocks[0].evaluate(x), expected);
  EXPECT_EQ(displayed.eps_offset, -1);

  const QsLmi with_ee = assemble_qs_lmi(sys, unc, QsForm::kThreeBlockWithEE);
  expected(0, 0) = -3;
  EXPECT_EQ(with_ee.expr.blocks[0].evaluate(x), expected);

  const QsLmi primal = assemble_qs_lmi(sys, unc);
  Vector z = Vector::Zero(primal.expr.num_vars);
  z(primal.x_offset) = 1;
  z(primal.y_offset) = -2;
  z(primal.eps_offset) = 1;
  EXPECT_EQ(primal.expr.blocks[0].evaluate(z), expected);
  EXPECT_STREQ(to_string(QsForm::kPrimal), "primal");
}

TEST(QsLmi, ZeroUncertaintyMatchesNominalLmi) {
  Matrix A(2, 2), B(2, 1), C(2, 2);
  A << 0, 1, 0, -1;
  B << 0, 1;
  C << 1, -1, 0, 0;
  const SystemQuad sys(A, B, C, Matrix::Zero(2, 1));
  const auto unc = matched(Matrix::Zero(2, 1), Matrix::Zero(1, 2));
  const QsLmi q = assemble_qs_lmi(sys, unc, QsForm::kThreeBlock);
  EXPECT_EQ(lmi::feasibility(q.expr, lmi::Goal::kStrictNegative).status, lmi::SdpStatus::kInfeasible);
  EXPECT_FALSE(synthesize_quadratic_stabilizer(sys, unc).feasible);
}

TEST(QsLmi, ShapeMismatchRejected) {
  const SystemQuad sys = SystemQuad::scalar(0, 1, 0, 0);
  EXPECT_THROW(assemble_qs_lmi(sys, matched(Matrix::Ones(2, 1), one(1))), InvalidInput);
  EXPECT_THROW(assemble_qs_lmi(sys, matched(one(1), Matrix::Ones(1, 2))), InvalidInput);
}

TEST(QsSynthesis, ScalarReferenceCases) {
  const auto unc = matched(one(1), one(1));
  const SystemQuad sys = SystemQuad::scalar(0, 1, 0, 0);
  const auto r = synthesize_quadratic_stabilizer(sys, unc);
  ASSERT_TRUE(r.feasible) << r.diagnostic;
  const double k = r.certificate->K(0, 0);
  EXPECT_LT(k + 1.0, 0.0);  // worst case f = 1
  EXPECT_GT(r.certificate->alpha, 0.0);

  EXPECT_FALSE(synthesize_quadratic_stabilizer(SystemQuad::scalar(0, 0, 0, 0), unc).feasible);
}

TEST(QsSynthesis, ZeroUncertaintyReducesToStabilizabilityProperty) {
  testutil::Rng rng(91);
  int yes = 0;
  for (int t = 0; t < 60; ++t) {
    const Index n = 1 + t % 3;
    const Index m = 1 + (t / 3) % 2;
    const SystemQuad sys(rng.matrix(n, n), rng.matrix(n, m), rng.matrix(n, n, 0.5), rng.matrix(n, m, 0.5));
    const auto st = is_stabilizable(sys);
    if (st.decision == Decision::kUnknown) continue;
    const auto r = synthesize_quadratic_stabilizer(sys, matched(Matrix::Zero(n, 1), Matrix::Zero(1, n)), t);
    EXPECT_EQ(r.feasible, st.decision == Decision::kYes) << "t=" << t;
    if (r.feasible) {
      ++yes;
      EXPECT_LT(spectral_abscissa(build_closed_loop_operator(sys, r.certificate->K)), 0);
    }
  }
  EXPECT_GT(yes, 10);
}

// Feasible syntheses verify; for infeasible ones, a nominal stabilizer with its
// Lyapunov matrix must not be certified either (the certification is exact for
// drift uncertainty, so a certificate would contradict infeasibility).
TEST(QsSynthesis, FeasibilityMatchesVerificationProperty) {
  testutil::Rng rng(92);
  int feasible = 0;
  int infeasible_checked = 0;
  for (int t = 0; t < 200; ++t) {
    const Index n = 1 + t % 3;
    const SystemQuad sys(rng.matrix(n, n), rng.matrix(n, 1), rng.matrix(n, n, 0.4), rng.matrix(n, 1, 0.4));
    const auto unc = matched(rng.matrix(n, 1, 0.6), rng.matrix(1, n, 0.6));
    const auto r = synthesize_quadratic_stabilizer(sys, unc, t);
    if (r.feasible) {
      ++feasible;
      const auto v = verify_quadratic_stability(sys, unc, r.certificate->K, r.certificate->P, t);
      EXPECT_EQ(v.verdict, QsVerdict::kCertified) << "t=" << t;
      EXPECT_LT(v.worst_sampled, 0) << "t=" << t;
      continue;
    }
    const auto st = is_stabilizable(sys);
    if (st.decision != Decision::kYes) continue;
    const Matrix K = *st.witness_gain;
    const auto lyap = solve_gen_lyapunov({sys.closed_drift(K), {sys.closed_diffusion(K)}, Matrix::Identity(n, n)});
    if (!lyap.P || !linalg::is_positive_definite(*lyap.P, 1e-9)) continue;
    ++infeasible_checked;
    EXPECT_NE(verify_quadratic_stability(sys, unc, K, *lyap.P, t).verdict, QsVerdict::kCertified) << "t=" << t;
  }
  EXPECT_GT(feasible, 40);
  EXPECT_GT(infeasible_checked, 5);
}

TEST(QsSynthesis, ScalingInvariance) {
  testutil::Rng rng(93);
  const SystemQuad sys(rng.matrix(2, 2), rng.matrix(2, 1), rng.matrix(2, 2, 0.3), rng.matrix(2, 1, 0.3));
  const auto unc = matched(rng.matrix(2, 1, 0.3), rng.matrix(1, 2, 0.3));
  const QsLmi q = assemble_qs_lmi(sys, unc);
  const auto sol = lmi::feasibility(q.expr, lmi::Goal::kStrictNegative);
  ASSERT_EQ(sol.status, lmi::SdpStatus::kFeasible);
  auto gain = [&](const Vector& x) {
    const Matrix X = smat(Vector(x.segment(q.x_offset, 3)));
    const Matrix Y = linalg::unvec_rows(x.segment(q.y_offset, 2), 1, 2);
    return Matrix(Y * X.inverse());
  };
  const Matrix K = gain(sol.x);
  for (double s : {0.1, 10.0}) {
    EXPECT_NEAR(q.expr.margin(s * sol.x), s * sol.margin, 1e-9 * (1 + s));
    EXPECT_LE((gain(s * sol.x) - K).norm(), 1e-9 * (1 + K.norm()));
  }
}

TEST(QsVerify, ReferenceCases) {
  const auto unc = matched(one(1), one(1));
  const auto v = verify_quadratic_stability(SystemQuad::scalar(0, 1, 0, 0), unc, one(-2), one(1));
  EXPECT_EQ(v.verdict, QsVerdict::kCertified);
  EXPECT_GE(v.alpha, 2.0 - 1e-6);
  EXPECT_EQ(v.samples, 100);

  const auto r = verify_quadratic_stability(SystemQuad::scalar(0, 0, 0, 0), unc, one(0), one(1));
  EXPECT_EQ(r.verdict, QsVerdict::kRefuted);
  ASSERT_TRUE(r.witness_F.has_value());
  EXPECT_NEAR((*r.witness_F)(0, 0), 1.0, 1e-6);
  EXPECT_STREQ(to_string(r.verdict), "refuted");
}

TEST(QsVerify, ZeroUncertaintyIsLyapunovCheck) {
  const Matrix I = Matrix::Identity(2, 2);
  const SystemQuad sys(-I, Matrix::Zero(2, 1), 0.5 * I, Matrix::Zero(2, 1));
  const auto unc = matched(Matrix::Zero(2, 1), Matrix::Zero(1, 2));
  const auto v = verify_quadratic_stability(sys, unc, Matrix::Zero(1, 2), I);
  EXPECT_EQ(v.verdict, QsVerdict::kCertified);
  // Generator of x'x: -2 + 0.25.
  EXPECT_NEAR(v.alpha, 1.75, 1e-6);
}

TEST(QsVerify, NonPositiveCertificateRejected) {
  const auto unc = matched(one(1), one(1));
  EXPECT_THROW(verify_quadratic_stability(SystemQuad::scalar(0, 1, 0, 0), unc, one(-2), one(-1)),
               InvalidInput);
}

TEST(QsVerify, AlphaNonincreasingInUncertaintySize) {
  testutil::Rng rng(94);
  const SystemQuad sys(rng.matrix(2, 2) - 3.0 * Matrix::Identity(2, 2), rng.matrix(2, 1),
                       rng.matrix(2, 2, 0.3), rng.matrix(2, 1, 0.3));
  const Matrix K = Matrix::Zero(1, 2);
  const auto lyap =
      solve_gen_lyapunov({sys.closed_drift(K), {sys.closed_diffusion(K)}, Matrix::Identity(2, 2)});
  ASSERT_TRUE(lyap.P && linalg::is_positive_definite(*lyap.P, 1e-9));
  const Matrix E = rng.matrix(2, 1);
  const Matrix G = rng.matrix(1, 2);
  double prev = std::numeric_limits<double>::infinity();
  for (double s = 0.0; s <= 2.0; s += 0.25) {
    const auto v = verify_quadratic_stability(sys, matched(E, s * G), K, *lyap.P);
    if (v.verdict != QsVerdict::kCertified) break;
    EXPECT_LE(v.alpha, prev + 1e-7) << "s=" << s;
    prev = v.alpha;
  }
}

TEST(QsVerify, SampledWitnessViolatesInequality) {
  testutil::Rng rng(95);
  int refuted = 0;
  for (int t = 0; t < 40; ++t) {
    const SystemQuad sys(rng.matrix(2, 2), rng.matrix(2, 1), rng.matrix(2, 2, 0.3), rng.matrix(2, 1, 0.3));
    const Matrix E = rng.matrix(2, 2);
    const Matrix G = rng.matrix(2, 2);
    const Matrix K = rng.matrix(1, 2);
    const Matrix P = rng.pd(2);
    const auto v = verify_quadratic_stability(sys, matched(E, G), K, P, t);
    if (v.verdict != QsVerdict::kRefuted) continue;
    ++refuted;
    ASSERT_TRUE(v.witness_F.has_value());
    EXPECT_LE(linalg::max_eigenvalue(v.witness_F->transpose() * *v.witness_F), 1.0 + 1e-12);
    EXPECT_GE(generator_max(sys, E, G, *v.witness_F, K, P), -1e-12 * (1.0 + P.norm()));
  }
  EXPECT_GT(refuted, 10);
}

TEST(SampleContraction, NormBoundAndDeterminism) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Matrix F = sample_contraction(3, 2, s);
    EXPECT_LE(linalg::max_eigenvalue(F.transpose() * F), 1.0 + 1e-12);
    EXPECT_EQ(F, sample_contraction(3, 2, s));
  }
}

TEST(QsExtended, ReducesToMatchedSynthesis) {
  testutil::Rng rng(96);
  for (int t = 0; t < 20; ++t) {
    const SystemQuad sys(rng.matrix(2, 2), rng.matrix(2, 1), rng.matrix(2, 2, 0.4), rng.matrix(2, 1, 0.4));
    const Matrix E = rng.matrix(2, 1, 0.6);
    const Matrix G = rng.matrix(1, 2, 0.6);
    const auto a = synthesize_quadratic_stabilizer(sys, matched(E, G), t);
    const auto b = synthesize_extended(sys, {E, G, Matrix::Zero(1, 1), Matrix::Zero(1, 2)}, t);
    ASSERT_EQ(a.feasible, b.feasible) << "t=" << t;
    if (a.feasible) {
      EXPECT_LE((a.certificate->K - b.certificate->K).norm(), 1e-9 * (1 + a.certificate->K.norm()));
      EXPECT_LE((a.certificate->P - b.certificate->P).norm(), 1e-9 * (1 + a.certificate->P.norm()));
    }
  }
}

TEST(QsExtended, InputUncertaintySweep) {
  const SystemQuad sys = SystemQuad::scalar(0, 1, 0, 0);
  // dA = -f, dB = g2 f: at f = -1/g2 the input vanishes and the drift is positive.
  bool lost = false;
  for (double g2 : {0.0, 0.1, 0.5, 0.9, 1.5, 3.0}) {
    const auto r = synthesize_extended(sys, {one(1), one(-1), one(g2), one(0)});
    if (g2 <= 0.1) {
      EXPECT_TRUE(r.feasible) << "g2=" << g2;
    }
    if (g2 >= 1.5) {
      EXPECT_FALSE(r.feasible) << "g2=" << g2;
    }
    if (lost) {
      EXPECT_FALSE(r.feasible) << "feasibility came back at g2=" << g2;
    }
    lost |= !r.feasible;
  }
  EXPECT_TRUE(lost);
}

TEST(QsExtended, CertificateHoldsOnSamples) {
  testutil::Rng rng(97);
  int feasible = 0;
  for (int t = 0; t < 30; ++t) {
    const SystemQuad sys(rng.matrix(2, 2), rng.matrix(2, 1), rng.matrix(2, 2, 0.3), rng.matrix(2, 1, 0.3));
    const UncertaintyModel unc{rng.matrix(2, 1, 0.5), rng.matrix(1, 2, 0.5), rng.matrix(1, 1, 0.3),
                               rng.matrix(1, 2, 0.3)};
    const auto r = synthesize_extended(sys, unc, t);
    if (!r.feasible) continue;
    ++feasible;
    const Matrix& K = r.certificate->K;
    const Matrix& P = r.certificate->P;
    for (std::uint64_t s = 0; s < 50; ++s) {
      const Matrix F = sample_contraction(1, 1, 1000 * t + s);
      const Matrix dF = unc.E * F;
      const Matrix Acl = sys.A() + dF * unc.G1 + (sys.B() + dF * unc.G2) * K;
      const Matrix Ccl = sys.C() + dF * unc.G3 + sys.D() * K;
      EXPECT_LT(linalg::max_eigenvalue(P * Acl + Acl.transpose() * P + Ccl.transpose() * P * Ccl), 0)
          << "t=" << t;
    }
  }
  EXPECT_GT(feasible, 5);
}
