#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "stochlin/lmi.hpp"
#include "stochlin/types.hpp"

namespace stochlin {

/// [dA, dB, dC] = E F [G1, G2, G3] with F'F <= I. G2 and G3 may be left
/// empty (treated as zero); G1 is the G of the matched model dA = E F G.
struct UncertaintyModel {
  Matrix E;
  Matrix G1;
  Matrix G2;
  Matrix G3;

  [[nodiscard]] Index k() const { return E.cols(); }
  [[nodiscard]] Index j() const { return G1.rows(); }
  [[nodiscard]] bool extended() const;
  /// Throws InvalidInput on inconsistent shapes; fills empty G2/G3 with zeros.
  [[nodiscard]] UncertaintyModel normalized(const SystemQuad& sys) const;
};

struct QuadStabCertificate {
  Matrix P;
  Matrix K;
  double alpha = 0.0;
  double lmi_margin = 0.0;
};

enum class QsForm {
  /// P-congruent form with the S-procedure multiplier as a variable:
  ///   [[AX + XA' + BY + Y'B' + eps EE', (CX + DY)', XG'],
  ///    [CX + DY, -X, 0], [GX, 0, -eps I]] < 0.
  kPrimal,
  /// The three-block form with constant -I corner and no EE' term.
  kThreeBlock,
  /// As kThreeBlock with the constant EE' added to the leading block.
  kThreeBlockWithEE,
};

const char* to_string(QsForm f);

struct QsLmi {
  lmi::LinearMatrixExpr expr;
  Index x_offset = 0;
  Index y_offset = 0;
  /// -1 when the form has no multiplier variable.
  Index eps_offset = -1;
};

QsLmi assemble_qs_lmi(const SystemQuad& sys, const UncertaintyModel& unc,
                      QsForm form = QsForm::kPrimal);

struct QsSynthesis {
  bool feasible = false;
  std::optional<QuadStabCertificate> certificate;
  double lmi_margin = 0.0;
  std::string diagnostic;
};

QsSynthesis synthesize_quadratic_stabilizer(const SystemQuad& sys, const UncertaintyModel& unc,
                                            std::uint64_t seed = 1);

enum class QsVerdict { kCertified, kRefuted, kInconclusive };

const char* to_string(QsVerdict v);

struct QsVerification {
  QsVerdict verdict = QsVerdict::kInconclusive;
  /// Largest alpha with L[x'Px] <= -alpha |x|^2 for every admissible F
  /// (exact for uncertainty confined to the drift and input matrices).
  double alpha = 0.0;
  std::optional<Matrix> witness_F;
  /// Largest eigenvalue of the closed-loop generator over the sampled F.
  double worst_sampled = 0.0;
  int samples = 0;
  std::string diagnostic;
};

QsVerification verify_quadratic_stability(const SystemQuad& sys, const UncertaintyModel& unc,
                                           const Matrix& K, const Matrix& P, std::uint64_t seed = 1,
                                           int samples = 100);

/// Uncertainty in A, B and C at once. Reduces to the matched synthesis when
/// G2 = G3 = 0.
QsSynthesis synthesize_extended(const SystemQuad& sys, const UncertaintyModel& unc,
                                std::uint64_t seed = 1);

/// Random F with F'F <= I: orthogonal factors around singular values drawn
/// uniformly from [0, 1].
Matrix sample_contraction(Index rows, Index cols, std::uint64_t seed);

}  // namespace stochlin
