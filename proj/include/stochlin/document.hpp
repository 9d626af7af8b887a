#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stochlin/robust.hpp"
#include "stochlin/sim.hpp"
#include "stochlin/types.hpp"

namespace stochlin {

/// Parse failure; the message names the offending field or line.
class ParseError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// One system description. Matrices are row-major nested arrays in the file;
/// "c" and "d" hold either one matrix or a list of matrices (one per noise).
struct SystemDocument {
  std::string name;
  Matrix A;
  std::optional<Matrix> B;
  std::vector<Matrix> Cs;
  std::vector<Matrix> Ds;
  /// Whether "c"/"d" were written as lists (kept for round trips).
  bool noise_list = false;
  std::optional<Matrix> Q_output;
  std::optional<Matrix> Q_weight;
  std::optional<Matrix> R;
  std::optional<UncertaintyModel> uncertainty;
  std::optional<SimConfig> sim;

  [[nodiscard]] Index n() const { return A.rows(); }
  [[nodiscard]] Index m() const { return B ? B->cols() : 0; }
  /// Single-noise plant; throws InvalidInput naming the missing block.
  [[nodiscard]] SystemQuad system() const;
};

SystemDocument parse_system_text(const std::string& text, const std::string& source = "<input>");
SystemDocument parse_system(const std::string& path);
std::string serialize_system(const SystemDocument& doc);

/// Gain file: {"k": [[...]]} or a bare nested array.
Matrix parse_gain_text(const std::string& text, const std::string& source = "<gain>");
Matrix parse_gain(const std::string& path);

}  // namespace stochlin
