#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stochlin/document.hpp"
#include "stochlin/types.hpp"

namespace stochlin {

inline constexpr const char* kToolVersion = "0.3.0";
/// Version of the JSON report layout.
inline constexpr const char* kReportVersion = "1";

enum class ExitCode : int { kOk = 0, kInvalidInput = 2, kNumericalFailure = 3 };

enum class ReportFormat { kText, kJson };

struct RunOptions {
  std::optional<Matrix> gain;
  std::optional<std::string> gain_path;
  std::optional<std::uint64_t> seed;
  ReportFormat format = ReportFormat::kText;
  Tolerances tol;
};

struct RunResult {
  ExitCode exit_code = ExitCode::kOk;
  /// Machine-readable report (always produced, also on errors).
  std::string json;
  /// Human-readable rendering; matrices to 6 significant digits.
  std::string text;
  /// simulate only: trajectory CSV.
  std::optional<std::string> csv;

  [[nodiscard]] const std::string& formatted(ReportFormat f) const {
    return f == ReportFormat::kJson ? json : text;
  }
};

const std::vector<std::string>& command_names();

/// Runs one analysis on a parsed document. Never throws for bad input or
/// numerical failure; those become exit codes and error reports.
RunResult run_command(const std::string& command, const SystemDocument& doc, const RunOptions& opts,
                      const std::string& source = "<document>");

/// Parses `path` first; parse errors are reported like any invalid input.
RunResult run_command_file(const std::string& command, const std::string& path, const RunOptions& opts);

}  // namespace stochlin
