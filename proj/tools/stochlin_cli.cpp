// stochlin <command> <file> [--gain <file>] [--out <file>] [--format text|json]
//          [--seed N] [--tol-eig X] [--tol-margin X]

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "stochlin/commands.hpp"
#include "stochlin/document.hpp"

namespace {

int write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << data)) {
    std::cerr << "error: cannot write '" << path << "'\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Analysis of linear Ito systems dx = (Ax + Bu)dt + (Cx + Du)dw"};
  app.set_version_flag("--version", std::string(stochlin::kToolVersion));

  std::string command;
  std::string file;
  std::string gain_path;
  std::string out_path;
  std::string format = "text";
  std::uint64_t seed = 0;
  stochlin::RunOptions opts;

  std::string commands;
  for (const auto& c : stochlin::command_names()) commands += (commands.empty() ? "" : ", ") + c;
  app.add_option("command", command, "One of: " + commands)->required();
  app.add_option("file", file, "System description (JSON)")->required();
  app.add_option("--gain", gain_path, "Gain file: {\"k\": [[...]]} or a nested array");
  app.add_option("--out", out_path,
                 "Write the report here instead of standard output (simulate: the CSV trajectory)");
  app.add_option("--format", format, "Report format")->check(CLI::IsMember({"text", "json"}));
  auto* seed_opt = app.add_option("--seed", seed, "Seed for sampling and simulation");
  app.add_option("--tol-eig", opts.tol.eig_rel, "Relative eigenvalue tolerance")
      ->check(CLI::PositiveNumber);
  app.add_option("--tol-margin", opts.tol.margin, "Critical band half-width around Re = 0")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  opts.format = format == "json" ? stochlin::ReportFormat::kJson : stochlin::ReportFormat::kText;
  if (seed_opt->count() > 0) opts.seed = seed;
  if (!gain_path.empty()) {
    opts.gain_path = gain_path;
    try {
      opts.gain = stochlin::parse_gain(gain_path);
    } catch (const stochlin::InvalidInput& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }

  const stochlin::RunResult res = stochlin::run_command_file(command, file, opts);
  const std::string& report = res.formatted(opts.format);
  if (res.exit_code != stochlin::ExitCode::kOk) std::cerr << "error: see report\n";
  if (!out_path.empty() && res.csv) {
    if (const int rc = write_file(out_path, *res.csv)) return rc;
    std::cout << report;
  } else if (!out_path.empty()) {
    if (const int rc = write_file(out_path, report)) return rc;
  } else {
    std::cout << report;
  }
  return static_cast<int>(res.exit_code);
}
