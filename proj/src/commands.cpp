#include "stochlin/commands.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include "json_util.hpp"
#include "stochlin/gare.hpp"
#include "stochlin/lift.hpp"
#include "stochlin/observability.hpp"
#include "stochlin/robust.hpp"
#include "stochlin/sim.hpp"
#include "stochlin/spectra.hpp"
#include "stochlin/stability.hpp"
#include "stochlin/stabilizability.hpp"

namespace stochlin {

namespace {

using jsonio::Json;

struct Context {
  const SystemDocument& doc;
  const RunOptions& opts;
  std::optional<std::string> csv;
};

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

bool is_number_row(const Json& j) {
  if (!j.is_array()) return false;
  for (const auto& v : j) {
    if (!v.is_number()) return false;
  }
  return true;
}

bool is_matrix(const Json& j) {
  if (!j.is_array() || j.empty()) return false;
  for (const auto& r : j) {
    if (!is_number_row(r) || r.empty()) return false;
  }
  return true;
}

bool is_complex(const Json& j) {
  return j.is_object() && j.size() == 2 && j.contains("re") && j.contains("im") && j["re"].is_number();
}

std::string scalar_text(const Json& j) {
  if (j.is_number()) return fmt6(j.get<double>());
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
  if (j.is_null()) return "-";
  if (is_complex(j)) {
    const double im = j["im"].get<double>();
    return fmt6(j["re"].get<double>()) + (im < 0 ? " - " : " + ") + fmt6(std::abs(im)) + "i";
  }
  return j.dump();
}

void render(std::ostringstream& os, const Json& j, int indent) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  for (const auto& [key, v] : j.items()) {
    if (is_matrix(v)) {
      os << pad << key << ":\n";
      for (const auto& row : v) {
        os << pad << "  [";
        for (std::size_t c = 0; c < row.size(); ++c) os << (c ? " " : "") << fmt6(row[c].get<double>());
        os << "]\n";
      }
    } else if (v.is_object() && !is_complex(v)) {
      os << pad << key << ":\n";
      render(os, v, indent + 2);
    } else if (v.is_array() && !v.empty() && (is_number_row(v) || is_complex(v[0]) || v[0].is_string())) {
      os << pad << key << ": [";
      for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << scalar_text(v[i]);
      os << "]\n";
    } else if (v.is_array() && !v.empty()) {
      os << pad << key << ":\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        os << pad << "  - #" << i << "\n";
        if (v[i].is_object()) {
          render(os, v[i], indent + 4);
        } else {
          os << pad << "    " << scalar_text(v[i]) << "\n";
        }
      }
    } else {
      os << pad << key << ": " << (v.is_array() ? "[]" : scalar_text(v)) << "\n";
    }
  }
}

Json tolerances_json(const Tolerances& t) {
  return Json{{"eig_rel", t.eig_rel},         {"margin", t.margin}, {"sym_rel", t.sym_rel},
              {"pd_rel", t.pd_rel},           {"unremovable", t.unremovable},
              {"gare_rel", t.gare_rel}};
}

Json spectrum_json(const Spectrum& s) {
  Json eig = Json::array();
  for (const auto& z : s.eigenvalues) eig.push_back(jsonio::complex(z));
  Json groups = Json::array();
  for (const auto& g : s.groups) {
    groups.push_back(Json{{"value", jsonio::complex(g.value)},
                          {"algebraic", g.algebraic},
                          {"geometric", g.geometric}});
  }
  return Json{{"eigenvalues", eig}, {"groups", groups}, {"abscissa", s.abscissa()},
              {"grouping_tolerance", s.tolerance}};
}

const char* yes_no(Decision d, const char* yes, const char* no) {
  switch (d) {
    case Decision::kYes: return yes;
    case Decision::kNo: return no;
    case Decision::kUnknown: return "unknown";
  }
  return "unknown";
}

Matrix gain_or_zero(const Context& c) {
  const Index n = c.doc.n();
  const Index m = c.doc.m();
  if (c.opts.gain) {
    if (!c.doc.B) throw InvalidInput("a gain was given but the document has no 'b'");
    if (c.opts.gain->rows() != m || c.opts.gain->cols() != n) {
      throw InvalidInput("gain must be " + std::to_string(m) + "x" + std::to_string(n) + ", got " +
                         std::to_string(c.opts.gain->rows()) + "x" + std::to_string(c.opts.gain->cols()));
    }
    return *c.opts.gain;
  }
  return Matrix::Zero(m, n);
}

// Closed loop (A + BK, C_i + D_i K); open loop when the document has no B.
void closed_loop(const Context& c, Matrix& F, std::vector<Matrix>& Gs) {
  F = c.doc.A;
  Gs = c.doc.Cs;
  if (!c.doc.B) return;
  const Matrix K = gain_or_zero(c);
  F += *c.doc.B * K;
  for (std::size_t i = 0; i < Gs.size() && i < c.doc.Ds.size(); ++i) Gs[i] += c.doc.Ds[i] * K;
}

void need_stochastic_plant(const SystemDocument& doc) {
  if (!doc.B) throw InvalidInput("this command needs the input matrix 'b'");
  if (doc.Cs.empty()) throw InvalidInput("this command needs the diffusion matrix 'c'");
  if (doc.Ds.size() != doc.Cs.size()) throw InvalidInput("this command needs the diffusion input matrix 'd'");
}

OutputSystem output_system(const SystemDocument& doc) {
  if (!doc.Q_output) throw InvalidInput("this command needs the output matrix 'q_output'");
  return {doc.A, doc.Cs, *doc.Q_output};
}

Json unremovable_json(const UnremovableSpectrumItem& it) {
  return Json{{"lambda", jsonio::complex(it.lambda)},
              {"X", jsonio::cmatrix(it.X)},
              {"residual_eigen", it.residual_eigen},
              {"residual_input", it.residual_input},
              {"residual_diffusion", it.residual_diffusion},
              {"complex", it.complex_flag}};
}

// ------------------------------------------------------------------ commands

Json cmd_stabilizable(Context& c) {
  need_stochastic_plant(c.doc);
  const StabilizabilityReport r = is_stabilizable(c.doc.A, *c.doc.B, c.doc.Cs, c.doc.Ds, c.opts.tol);
  Json out{{"verdict", yes_no(r.decision, "stabilizable", "not-stabilizable")}, {"method", r.method}};
  Json res{{"lmi_margin", r.lmi_margin}};
  if (r.witness_gain) res["gain"] = jsonio::matrix(*r.witness_gain);
  if (r.witness_certificate) res["certificate_P"] = jsonio::matrix(*r.witness_certificate);
  if (r.closed_loop_abscissa) res["closed_loop_abscissa"] = *r.closed_loop_abscissa;
  if (r.scalar_criterion) res["scalar_criterion"] = *r.scalar_criterion;
  if (!r.diagnostic.empty()) res["diagnostic"] = r.diagnostic;
  out["result"] = res;
  return out;
}

Json cmd_weakly(Context& c) {
  const WeakStabilizabilityReport r = is_weakly_stabilizable(c.doc.system(), c.opts.tol);
  Json res = Json::object();
  if (r.witness_gain) res["gain"] = jsonio::matrix(*r.witness_gain);
  if (!r.diagnostic.empty()) res["diagnostic"] = r.diagnostic;
  return Json{{"verdict", yes_no(r.decision, "weakly-stabilizable", "not-weakly-stabilizable")},
              {"method", r.method},
              {"result", res}};
}

Json cmd_unremovable(Context& c) {
  const SystemQuad sys = c.doc.system();
  const auto items = unremovable_spectra(sys, c.opts.tol);
  Json arr = Json::array();
  bool obstruction = false;
  for (const auto& it : items) {
    arr.push_back(unremovable_json(it));
    if (it.lambda.real() >= -c.opts.tol.margin) obstruction = true;
  }
  Json res{{"items", arr}};
  try {
    const PbhReport p = stochastic_pbh(sys, c.opts.tol);
    res["pbh"] = Json{{"applicable", p.applicable},
                      {"decision", yes_no(p.decision, "stabilizable", "not-stabilizable")}};
    if (p.c1) res["pbh"]["c1"] = jsonio::matrix(*p.c1);
  } catch (const NotSupported& e) {
    res["pbh"] = Json{{"applicable", false}, {"reason", e.what()}};
  }
  return Json{{"verdict", obstruction ? "unremovable-in-closed-right-half-plane" : "none-in-closed-right-half-plane"},
              {"method", "eigenspaces of the adjoint drift lift intersected with the input constraints"},
              {"result", res}};
}

Json cmd_observable(Context& c) {
  const OutputSystem os = output_system(c.doc);
  const ObservabilityReport r = is_exactly_observable(os, c.opts.tol);
  Json res{{"rank", r.rank}, {"lifted_dimension", r.lifted_dimension}, {"pbh_agrees", r.pbh_agrees}};
  if (r.lambda) res["lambda"] = jsonio::complex(*r.lambda);
  if (r.witness) {
    res["witness_X"] = jsonio::cmatrix(*r.witness);
    res["witness_residual"] = r.witness_residual;
  }
  if (os.Cs.size() == 1) {
    const LiuRankReport lr = liu_rank_criterion(os, liu_saturation_depth(c.doc.n()));
    res["word_rank"] = Json{{"rank", lr.rank}, {"depth", lr.depth}, {"observable", lr.observable}};
  }
  return Json{{"verdict", r.observable ? "exactly-observable" : "not-exactly-observable"},
              {"method", "Krylov rank of the lifted pair with PBH cross-check"},
              {"result", res}};
}

Json cmd_detectable(Context& c) {
  const OutputSystem os = output_system(c.doc);
  const DetectabilityReport r = is_stochastically_detectable(os, c.opts.tol);
  const DetectabilitySpectrumReport s = detectability_spectrum_check(os, c.opts.tol);
  Json res{{"dual_lmi_margin", r.dual.lmi_margin}};
  if (r.H) res["injection_H"] = jsonio::matrix(*r.H);
  Json sj{{"pass", s.pass}, {"conclusive", s.conclusive}};
  if (s.lambda) sj["lambda"] = jsonio::complex(*s.lambda);
  if (s.witness) sj["witness_X"] = jsonio::cmatrix(*s.witness);
  res["spectrum_check"] = sj;
  if (!r.dual.diagnostic.empty()) res["diagnostic"] = r.dual.diagnostic;
  return Json{{"verdict", yes_no(r.decision, "detectable", "not-detectable")},
              {"method", "stabilizability of the dual system"},
              {"result", res}};
}

Json cmd_gare(Context& c) {
  if (!c.doc.Q_weight) throw InvalidInput("this command needs the state weight 'q_weight'");
  if (!c.doc.R) throw InvalidInput("this command needs the input weight 'r'");
  const GareProblem prob{c.doc.system(), *c.doc.Q_weight, *c.doc.R};
  const GareSolution s = solve_gare_maximal(prob, c.opts.tol);
  Json crit = Json::array();
  for (const auto& e : s.classification.critical) crit.push_back(jsonio::complex(e.value));
  Json res{{"P", jsonio::matrix(s.P)},
           {"K", jsonio::matrix(s.K)},
           {"residual", s.residual},
           {"residual_tolerance", gare_tolerance(prob, c.opts.tol)},
           {"closed_loop_abscissa", s.classification.abscissa},
           {"strong", s.classification.strong},
           {"critical_eigenvalues", crit},
           {"maximal", s.maximal},
           {"sdp_iterations", s.sdp_iterations},
           {"newton_steps", s.newton_steps}};
  return Json{{"verdict", to_string(s.classification.label)},
              {"method", "trace maximization over the Riccati LMI with Newton refinement"},
              {"result", res}};
}

Json cmd_lyapunov(Context& c) {
  Matrix Q;
  if (c.doc.Q_weight) {
    Q = *c.doc.Q_weight;
  } else if (c.doc.Q_output) {
    Q = c.doc.Q_output->transpose() * *c.doc.Q_output;
  } else {
    throw InvalidInput("this command needs 'q_weight' or 'q_output'");
  }
  Matrix F;
  std::vector<Matrix> Gs;
  closed_loop(c, F, Gs);
  const GenLyapProblem prob{F, Gs, Q};
  const GenLyapSolution s = solve_gen_lyapunov(prob, c.opts.tol);
  if (s.singular) {
    return Json{{"verdict", "singular"},
                {"method", "lifted generalized Lyapunov operator"},
                {"result", Json{{"null_space_svec", jsonio::matrix(s.null_space)}}}};
  }
  const LyapunovClassification cl = classify_lyapunov_solution(prob, *s.P, c.opts.tol);
  Json res{{"P", jsonio::matrix(*s.P)},
           {"residual", s.residual},
           {"P_positive_definite", cl.p_positive_definite},
           {"P_positive_semidefinite", cl.p_positive_semidefinite},
           {"exactly_observable", cl.exactly_observable},
           {"detectable", cl.detectable}};
  return Json{{"verdict", to_string(cl.result)},
              {"method", "lifted generalized Lyapunov operator"},
              {"result", res}};
}

Json cmd_robust(Context& c) {
  if (!c.doc.uncertainty) throw InvalidInput("this command needs the 'uncertainty' block");
  const SystemQuad sys = c.doc.system();
  const std::uint64_t seed = c.opts.seed.value_or(1);
  const UncertaintyModel& u = *c.doc.uncertainty;
  const QsSynthesis s = u.extended() ? synthesize_extended(sys, u, seed)
                                     : synthesize_quadratic_stabilizer(sys, u, seed);
  Json res{{"lmi_margin", s.lmi_margin}, {"seed", seed}};
  if (s.certificate) {
    const QsVerification v = verify_quadratic_stability(sys, u, s.certificate->K, s.certificate->P, seed);
    res["K"] = jsonio::matrix(s.certificate->K);
    res["P"] = jsonio::matrix(s.certificate->P);
    res["alpha"] = s.certificate->alpha;
    res["verification"] = Json{{"verdict", to_string(v.verdict)},
                               {"alpha", v.alpha},
                               {"worst_sampled_generator_eigenvalue", v.worst_sampled},
                               {"samples", v.samples}};
  }
  if (!s.diagnostic.empty()) res["diagnostic"] = s.diagnostic;
  return Json{{"verdict", s.feasible ? "quadratically-stabilizable" : "no-certificate"},
              {"method", u.extended() ? "structured S-procedure LMI in (X, Y, eps1, eps2)"
                                      : "S-procedure LMI in (X, Y, eps), K = Y X^-1, P = X^-1"},
              {"result", res}};
}

Json cmd_simulate(Context& c) {
  if (!c.doc.sim) throw InvalidInput("this command needs the 'sim' block");
  need_stochastic_plant(c.doc);
  const SystemQuad sys = c.doc.system();
  SimConfig cfg = *c.doc.sim;
  if (c.opts.seed) cfg.seed = *c.opts.seed;
  const Matrix K = gain_or_zero(c);
  const SimComparison cmp = compare_empirical_vs_exact(sys, K, cfg);
  std::ostringstream csv;
  write_csv(csv, cmp);
  c.csv = csv.str();
  const double abscissa = spectral_abscissa(build_closed_loop_operator(sys, K));
  Json res{{"max_standardized_deviation", cmp.max_deviation},
           {"max_relative_error", cmp.max_relative_error},
           {"low_power", cmp.low_power},
           {"deterministic", cmp.deterministic},
           {"diverged", cmp.diverged},
           {"trials", cfg.trials},
           {"seed", cfg.seed},
           {"dt", effective_dt(sys, K, cfg)},
           {"extrapolate", cfg.extrapolate},
           {"closed_loop_abscissa", abscissa},
           {"grid_rows", cmp.rows.size()}};
  const char* verdict = cmp.diverged               ? "diverged"
                        : cmp.max_deviation <= 4.0 ? "within-4-standard-errors"
                                                   : "outside-4-standard-errors";
  return Json{{"verdict", verdict},
              {"method", "Euler-Maruyama ensemble against RK4 on the lifted moment ODE"},
              {"result", res}};
}

Json cmd_spectrum(Context& c) {
  Matrix F;
  std::vector<Matrix> Gs;
  closed_loop(c, F, Gs);
  const LiftedOperator L = build_drift_operator(F, Gs, LiftVariant::kAdjoint);
  const Spectrum s = spectrum(L, c.opts.tol);
  const StabilityVerdict v = is_ms_stable(F, Gs, c.opts.tol);
  Json res = spectrum_json(s);
  res["lifted_dimension"] = L.M.rows();
  return Json{{"verdict", to_string(v.verdict)},
              {"method", "eigenvalues of the adjoint closed-loop lift"},
              {"result", res}};
}

const std::map<std::string, std::function<Json(Context&)>>& registry() {
  static const std::map<std::string, std::function<Json(Context&)>> r{
      {"stabilizable", cmd_stabilizable},     {"weakly-stabilizable", cmd_weakly},
      {"unremovable-spectrum", cmd_unremovable}, {"observable", cmd_observable},
      {"detectable", cmd_detectable},          {"gare", cmd_gare},
      {"lyapunov", cmd_lyapunov},              {"robust-synthesize", cmd_robust},
      {"simulate", cmd_simulate},              {"spectrum", cmd_spectrum}};
  return r;
}

Json base_report(const std::string& command, const RunOptions& opts, const std::string& source) {
  Json j;
  j["version"] = kReportVersion;
  j["tool"] = "stochlin";
  j["tool_version"] = kToolVersion;
  j["command"] = command;
  j["input"] = Json{{"file", source}};
  if (opts.gain_path) j["input"]["gain_file"] = *opts.gain_path;
  if (opts.gain) j["input"]["gain"] = jsonio::matrix(*opts.gain);
  if (opts.seed) j["input"]["seed"] = *opts.seed;
  j["tolerances"] = tolerances_json(opts.tol);
  return j;
}

RunResult finish(Json report, ExitCode code, std::optional<std::string> csv) {
  RunResult out;
  out.exit_code = code;
  out.json = report.dump(2) + "\n";
  std::ostringstream os;
  render(os, report, 0);
  out.text = os.str();
  out.csv = std::move(csv);
  return out;
}

RunResult error_result(Json report, ExitCode code, const char* kind, const std::string& message) {
  report["status"] = "error";
  report["error"] = Json{{"kind", kind}, {"message", message}};
  return finish(std::move(report), code, std::nullopt);
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"stabilizable", "weakly-stabilizable", "unremovable-spectrum",
                                              "observable",   "detectable",          "gare",
                                              "lyapunov",     "robust-synthesize",   "simulate",
                                              "spectrum"};
  return names;
}

RunResult run_command(const std::string& command, const SystemDocument& doc, const RunOptions& opts,
                      const std::string& source) {
  Json report = base_report(command, opts, source);
  report["input"]["name"] = doc.name;
  report["input"]["n"] = doc.n();
  report["input"]["m"] = doc.m();
  report["input"]["noise_channels"] = doc.Cs.size();
  report["input"]["document"] = Json::parse(serialize_system(doc));
  const auto it = registry().find(command);
  if (it == registry().end()) {
    return error_result(std::move(report), ExitCode::kInvalidInput, "usage", "unknown command '" + command + "'");
  }
  Context ctx{doc, opts, std::nullopt};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Json body = it->second(ctx);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    report["status"] = "ok";
    for (auto& [k, v] : body.items()) report[k] = v;
    report["timing_ms"] = ms;
  } catch (const NotSupported& e) {
    return error_result(std::move(report), ExitCode::kInvalidInput, "not-supported", e.what());
  } catch (const InvalidInput& e) {
    return error_result(std::move(report), ExitCode::kInvalidInput, "invalid-input", e.what());
  } catch (const NumericalFailure& e) {
    return error_result(std::move(report), ExitCode::kNumericalFailure, "numerical-failure", e.what());
  } catch (const InternalConsistencyError& e) {
    return error_result(std::move(report), ExitCode::kNumericalFailure, "internal-consistency", e.what());
  }
  return finish(std::move(report), ExitCode::kOk, std::move(ctx.csv));
}

RunResult run_command_file(const std::string& command, const std::string& path, const RunOptions& opts) {
  if (registry().find(command) == registry().end()) {
    return error_result(base_report(command, opts, path), ExitCode::kInvalidInput, "usage",
                        "unknown command '" + command + "'");
  }
  SystemDocument doc;
  try {
    doc = parse_system(path);
  } catch (const InvalidInput& e) {
    return error_result(base_report(command, opts, path), ExitCode::kInvalidInput, "parse-error", e.what());
  }
  return run_command(command, doc, opts, path);
}

}  // namespace stochlin
