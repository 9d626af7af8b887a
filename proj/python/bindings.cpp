#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stochlin/commands.hpp"
#include "stochlin/document.hpp"
#include "stochlin/gare.hpp"
#include "stochlin/lift.hpp"
#include "stochlin/observability.hpp"
#include "stochlin/robust.hpp"
#include "stochlin/spectra.hpp"
#include "stochlin/stabilizability.hpp"

namespace py = pybind11;
using namespace stochlin;

namespace {

py::dict stabilizability_dict(const StabilizabilityReport& r) {
  py::dict d;
  d["decision"] = to_string(r.decision);
  d["gain"] = r.witness_gain;
  d["certificate"] = r.witness_certificate;
  d["closed_loop_abscissa"] = r.closed_loop_abscissa;
  d["lmi_margin"] = r.lmi_margin;
  d["scalar_criterion"] = r.scalar_criterion;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mean-square analysis and synthesis for linear Ito systems";
  m.attr("__version__") = kToolVersion;

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_RuntimeError);
  py::register_exception<InternalConsistencyError>(m, "InternalConsistencyError", PyExc_RuntimeError);

  py::class_<Tolerances>(m, "Tolerances")
      .def(py::init<>())
      .def_readwrite("eig_rel", &Tolerances::eig_rel)
      .def_readwrite("margin", &Tolerances::margin)
      .def_readwrite("sym_rel", &Tolerances::sym_rel)
      .def_readwrite("pd_rel", &Tolerances::pd_rel)
      .def_readwrite("unremovable", &Tolerances::unremovable)
      .def_readwrite("gare_rel", &Tolerances::gare_rel);

  py::class_<SystemQuad>(m, "SystemQuad")
      .def(py::init<Matrix, Matrix, Matrix, Matrix>(), py::arg("A"), py::arg("B"), py::arg("C"),
           py::arg("D"))
      .def_static("scalar", &SystemQuad::scalar)
      .def_property_readonly("n", &SystemQuad::n)
      .def_property_readonly("m", &SystemQuad::m)
      .def_property_readonly("A", &SystemQuad::A)
      .def_property_readonly("B", &SystemQuad::B)
      .def_property_readonly("C", &SystemQuad::C)
      .def_property_readonly("D", &SystemQuad::D);

  m.def("svec", [](const Matrix& X) { return svec(X); });
  m.def("smat", [](const Vector& v) { return smat(v); });

  m.def(
      "closed_loop_lift",
      [](const SystemQuad& sys, const Matrix& K, bool adjoint) {
        return build_closed_loop_operator(sys, K, adjoint ? LiftVariant::kAdjoint : LiftVariant::kDirect).M;
      },
      py::arg("sys"), py::arg("K"), py::arg("adjoint") = false);

  m.def("output_lift", [](const Matrix& Q, Index n) { return build_output_lift(Q, n).M; });

  m.def(
      "spectrum",
      [](const SystemQuad& sys, const Matrix& K, const Tolerances& tol) {
        const Spectrum s = spectrum(build_closed_loop_operator(sys, K, LiftVariant::kAdjoint), tol);
        return s.eigenvalues;
      },
      py::arg("sys"), py::arg("K"), py::arg("tol") = Tolerances{});

  m.def(
      "is_stabilizable",
      [](const SystemQuad& sys, const Tolerances& tol) { return stabilizability_dict(is_stabilizable(sys, tol)); },
      py::arg("sys"), py::arg("tol") = Tolerances{});

  m.def(
      "is_exactly_observable",
      [](const Matrix& A, const std::vector<Matrix>& Cs, const Matrix& Q, const Tolerances& tol) {
        return is_exactly_observable({A, Cs, Q}, tol).observable;
      },
      py::arg("A"), py::arg("Cs"), py::arg("Q"), py::arg("tol") = Tolerances{});

  m.def(
      "solve_gare_maximal",
      [](const SystemQuad& sys, const Matrix& Q, const Matrix& R, const Tolerances& tol) {
        const GareSolution s = solve_gare_maximal({sys, Q, R}, tol);
        py::dict d;
        d["P"] = s.P;
        d["K"] = s.K;
        d["residual"] = s.residual;
        d["classification"] = to_string(s.classification.label);
        return d;
      },
      py::arg("sys"), py::arg("Q"), py::arg("R"), py::arg("tol") = Tolerances{});

  m.def(
      "synthesize_quadratic_stabilizer",
      [](const SystemQuad& sys, const Matrix& E, const Matrix& G, std::uint64_t seed) {
        const QsSynthesis s = synthesize_quadratic_stabilizer(sys, {E, G, {}, {}}, seed);
        py::dict d;
        d["feasible"] = s.feasible;
        if (s.certificate) {
          d["K"] = s.certificate->K;
          d["P"] = s.certificate->P;
          d["alpha"] = s.certificate->alpha;
        }
        return d;
      },
      py::arg("sys"), py::arg("E"), py::arg("G"), py::arg("seed") = 1);

  m.def(
      "run_command",
      [](const std::string& command, const std::string& document_json, std::optional<Matrix> gain,
         std::optional<std::uint64_t> seed) {
        RunOptions opts;
        opts.gain = std::move(gain);
        opts.seed = seed;
        const RunResult r = run_command(command, parse_system_text(document_json), opts);
        return py::make_tuple(static_cast<int>(r.exit_code), r.json);
      },
      py::arg("command"), py::arg("document_json"), py::arg("gain") = py::none(),
      py::arg("seed") = py::none(),
      "Runs a CLI command on a JSON document; returns (exit_code, report_json).");

  m.def("commands", &command_names);
}
