#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "stencilforge/check.hpp"
#include "stencilforge/engine.hpp"
#include "stencilforge/error.hpp"
#include "stencilforge/manifest.hpp"
#include "stencilforge/metrics.hpp"
#include "stencilforge/rulegen.hpp"

namespace py = pybind11;
using namespace stencilforge;

namespace {

py::array_t<double> as_array(const FieldState& s) {
  std::vector<py::ssize_t> shape(s.grid.extents.begin(), s.grid.extents.end());
  if (s.components > 1) shape.push_back(s.components);
  py::array_t<double> out(shape);
  std::copy(s.values.begin(), s.values.end(), out.mutable_data());
  return out;
}

FieldState from_array(const ProblemSpec& spec, const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  FieldState s = init(spec);
  if (static_cast<std::size_t>(a.size()) != s.values.size()) throw ValidationError("initial field has the wrong size");
  std::copy(a.data(), a.data() + a.size(), s.values.begin());
  return s;
}

py::dict error_dict(const ErrorReport& e) {
  py::dict d;
  d["global_error"] = e.global_error;
  d["mean"] = e.mean;
  d["max"] = e.max;
  d["normalization"] = e.normalization;
  d["normalized"] = e.normalized;
  d["residual_cells"] = e.residual_cells;
  return d;
}

py::dict solve_dict(const SolveReport& r) {
  py::dict d;
  d["sweeps"] = r.sweeps;
  d["converged"] = r.converged;
  d["final_max_change"] = r.final_max_change;
  d["tolerance"] = r.tolerance;
  d["contraction"] = r.contraction;
  d["estimated_distance"] = r.estimated_distance;
  d["rounding_floor"] = r.rounding_floor;
  d["skip_count"] = r.skip_count;
  d["seconds"] = r.seconds;
  py::list trace;
  for (const auto& t : r.trace) trace.append(py::make_tuple(t.sweep, t.max_change, t.global_error));
  d["trace"] = trace;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Symbolic derivation of cellular-automaton update rules for discretized PDEs.";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<ValidationError>(m, "ValidationError", base);
  py::register_exception<DivergenceError>(m, "DivergenceError", base);

  py::class_<ProblemSpec>(m, "Problem")
      .def_property_readonly("dimension", &ProblemSpec::dimension)
      .def_property_readonly("extents", [](const ProblemSpec& p) { return p.grid().extents; })
      .def_property_readonly("components", &ProblemSpec::field_arity)
      .def_property_readonly("cell_count", &ProblemSpec::cell_count)
      .def_property_readonly("parameters", &ProblemSpec::parameters)
      .def_property_readonly("hash", [](const ProblemSpec& p) { return hex(problem_hash(p)); })
      .def("render", [](const ProblemSpec& p) { return render_problem(p); })
      .def("__repr__", [](const ProblemSpec& p) {
        std::string ext;
        for (int e : p.grid().extents) ext += (ext.empty() ? "" : "x") + std::to_string(e);
        return "<Problem " + ext + ", " + std::to_string(p.field_arity()) + " component(s)>";
      });

  m.def("parse_problem", [](const std::string& text, const std::filesystem::path& base) {
    return parse_problem(text, base);
  }, py::arg("text"), py::arg("base_dir") = ".");
  m.def("load_problem", &load_problem, py::arg("path"));
  m.def("poisson1d", &builtin_poisson1d, py::arg("n") = 65, py::arg("h") = 1.0 / 64, py::arg("rho") = "0",
        py::arg("left") = 0.0, py::arg("right") = 0.0);
  m.def("poisson3d", &builtin_poisson3d, py::arg("extents") = std::vector<int>{20, 20, 20}, py::arg("h") = 1.0,
        py::arg("rho") = std::string(kRampProfile), py::arg("boundary") = 0.0);
  m.def(
      "beam",
      [](std::vector<int> extents, double window, double wavelength, double length, double index, double depth,
         double waist, double input_offset, double amplitude, bool full_laplacian) {
        return builtin_beam({extents, window, wavelength, length, index, depth, waist, input_offset, amplitude,
                             full_laplacian});
      },
      py::arg("extents") = std::vector<int>{30, 30, 30}, py::arg("window") = 30.0, py::arg("wavelength") = 0.2,
      py::arg("length") = 3000.0, py::arg("index") = 1.5, py::arg("depth") = 1e-4, py::arg("waist") = 10.0,
      py::arg("input_offset") = 5.0, py::arg("amplitude") = 1.0, py::arg("full_laplacian") = false);

  m.def("derive_json", [](const ProblemSpec& p) { return export_rules(classify(p), p).dump(); }, py::arg("problem"));
  m.def("derive_listing", [](const ProblemSpec& p) { return format_rules(classify(p), p); }, py::arg("problem"));

  m.def(
      "solve",
      [](const ProblemSpec& p, const std::string& schedule, std::uint64_t seed, std::optional<double> tolerance,
         const std::string& stop, std::optional<double> relaxation, std::size_t max_sweeps, int threads,
         std::size_t log_every, std::optional<py::array_t<double, py::array::c_style | py::array::forcecast>> initial) {
        SolveConfig cfg;
        cfg.schedule = parse_schedule(schedule);
        cfg.seed = seed;
        cfg.tolerance = tolerance;
        cfg.stop = parse_stop_rule(stop);
        cfg.relaxation = relaxation;
        cfg.max_sweeps = max_sweeps;
        cfg.threads = threads;
        cfg.log_every = log_every;
        FieldState state = initial ? from_array(p, *initial) : init(p);
        RuleTable table = classify(p);
        SolveReport report;
        {
          py::gil_scoped_release release;
          report = solve(p, table, cfg, state);
        }
        return py::make_tuple(as_array(state), solve_dict(report), error_dict(error_report(p, state)));
      },
      py::arg("problem"), py::arg("schedule") = "random", py::arg("seed") = 0, py::arg("tolerance") = py::none(),
      py::arg("stop") = "fixed-point", py::arg("relaxation") = py::none(), py::arg("max_sweeps") = 50'000'000,
      py::arg("threads") = 1, py::arg("log_every") = 0, py::arg("initial") = py::none());

  m.def(
      "error_report",
      [](const ProblemSpec& p, const py::array_t<double, py::array::c_style | py::array::forcecast>& field) {
        return error_dict(error_report(p, from_array(p, field)));
      },
      py::arg("problem"), py::arg("field"));

  m.def(
      "check",
      [](const ProblemSpec& p, std::size_t trials, std::uint64_t seed, double tolerance) {
        CheckReport r = check_rules(p, classify(p), {trials, seed, tolerance});
        py::dict d;
        d["ok"] = r.ok;
        d["locality_ok"] = r.locality_ok;
        d["comparisons"] = r.comparisons;
        d["skipped"] = r.skipped;
        d["max_relative_error"] = r.max_relative_error;
        py::list mismatches;
        for (const auto& mm : r.mismatches) mismatches.append(describe(mm, p));
        d["mismatches"] = mismatches;
        return d;
      },
      py::arg("problem"), py::arg("trials") = 100, py::arg("seed") = 0, py::arg("tolerance") = 1e-7);
}
