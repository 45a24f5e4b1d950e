// stencilforge: derive, solve and check cellular Newton automata.
//
//   stencilforge derive --builtin poisson1d --n 64
//   stencilforge solve  --builtin poisson3d --n 20 --rho ramp --out run/
//   stencilforge check  --builtin beam --n 6 --trials 50
//
// Exit codes: 0 ok, 2 input error, 3 divergence, 4 check failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stencilforge/check.hpp"
#include "stencilforge/engine.hpp"
#include "stencilforge/error.hpp"
#include "stencilforge/format.hpp"
#include "stencilforge/manifest.hpp"
#include "stencilforge/metrics.hpp"
#include "stencilforge/problem.hpp"
#include "stencilforge/rulegen.hpp"

namespace fs = std::filesystem;
using namespace stencilforge;

namespace {

enum Exit { kOk = 0, kInput = 2, kDiverged = 3, kCheckFailed = 4 };

struct ProblemOptions {
  std::string builtin;
  std::string path;
  int n = 0;
  std::vector<int> extents;
  std::optional<double> h;
  std::string rho = "0";
  std::string bc;
  BeamParams beam;
};

struct SolveOptions {
  std::uint64_t seed = 0;
  std::string schedule = "random";
  std::optional<double> tau;
  std::string stop = "fixed-point";
  std::size_t max_sweeps = 50'000'000;
  int threads = 0;
  std::optional<double> relaxation;
  std::size_t log_every = 0;
  std::string initial;
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("invalid number '" + item + "' in '" + text + "'");
    }
  }
  return out;
}

std::string rho_profile(const std::string& rho) {
  if (rho == "ramp") return std::string(kRampProfile);
  return rho;
}

ProblemSpec load(const ProblemOptions& o, std::map<std::string, std::string>& recorded) {
  if (o.builtin.empty() == o.path.empty()) throw ValidationError("give exactly one of --builtin or --problem");
  if (!o.path.empty()) return load_problem(o.path);

  auto extents_for = [&](int dimension, int fallback) {
    std::vector<int> e = o.extents;
    if (e.empty()) e.assign(dimension, o.n ? o.n : fallback);
    if (static_cast<int>(e.size()) != dimension) {
      throw ValidationError(o.builtin + " needs " + std::to_string(dimension) + " extents");
    }
    return e;
  };
  if (o.builtin == "poisson1d") {
    const int n = extents_for(1, 65)[0];
    const double h = o.h.value_or(1.0 / (n - 1));
    std::vector<double> bc = o.bc.empty() ? std::vector<double>{0, 0} : parse_list(o.bc);
    if (bc.size() != 2) throw ValidationError("poisson1d --bc takes two values");
    recorded["n"] = std::to_string(n);
    recorded["h"] = format_double(h);
    recorded["rho"] = o.rho;
    recorded["bc"] = format_double(bc[0]) + "," + format_double(bc[1]);
    return builtin_poisson1d(n, h, rho_profile(o.rho), bc[0], bc[1]);
  }
  if (o.builtin == "poisson3d") {
    auto e = extents_for(3, 20);
    const double h = o.h.value_or(1.0);
    std::vector<double> bc = o.bc.empty() ? std::vector<double>{0} : parse_list(o.bc);
    if (bc.size() != 1) throw ValidationError("poisson3d --bc takes one value");
    recorded["extents"] = std::to_string(e[0]) + "," + std::to_string(e[1]) + "," + std::to_string(e[2]);
    recorded["h"] = format_double(h);
    recorded["rho"] = o.rho;
    recorded["bc"] = format_double(bc[0]);
    return builtin_poisson3d(e, h, rho_profile(o.rho), bc[0]);
  }
  if (o.builtin == "beam") {
    BeamParams p = o.beam;
    p.extents = extents_for(3, 30);
    recorded["extents"] = std::to_string(p.extents[0]) + "," + std::to_string(p.extents[1]) + "," +
                          std::to_string(p.extents[2]);
    recorded["window"] = format_double(p.window);
    recorded["wavelength"] = format_double(p.wavelength);
    recorded["length"] = format_double(p.length);
    recorded["index"] = format_double(p.index);
    recorded["depth"] = format_double(p.depth);
    recorded["waist"] = format_double(p.waist);
    recorded["offset"] = format_double(p.input_offset);
    recorded["full_laplacian"] = p.full_laplacian ? "true" : "false";
    return builtin_beam(p);
  }
  throw ValidationError("unknown builtin '" + o.builtin + "' (poisson1d, poisson3d, beam)");
}

void add_problem_options(CLI::App* cmd, ProblemOptions& o) {
  cmd->add_option("--builtin", o.builtin, "poisson1d, poisson3d or beam");
  cmd->add_option("--problem", o.path, "problem file in the DSL");
  cmd->add_option("--n", o.n, "cells per axis");
  cmd->add_option("--extents", o.extents, "cells per axis, one value per axis")->delimiter(',');
  cmd->add_option("--step", o.h, "mesh step h (poisson)");
  cmd->add_option("--rho", o.rho, "charge: a number, 'ramp', or a profile expression (poisson)");
  cmd->add_option("--bc", o.bc, "Dirichlet values: 'left,right' (poisson1d) or one face value (poisson3d)");
  cmd->add_option("--window", o.beam.window, "transverse window, um (beam)");
  cmd->add_option("--wavelength", o.beam.wavelength, "vacuum wavelength, um (beam)");
  cmd->add_option("--length", o.beam.length, "propagation length, um (beam)");
  cmd->add_option("--index", o.beam.index, "background index (beam)");
  cmd->add_option("--depth", o.beam.depth, "waveguide index modulation (beam)");
  cmd->add_option("--waist", o.beam.waist, "input beam width, um (beam)");
  cmd->add_option("--offset", o.beam.input_offset, "input beam offset from the waveguide, um (beam)");
  cmd->add_flag("--full-laplacian", o.beam.full_laplacian, "include d2/dz2 in the Laplacian (beam)");
}

std::string source_of(const ProblemOptions& o) { return o.builtin.empty() ? o.path : "builtin:" + o.builtin; }

void write_json(const fs::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

int threads_from_env() {
  if (const char* env = std::getenv("STENCILFORGE_THREADS")) {
    try {
      int t = std::stoi(env);
      if (t >= 1) return t;
    } catch (const std::exception&) {
    }
    throw ValidationError(std::string("invalid STENCILFORGE_THREADS '") + env + "'");
  }
  return 1;
}

nlohmann::json to_json(const SolveReport& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : r.trace) trace.push_back({{"sweep", t.sweep}, {"max_change", t.max_change}, {"E", t.global_error}});
  return {{"sweeps", r.sweeps},
          {"converged", r.converged},
          {"final_max_change", r.final_max_change},
          {"tolerance", r.tolerance},
          {"contraction", r.contraction},
          {"estimated_distance", r.estimated_distance},
          {"rounding_floor", r.rounding_floor},
          {"skip_count", r.skip_count},
          {"fallback_count", r.fallback_count},
          {"seconds", r.seconds},
          {"trace", trace}};
}

nlohmann::json to_json(const ErrorReport& e) {
  return {{"global_error", e.global_error}, {"mean", e.mean},
          {"max", e.max},                   {"normalization", e.normalization},
          {"normalized", e.normalized},     {"residual_cells", e.residual_cells}};
}

int cmd_derive(const ProblemOptions& po, const fs::path& out) {
  RunManifest manifest{"derive", source_of(po)};
  ProblemSpec spec = load(po, manifest.options);
  manifest.hash = problem_hash(spec);
  RuleTable table = classify(spec);
  fs::create_directories(out);
  manifest.outputs = {{"rules", "rules.json"}, {"listing", "rules.txt"}};

  nlohmann::json doc = export_rules(table, spec);
  doc["manifest"] = manifest.to_json();
  write_json(out / "rules.json", doc);
  const std::string listing = format_rules(table, spec);
  std::ofstream(out / "rules.txt") << "# " << manifest.line() << '\n' << listing;
  std::cout << listing << table.rules.size() << " rule classes\n";
  return kOk;
}

int cmd_solve(const ProblemOptions& po, const SolveOptions& so, const fs::path& out) {
  RunManifest manifest{"solve", source_of(po)};
  ProblemSpec spec = load(po, manifest.options);
  manifest.hash = problem_hash(spec);
  manifest.seed = so.seed;

  SolveConfig config;
  config.schedule = parse_schedule(so.schedule);
  config.stop = parse_stop_rule(so.stop);
  config.seed = so.seed;
  config.tolerance = so.tau;
  config.max_sweeps = so.max_sweeps;
  config.threads = so.threads > 0 ? so.threads : threads_from_env();
  config.relaxation = so.relaxation;
  config.log_every = so.log_every;
  manifest.options["schedule"] = to_string(config.schedule);
  manifest.options["stop"] = to_string(config.stop);
  manifest.options["tau"] = so.tau ? format_double(*so.tau) : "auto";
  manifest.options["max_sweeps"] = std::to_string(config.max_sweeps);
  manifest.options["relaxation"] = format_double(config.relaxation.value_or(default_relaxation(config.schedule)));

  fs::create_directories(out);
  manifest.outputs = {{"rules", "rules.json"}, {"field", "field.txt"}, {"report", "report.json"}};

  RuleTable table = classify(spec);
  nlohmann::json rules = export_rules(table, spec);
  rules["manifest"] = manifest.to_json();
  write_json(out / "rules.json", rules);

  std::optional<FieldState> initial;
  if (!so.initial.empty()) initial = read_field(so.initial);
  FieldState state = init(spec, initial);

  SolveReport report;
  try {
    report = solve(spec, table, config, state);
  } catch (const DivergenceError& e) {
    nlohmann::json doc{{"manifest", manifest.to_json()}, {"status", "diverged"}, {"error", e.what()}};
    write_json(out / "report.json", doc);
    std::cerr << "diverged: " << e.what() << "\ntrace: " << (out / "report.json").string() << '\n';
    return kDiverged;
  }
  ErrorReport errors = error_report(spec, state);
  write_field(out / "field.txt", state, manifest.line());
  nlohmann::json doc{{"manifest", manifest.to_json()},
                     {"status", report.converged ? "converged" : "budget exhausted"},
                     {"solve", to_json(report)},
                     {"error", to_json(errors)}};
  write_json(out / "report.json", doc);

  std::cout << "rule classes      " << table.rules.size() << '\n'
            << "sweeps            " << report.sweeps << (report.converged ? " (converged)" : " (not converged)")
            << '\n'
            << "final max change  " << report.final_max_change << " (tolerance " << report.tolerance << ")\n"
            << "mean error        " << errors.mean << '\n'
            << "max error         " << errors.max << '\n'
            << "normalization     " << errors.normalization << (errors.normalized ? "" : " (field is zero)") << '\n'
            << "seconds           " << report.seconds << '\n';
  return kOk;
}

int cmd_check(const ProblemOptions& po, const CheckConfig& config, std::optional<int> corrupt) {
  std::map<std::string, std::string> recorded;
  ProblemSpec spec = load(po, recorded);
  RuleTable table = classify(spec);
  if (corrupt) {
    if (*corrupt < 0 || *corrupt >= static_cast<int>(table.rules.size())) throw ValidationError("no such rule");
    auto& rule = table.rules[*corrupt];
    if (rule.components.empty()) throw ValidationError("rule has no components");
    rule.components[0] = rule.components[0] + Expression(Rational(1, 1000));
    rule.identity = false;
  }
  CheckReport report = check_rules(spec, table, config);
  std::cout << "rules             " << table.rules.size() << '\n'
            << "comparisons       " << report.comparisons << '\n'
            << "skipped           " << report.skipped << '\n'
            << "max rel. error    " << report.max_relative_error << '\n'
            << "locality          " << (report.locality_ok ? "ok" : "VIOLATED") << '\n';
  for (const auto& m : report.mismatches) std::cout << "mismatch: " << describe(m, spec) << '\n';
  std::cout << (report.ok ? "pass" : "FAIL") << '\n';
  return report.ok ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Derive and run least-squares Newton cellular automata for discretized PDEs"};
  app.require_subcommand(1);

  ProblemOptions po;
  SolveOptions so;
  CheckConfig cc;
  std::string out = ".";
  std::optional<int> corrupt;

  auto* derive = app.add_subcommand("derive", "derive and list the update rules");
  add_problem_options(derive, po);
  derive->add_option("--out", out, "output directory");

  auto* solve_cmd = app.add_subcommand("solve", "run the automaton to a fixed point");
  add_problem_options(solve_cmd, po);
  solve_cmd->add_option("--out", out, "output directory");
  solve_cmd->add_option("--seed", so.seed, "random seed");
  solve_cmd->add_option("--schedule", so.schedule, "random or synchronous");
  solve_cmd->add_option("--tau", so.tau, "convergence tolerance on the per-sweep max change");
  solve_cmd->add_option("--stop", so.stop, "fixed-point or max-change");
  solve_cmd->add_option("--max-sweeps", so.max_sweeps, "sweep budget");
  solve_cmd->add_option("--threads", so.threads, "workers for synchronous sweeps (default $STENCILFORGE_THREADS or 1)");
  solve_cmd->add_option("--relaxation", so.relaxation, "fraction of the Newton step taken");
  solve_cmd->add_option("--log-every", so.log_every, "record the global error every n sweeps");
  solve_cmd->add_option("--initial", so.initial, "initial field file");

  auto* check = app.add_subcommand("check", "compare rules with finite-difference Newton steps");
  add_problem_options(check, po);
  check->add_option("--trials", cc.trials, "random states");
  check->add_option("--seed", cc.seed, "random seed");
  check->add_option("--tol", cc.relative_tolerance, "relative tolerance");
  check->add_option("--corrupt-rule", corrupt)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*derive) return cmd_derive(po, out);
    if (*solve_cmd) return cmd_solve(po, so, out);
    return cmd_check(po, cc, corrupt);
  } catch (const ParseError& e) {
    std::cerr << (po.path.empty() ? "" : po.path + ":") << e.what() << '\n';
    return kInput;
  } catch (const ValidationError& e) {
    std::cerr << "invalid problem: " << e.what() << '\n';
    return kInput;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  }
}
