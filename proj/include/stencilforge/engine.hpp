#pragma once

// Runs a rule table on a field until it stops moving.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "stencilforge/compiled.hpp"
#include "stencilforge/problem.hpp"
#include "stencilforge/rulegen.hpp"

namespace stencilforge {

/// m-component doubles over the mesh, cell-major (values[cell * m + c]).
/// Parameters and given grids are read from the problem.
struct FieldState {
  GridSpec grid;
  int components = 1;
  std::vector<double> values;

  double& at(std::size_t cell, int c) { return values[cell * components + c]; }
  double at(std::size_t cell, int c) const { return values[cell * components + c]; }
  double max_abs() const;

  friend bool operator==(const FieldState&, const FieldState&) = default;
};

/// Dirichlet cells from the problem; free cells from `initial` or zero.
FieldState init(const ProblemSpec& spec, const std::optional<FieldState>& initial = std::nullopt);

enum class Schedule { RandomSequential, Synchronous };

enum class StopRule {
  MaxChange,          // max |change| per sweep <= tau
  FixedPointEstimate  // max |change| / (1 - q) <= tau, q the observed contraction per sweep
};

struct SolveConfig {
  Schedule schedule = Schedule::RandomSequential;
  std::uint64_t seed = 0;
  std::optional<double> tolerance;  // default: default_tolerance(max|field|) at the time of the test
  StopRule stop = StopRule::FixedPointEstimate;
  std::optional<double> relaxation;  // default depends on the schedule
  std::size_t max_sweeps = 50'000'000;
  int threads = 1;
  std::size_t log_every = 0;    // record the global error every n sweeps (0: never)
  double gradient_step = 0;     // > 0: gradient step instead of skipping singular cells
  bool affine_cache = true;
};

struct TracePoint {
  std::size_t sweep = 0;
  double max_change = 0;
  double global_error = 0;
};

struct SolveReport {
  std::size_t sweeps = 0;
  bool converged = false;
  double final_max_change = 0;
  double tolerance = 0;
  double contraction = 0;          // estimated per-sweep contraction factor
  double estimated_distance = 0;   // max_change / (1 - contraction)
  bool rounding_floor = false;     // stopped because changes reached rounding noise
  std::size_t skip_count = 0;      // singular-Hessian events
  std::size_t fallback_count = 0;  // gradient steps taken instead
  std::vector<TracePoint> trace;
  double seconds = 0;
};

/// A rule table bound to a problem, ready to sweep.
class Automaton {
 public:
  Automaton(const ProblemSpec& spec, const RuleTable& table, bool affine_cache = true,
            double gradient_step = 0);

  /// One pass over all free cells in a fresh random order; in place.
  double sweep_random(FieldState& state, std::mt19937_64& rng, double relaxation = 1.0);
  /// One pass where every update reads the pre-sweep field.
  double sweep_synchronous(FieldState& state, int threads, double relaxation = 0.5);

  /// New values of `cell` from `state` without writing; false when skipped.
  bool propose(std::size_t cell, const double* state, double* out) const;

  std::size_t free_cell_count() const { return free_cells_.size(); }
  std::size_t cached_cell_count() const;
  std::size_t skip_count() const { return skips_; }
  std::size_t fallback_count() const { return fallbacks_; }

 private:
  struct Kernel {
    std::vector<CompiledRational> components;
    std::vector<CompiledPolynomial> gradient;
  };

  bool update_slot(std::size_t slot, const double* read, double* write, double relaxation, double& change,
                   std::size_t& skips, std::size_t& fallbacks) const;
  [[noreturn]] void diverged(std::size_t cell, int component) const;

  const ProblemSpec& spec_;
  int m_;
  double gradient_step_;
  std::vector<const double*> givens_;
  std::vector<Kernel> kernels_;         // per rule
  std::vector<int> cell_rule_;
  std::vector<std::size_t> free_cells_;  // cells that can change
  // Affine cache, per free slot and component: row [row_ptr[r], row_ptr[r+1]) plus constant.
  std::vector<char> cached_;
  bool all_cached_ = false;
  std::vector<std::uint32_t> row_ptr_;
  std::vector<std::uint32_t> col_;
  std::vector<double> coef_;
  std::vector<double> constant_;
  std::vector<std::uint32_t> order_;
  std::vector<double> buffer_;
  std::size_t skips_ = 0;
  std::size_t fallbacks_ = 0;
};

/// Moves each cell by `relaxation` times its Newton step.
double sweep(FieldState& state, Automaton& automaton, Schedule schedule, std::mt19937_64& rng, int threads = 1,
             double relaxation = 1.0);

/// 1 for random-sequential; 0.5 for synchronous, where full steps diverge on
/// Poisson problems.
double default_relaxation(Schedule schedule);

/// Changes at or below this multiple of max|field| are rounding noise.
inline constexpr double kRoundingFloor = 16 * 2.220446049250313e-16;

/// Tracks the per-sweep contraction of max |change| over a window covering
/// the later half of the run.
class ContractionEstimator {
 public:
  void observe(std::size_t sweep, double change);
  /// Estimated contraction factor, or nullopt while the window is too short.
  std::optional<double> factor() const { return factor_; }

 private:
  std::vector<std::pair<std::size_t, double>> anchors_;  // at sweeps 1, 2, 4, 8, ...
  std::optional<double> factor_;
};

/// 1e-12 times the field scale, at least 1e-15.
double default_tolerance(double field_scale);

SolveReport solve(const ProblemSpec& spec, const RuleTable& table, const SolveConfig& config, FieldState& state);
std::pair<FieldState, SolveReport> solve(const ProblemSpec& spec, const SolveConfig& config,
                                         const std::optional<FieldState>& initial = std::nullopt);

/// Field dump: "dims d n1 ... nd m", optionally followed by " # " and a
/// manifest on the same line, then one cell per line.
void write_field(std::ostream& out, const FieldState& state, const std::string& manifest = "");
void write_field(const std::filesystem::path& path, const FieldState& state, const std::string& manifest = "");
FieldState read_field(std::istream& in);
FieldState read_field(const std::filesystem::path& path);

std::string to_string(Schedule s);
std::string to_string(StopRule s);
Schedule parse_schedule(const std::string& text);
StopRule parse_stop_rule(const std::string& text);

}  // namespace stencilforge
