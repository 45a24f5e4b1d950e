#pragma once

// Brute-force cross-check of a rule table: per-cell Newton steps from finite
// differences of the numerically assembled global error.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stencilforge/problem.hpp"
#include "stencilforge/rulegen.hpp"

namespace stencilforge {

struct CheckConfig {
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  double relative_tolerance = 1e-7;
  double step = 1e-2;  // finite-difference step, relative to max(1, |value|)
};

struct CheckMismatch {
  int rule = 0;
  std::vector<int> cell;
  int component = 0;
  std::size_t trial = 0;
  double expected = 0;  // finite-difference Newton value
  double actual = 0;    // rule output
};

struct CheckReport {
  bool ok = true;
  bool locality_ok = true;
  std::size_t comparisons = 0;
  std::size_t skipped = 0;           // frozen rules or singular finite-difference Hessians
  double max_relative_error = 0;
  std::vector<CheckMismatch> mismatches;  // first few only
};

/// Global error of `state` (cell-major, m per cell), summed over every residual cell.
double brute_force_error(const ProblemSpec& spec, const std::vector<double>& state);

/// x - H^-1 g for the components of `cell`, with g and H from central
/// differences of brute_force_error. Empty when H is singular.
std::vector<double> brute_force_newton(const ProblemSpec& spec, const std::vector<double>& state, std::size_t cell,
                                       double step = 1e-2);

/// Compares every rule against brute_force_newton at random states (one
/// random cell per rule per trial) and runs the locality check.
CheckReport check_rules(const ProblemSpec& spec, const RuleTable& table, const CheckConfig& config = {});

std::string describe(const CheckMismatch& m, const ProblemSpec& spec);

}  // namespace stencilforge
