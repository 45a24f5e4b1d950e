#pragma once

// A-posteriori residual errors of a field.

#include <cstddef>
#include <vector>

#include "stencilforge/compiled.hpp"
#include "stencilforge/engine.hpp"
#include "stencilforge/problem.hpp"

namespace stencilforge {

struct ErrorReport {
  double global_error = 0;  // sum of squared residuals
  double mean = 0;          // global_error / residual cells / normalization
  double max = 0;           // max per-cell squared residual norm / normalization
  double normalization = 1; // max |field component|
  bool normalized = true;   // false when the field is identically zero
  std::size_t residual_cells = 0;
};

/// Residual expressions of every region, compiled against the problem.
class ResidualEvaluator {
 public:
  explicit ResidualEvaluator(const ProblemSpec& spec);

  /// Squared residual norm at `cell` (0 for Dirichlet cells).
  double cell_error(std::size_t cell, const double* state) const;
  /// Residual component values at `cell`.
  std::vector<double> residuals(std::size_t cell, const double* state) const;
  /// Per-cell squared norms, one entry per cell.
  std::vector<double> cell_errors(const FieldState& state) const;

 private:
  const ProblemSpec& spec_;
  std::vector<const double*> givens_;
  std::vector<std::vector<CompiledRational>> regions_;
};

/// Sum in a fixed binary-tree order, independent of thread count.
double pairwise_sum(const double* values, std::size_t n);

double global_error(const ProblemSpec& spec, const FieldState& state);
ErrorReport error_report(const ProblemSpec& spec, const FieldState& state);

}  // namespace stencilforge
