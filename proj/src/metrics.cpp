#include "stencilforge/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace stencilforge {

ResidualEvaluator::ResidualEvaluator(const ProblemSpec& spec) : spec_(spec), givens_(given_buffers(spec)) {
  for (const auto& r : spec.regions()) {
    std::vector<CompiledRational> compiled;
    if (!r.dirichlet) {
      for (const auto& e : r.residuals) compiled.emplace_back(e, spec);
    }
    regions_.push_back(std::move(compiled));
  }
}

std::vector<double> ResidualEvaluator::residuals(std::size_t cell, const double* state) const {
  EvalContext ctx{state, &givens_};
  std::vector<double> out;
  for (const auto& r : regions_[spec_.region_of(cell)]) out.push_back(r.evaluate(cell, ctx));
  return out;
}

double ResidualEvaluator::cell_error(std::size_t cell, const double* state) const {
  EvalContext ctx{state, &givens_};
  double sum = 0;
  for (const auto& r : regions_[spec_.region_of(cell)]) {
    double v = r.evaluate(cell, ctx);
    sum += v * v;
  }
  return sum;
}

std::vector<double> ResidualEvaluator::cell_errors(const FieldState& state) const {
  std::vector<double> out(spec_.cell_count());
  for (std::size_t cell = 0; cell < out.size(); ++cell) out[cell] = cell_error(cell, state.values.data());
  return out;
}

double pairwise_sum(const double* values, std::size_t n) {
  if (n <= 8) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += values[i];
    return s;
  }
  std::size_t half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

double global_error(const ProblemSpec& spec, const FieldState& state) {
  auto errors = ResidualEvaluator(spec).cell_errors(state);
  return pairwise_sum(errors.data(), errors.size());
}

ErrorReport error_report(const ProblemSpec& spec, const FieldState& state) {
  ErrorReport report;
  auto errors = ResidualEvaluator(spec).cell_errors(state);
  report.global_error = pairwise_sum(errors.data(), errors.size());
  report.residual_cells = spec.residual_cell_count();
  double worst = errors.empty() ? 0 : *std::max_element(errors.begin(), errors.end());
  double mean = report.residual_cells ? report.global_error / static_cast<double>(report.residual_cells) : 0;
  report.normalization = state.max_abs();
  if (report.normalization == 0) {
    report.normalized = false;
    report.normalization = 1;
  }
  report.mean = mean / report.normalization;
  report.max = worst / report.normalization;
  return report;
}

}  // namespace stencilforge
