#include "stencilforge/check.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "stencilforge/engine.hpp"
#include "stencilforge/metrics.hpp"

namespace stencilforge {

namespace {

constexpr std::size_t kKeptMismatches = 8;

class BruteForce {
 public:
  explicit BruteForce(const ProblemSpec& spec) : spec_(spec), residuals_(spec) {}

  double error(const std::vector<double>& state) const {
    std::vector<double> errors(spec_.cell_count());
    for (std::size_t cell = 0; cell < errors.size(); ++cell) errors[cell] = residuals_.cell_error(cell, state.data());
    return pairwise_sum(errors.data(), errors.size());
  }

  std::vector<double> newton(std::vector<double> state, std::size_t cell, double step) const {
    const int m = spec_.field_arity();
    const std::size_t base = cell * m;
    std::vector<double> eps(m);
    for (int i = 0; i < m; ++i) eps[i] = step * std::max(1.0, std::abs(state[base + i]));

    auto at = [&](int i, double di, int j, double dj) {
      std::vector<double> s = state;
      if (i >= 0) s[base + i] += di;
      if (j >= 0) s[base + j] += dj;
      return error(s);
    };
    const double e0 = error(state);
    Eigen::VectorXd g(m);
    Eigen::MatrixXd h(m, m);
    for (int i = 0; i < m; ++i) {
      const double plus = at(i, eps[i], -1, 0), minus = at(i, -eps[i], -1, 0);
      g(i) = (plus - minus) / (2 * eps[i]);
      h(i, i) = (plus - 2 * e0 + minus) / (eps[i] * eps[i]);
      for (int j = 0; j < i; ++j) {
        const double v = (at(i, eps[i], j, eps[j]) - at(i, eps[i], j, -eps[j]) - at(i, -eps[i], j, eps[j]) +
                          at(i, -eps[i], j, -eps[j])) /
                         (4 * eps[i] * eps[j]);
        h(i, j) = h(j, i) = v;
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(h);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) return {};
    Eigen::VectorXd d = lu.solve(g);
    std::vector<double> out(m);
    for (int i = 0; i < m; ++i) out[i] = state[base + i] - d(i);
    return out;
  }

 private:
  const ProblemSpec& spec_;
  ResidualEvaluator residuals_;
};

}  // namespace

double brute_force_error(const ProblemSpec& spec, const std::vector<double>& state) {
  return BruteForce(spec).error(state);
}

std::vector<double> brute_force_newton(const ProblemSpec& spec, const std::vector<double>& state, std::size_t cell,
                                       double step) {
  return BruteForce(spec).newton(state, cell, step);
}

CheckReport check_rules(const ProblemSpec& spec, const RuleTable& table, const CheckConfig& config) {
  CheckReport report;
  report.locality_ok = locality_check(table, spec).ok;
  report.ok = report.locality_ok;

  BruteForce oracle(spec);
  Automaton automaton(spec, table, false);
  const int m = spec.field_arity();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> value(-1.0, 1.0);

  std::vector<std::vector<std::size_t>> cells_of(table.rules.size());
  for (std::size_t cell = 0; cell < spec.cell_count(); ++cell) cells_of[table.rule_of(cell)].push_back(cell);

  std::vector<double> state(spec.cell_count() * m);
  std::vector<double> actual(m);
  for (std::size_t trial = 0; trial < config.trials; ++trial) {
    for (double& v : state) v = value(rng);
    for (std::size_t r = 0; r < table.rules.size(); ++r) {
      const UpdateRule& rule = table.rules[r];
      if (cells_of[r].empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, cells_of[r].size() - 1);
      const std::size_t cell = cells_of[r][pick(rng)];
      if (rule.identity && !rule.frozen) continue;  // Dirichlet: nothing to compare
      std::vector<double> expected = oracle.newton(state, cell, config.step);
      if (expected.empty() || !automaton.propose(cell, state.data(), actual.data())) {
        ++report.skipped;
        continue;
      }
      for (int i = 0; i < m; ++i) {
        ++report.comparisons;
        const double x = state[cell * m + i];
        const double scale = std::max({std::abs(expected[i]), std::abs(actual[i]), std::abs(x), 1e-300});
        const double rel = std::abs(expected[i] - actual[i]) / scale;
        report.max_relative_error = std::max(report.max_relative_error, rel);
        if (rel > config.relative_tolerance) {
          report.ok = false;
          if (report.mismatches.size() < kKeptMismatches) {
            report.mismatches.push_back({static_cast<int>(r), spec.grid().coords(cell), i, trial, expected[i], actual[i]});
          }
        }
      }
    }
  }
  return report;
}

std::string describe(const CheckMismatch& m, const ProblemSpec& spec) {
  std::string where;
  for (std::size_t i = 0; i < m.cell.size(); ++i) where += (i ? "," : "") + std::to_string(m.cell[i]);
  return "rule " + std::to_string(m.rule) + " cell (" + where + ") component " +
         spec.fields().components[m.component] + " trial " + std::to_string(m.trial) + ": expected " +
         std::to_string(m.expected) + ", rule gives " + std::to_string(m.actual);
}

}  // namespace stencilforge
