#pragma once

// Per-cell least-squares Newton rules: local error, gradient, Hessian,
// update expressions, neighborhoods, cell classification and rule tables.

#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stencilforge/expr.hpp"
#include "stencilforge/problem.hpp"

namespace stencilforge {

/// Cells whose environment windows agree get the same derivation.
struct CellClass {
  int id = 0;
  int region = 0;
  bool dirichlet = false;
  std::size_t representative = 0;  // a cell of the class
  std::size_t cell_count = 0;
  /// Per axis: distances to the low and high faces, saturated at reach + 1.
  std::vector<std::pair<int, int>> signature;
};

struct Neighborhood {
  std::set<Offset> field;  // nonzero offsets of cell variables
  std::set<Offset> given;  // offsets of given-function samples, origin included
};

struct UpdateRule {
  std::vector<Expression> components;  // new value per field component
  std::vector<Expression> gradient;
  std::vector<std::vector<Expression>> hessian;
  Expression determinant{1L};
  Neighborhood neighborhood;
  std::set<Offset> dependency;  // offsets mu whose residuals involve the origin
  bool identity = false;        // Dirichlet or frozen
  bool frozen = false;          // residual-bearing but no usable Newton step
  std::string diagnostic;
};

struct RuleTable {
  std::vector<UpdateRule> rules;
  std::vector<CellClass> classes;
  std::vector<int> class_rule;  // class id -> rule index
  std::vector<int> cell_class;  // cell -> class id
  std::vector<int> reach;       // per-axis residual reach

  int rule_of(std::size_t cell) const { return class_rule[cell_class[cell]]; }
  std::size_t cells_using(int rule) const;
  /// Classes mapped to `rule`, in class order.
  std::vector<int> classes_of(int rule) const;
};

/// Per-axis maximum |offset| over every cell variable in every residual.
std::vector<int> residual_reach(const ProblemSpec& spec);

/// Offsets mu such that a residual at cell + mu references `cell`.
std::set<Offset> dependency_set(const ProblemSpec& spec, std::size_t cell);

/// Sum of squared residuals over the dependency set, in offsets relative to `cell`.
Expression local_error(const ProblemSpec& spec, std::size_t cell);
inline Expression local_error(const ProblemSpec& spec, const CellClass& c) {
  return local_error(spec, c.representative);
}

/// Derivatives with respect to the origin cell's components.
std::vector<Expression> gradient(const Expression& local, int arity, int dimension);
std::vector<std::vector<Expression>> hessian(const Expression& local, int arity, int dimension);

/// Newton step x - H^-1 g for the class of `cell`. Diagonal Hessians are
/// inverted per component; full ones by adjugate for arity up to 3.
UpdateRule newton_rule(const ProblemSpec& spec, std::size_t cell);
inline UpdateRule newton_rule(const ProblemSpec& spec, const CellClass& c) {
  return newton_rule(spec, c.representative);
}

Neighborhood neighborhood(const std::vector<Expression>& components);
inline Neighborhood neighborhood(const UpdateRule& rule) { return neighborhood(rule.components); }

RuleTable classify(const ProblemSpec& spec);

struct LocalityEntry {
  int rule = 0;
  bool ok = true;
  std::set<Offset> bound;       // union of dependency-shifted residual stencils
  std::set<Offset> violations;  // rule offsets outside the bound
  int margin = 0;               // |bound| - |rule neighborhood|
};

struct LocalityReport {
  bool ok = true;
  std::vector<LocalityEntry> entries;
};

LocalityReport locality_check(const RuleTable& table, const ProblemSpec& spec);

/// Canonical text key used for deduplication.
std::string rule_key(const UpdateRule& rule, const SymbolNames& names);

nlohmann::json export_rules(const RuleTable& table, const ProblemSpec& spec);

/// Parses rule expressions back from an export; one vector per rule.
std::vector<std::vector<Expression>> import_rules(const nlohmann::json& doc, const ProblemSpec& spec);

/// Human-readable listing for the CLI.
std::string format_rules(const RuleTable& table, const ProblemSpec& spec);

}  // namespace stencilforge
