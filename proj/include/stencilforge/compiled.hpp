#pragma once

// Numeric form of symbolic polynomials bound to one problem: parameters are
// folded into coefficients and atoms become index deltas into flat buffers.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "stencilforge/expr.hpp"
#include "stencilforge/problem.hpp"

namespace stencilforge {

/// Flat buffers a compiled polynomial reads from. State is cell-major:
/// component c of cell i lives at values[i * m + c].
struct EvalContext {
  const double* state = nullptr;
  const std::vector<const double*>* givens = nullptr;
};

class CompiledPolynomial {
 public:
  struct Factor {
    bool cell = true;
    int given = 0;          // index into EvalContext::givens
    std::ptrdiff_t delta;   // state delta (cell) or sample delta (given)
    int exponent = 1;
  };
  struct Term {
    double coefficient = 0;
    std::uint32_t begin = 0, end = 0;  // factor range
  };

  CompiledPolynomial() = default;
  CompiledPolynomial(const Polynomial& p, const ProblemSpec& spec);

  double evaluate(std::size_t cell, const EvalContext& ctx) const;
  /// Sum of |term| values, the scale used by the singularity guard.
  double magnitude(std::size_t cell, const EvalContext& ctx) const;

  const std::vector<Term>& terms() const { return terms_; }
  const std::vector<Factor>& factors() const { return factors_; }
  bool has_cell_factors() const;
  /// Every term has at most one cell factor, of exponent 1.
  bool affine_in_cells() const;
  bool is_one() const { return one_; }

  /// Value of term `t` with cell factors omitted.
  double term_weight(const Term& t, std::size_t cell, const EvalContext& ctx) const;

 private:
  std::vector<Term> terms_;
  std::vector<Factor> factors_;
  std::ptrdiff_t arity_ = 1;
  bool one_ = false;
};

/// num / den pair for one rational expression.
struct CompiledRational {
  CompiledPolynomial num;
  CompiledPolynomial den;

  CompiledRational() = default;
  CompiledRational(const Expression& e, const ProblemSpec& spec)
      : num(e.numerator(), spec), den(e.denominator(), spec) {}

  /// False when the denominator is numerically singular at `cell`.
  bool evaluate(std::size_t cell, const EvalContext& ctx, double& out) const;
  double evaluate(std::size_t cell, const EvalContext& ctx) const;
};

/// Relative threshold below which a denominator is treated as singular.
inline constexpr double kSingularThreshold = 1e-12;

/// Given-function sample buffers in declaration order.
std::vector<const double*> given_buffers(const ProblemSpec& spec);

}  // namespace stencilforge
