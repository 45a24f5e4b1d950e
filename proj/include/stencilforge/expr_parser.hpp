#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "stencilforge/expr.hpp"

namespace stencilforge {

/// Names visible to the expression parser.
struct SymbolContext {
  int dimension = 1;
  std::vector<std::string> fields;
  std::set<std::string> givens;
  std::set<std::string> parameters;

  SymbolNames names() const { return {fields}; }
};

/// Parses the parenthesized infix form produced by to_string():
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := ('-' | '+') unary | power
///   power   := primary ('^' ['-'] INT)?
///   primary := NUMBER | NAME '[' INT (',' INT)* ']' | NAME | '(' expr ')'
///
/// Decimal literals are converted to exact rationals. `line` and `column`
/// locate the first character of `text` for diagnostics.
Expression parse_expression(std::string_view text, const SymbolContext& ctx, int line = 1, int column = 1);

/// Exact rational value of a decimal literal such as "-1.25e-3".
Rational parse_decimal(std::string_view literal);

}  // namespace stencilforge
