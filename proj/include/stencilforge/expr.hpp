#pragma once

// Exact symbolic expressions over cell variables, given-function samples and
// parameters. Every Expression is kept in canonical form: a Laurent
// polynomial numerator with exact rational coefficients over a polynomial
// denominator that is monic and free of monomial content.

#include <gmpxx.h>

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace stencilforge {

using Rational = mpq_class;
using Offset = std::vector<int>;

/// Atom kinds, in canonical order.
enum class AtomKind : std::uint8_t { Cell = 0, Given = 1, Parameter = 2 };

/// A leaf symbol: a field component at a relative offset, a given-function
/// sample at a relative offset, or a named parameter.
struct Atom {
  AtomKind kind = AtomKind::Parameter;
  int component = 0;  // Cell only
  std::string name;   // Given and Parameter
  Offset offset;      // Cell and Given

  static Atom cell(int component, Offset offset);
  static Atom given(std::string name, Offset offset);
  static Atom parameter(std::string name);

  bool has_offset() const { return kind != AtomKind::Parameter; }

  friend auto operator<=>(const Atom&, const Atom&) = default;
  friend bool operator==(const Atom&, const Atom&) = default;
};

struct Factor {
  Atom atom;
  int exponent = 1;

  friend bool operator==(const Factor&, const Factor&) = default;
};

/// Product of atoms raised to nonzero integer powers, sorted by atom.
/// Ordered lexicographically on exponent vectors, which is a term order.
class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(Atom atom, int exponent = 1);

  std::span<const Factor> factors() const { return factors_; }
  bool empty() const { return factors_.empty(); }
  int exponent_of(const Atom& atom) const;
  bool has_negative_exponent() const;

  /// True iff `other / *this` has no negative exponent.
  bool divides(const Monomial& other) const;
  Monomial inverse() const;

  friend Monomial operator*(const Monomial& a, const Monomial& b);
  friend Monomial operator/(const Monomial& a, const Monomial& b) { return a * b.inverse(); }
  friend bool operator==(const Monomial&, const Monomial&) = default;
  friend std::strong_ordering operator<=>(const Monomial& a, const Monomial& b);

 private:
  friend class Polynomial;
  explicit Monomial(std::vector<Factor> sorted) : factors_(std::move(sorted)) {}
  std::vector<Factor> factors_;
};

/// Sparse multivariate Laurent polynomial with exact rational coefficients.
class Polynomial {
 public:
  using Terms = std::map<Monomial, Rational>;

  Polynomial() = default;
  static Polynomial constant(const Rational& c);
  static Polynomial term(Monomial m, const Rational& c = 1);

  const Terms& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool is_zero() const { return terms_.empty(); }
  bool is_one() const;
  std::optional<Rational> constant_value() const;

  /// Largest term in the lexicographic term order.
  const Terms::value_type& leading() const { return *terms_.rbegin(); }

  void add_term(const Monomial& m, const Rational& c);

  Polynomial operator-() const;
  friend Polynomial operator+(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b);
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  Polynomial scaled(const Rational& c) const;
  Polynomial times(const Monomial& m) const;

  Polynomial derivative(const Atom& atom) const;

  /// Componentwise minimum exponent over all terms (absent atoms count 0).
  Monomial content() const;

  /// Quotient if `divisor` divides `*this` exactly. Both operands must be
  /// free of negative exponents.
  std::optional<Polynomial> divide_exact(const Polynomial& divisor) const;

  std::set<Atom> atoms() const;

  /// Rewrites every atom through `fn`; terms are re-collected.
  Polynomial map_atoms(const std::function<Atom(const Atom&)>& fn) const;

  friend bool operator==(const Polynomial&, const Polynomial&) = default;

 private:
  Terms terms_;
};

/// Node kinds of the expression tree view.
enum class NodeKind : std::uint8_t { Rational, Parameter, Cell, Given, Sum, Product, Power, Quotient };

/// Immutable canonical expression. Cheap to copy; safe to share across threads.
class Expression {
 public:
  Expression();
  Expression(const Rational& c);  // NOLINT(google-explicit-constructor)
  Expression(long c) : Expression(Rational(c)) {}  // NOLINT(google-explicit-constructor)
  explicit Expression(const Atom& atom);

  static Expression cell(int component, Offset offset) { return Expression(Atom::cell(component, std::move(offset))); }
  static Expression given(std::string name, Offset offset) {
    return Expression(Atom::given(std::move(name), std::move(offset)));
  }
  static Expression parameter(std::string name) { return Expression(Atom::parameter(std::move(name))); }

  /// Canonicalizes `num / den`. Throws DivisionByZero when `den` is zero.
  static Expression quotient(Polynomial num, Polynomial den);

  const Polynomial& numerator() const { return repr_->num; }
  const Polynomial& denominator() const { return repr_->den; }
  bool is_polynomial() const { return repr_->den.is_one(); }
  bool is_zero() const { return repr_->num.is_zero(); }
  std::optional<Rational> constant_value() const;

  /// Offset arity shared by every offset-bearing atom, or -1 if there is none.
  int arity() const { return repr_->arity; }

  NodeKind kind() const;
  std::vector<Expression> children() const;
  std::set<Atom> atoms() const;

  friend Expression operator+(const Expression& a, const Expression& b);
  friend Expression operator-(const Expression& a, const Expression& b);
  friend Expression operator*(const Expression& a, const Expression& b);
  friend Expression operator/(const Expression& a, const Expression& b);
  Expression operator-() const;
  Expression& operator+=(const Expression& b) { return *this = *this + b; }
  Expression& operator*=(const Expression& b) { return *this = *this * b; }

  friend bool operator==(const Expression& a, const Expression& b);

 private:
  struct Repr {
    Polynomial num;
    Polynomial den;
    int arity = -1;
  };
  explicit Expression(std::shared_ptr<const Repr> repr) : repr_(std::move(repr)) {}
  static Expression make(Polynomial num, Polynomial den);

  std::shared_ptr<const Repr> repr_;
};

Expression pow(const Expression& base, int exponent);

/// Exact partial derivative with respect to `atom`.
Expression differentiate(const Expression& e, const Atom& atom);

using Bindings = std::map<Atom, double>;
using Lookup = std::function<double(const Atom&)>;

/// Evaluates in double precision. Throws UnboundSymbol or DivisionByZero.
double evaluate(const Expression& e, const Bindings& bindings);
double evaluate(const Expression& e, const Lookup& lookup);
double evaluate(const Polynomial& p, const Lookup& lookup);

/// Correctly rounded conversion whenever numerator and denominator fit in 53 bits.
double to_double(const Rational& r);

/// Simultaneous capture-free replacement of atoms.
Expression substitute(const Expression& e, const std::map<Atom, Expression>& replacements);

/// Adds `delta` to the offset of every Cell and Given atom.
Expression shift(const Expression& e, const Offset& delta);

/// Names used when printing; cells print as fields[component][offsets].
struct SymbolNames {
  std::vector<std::string> fields;
};

std::string to_string(const Atom& atom, const SymbolNames& names = {});
std::string to_string(const Expression& e, const SymbolNames& names = {});
std::string to_string(const Rational& r);

}  // namespace stencilforge
