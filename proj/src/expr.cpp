#include "stencilforge/expr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "stencilforge/error.hpp"

namespace stencilforge {

Atom Atom::cell(int component, Offset offset) {
  Atom a;
  a.kind = AtomKind::Cell;
  a.component = component;
  a.offset = std::move(offset);
  return a;
}

Atom Atom::given(std::string name, Offset offset) {
  Atom a;
  a.kind = AtomKind::Given;
  a.name = std::move(name);
  a.offset = std::move(offset);
  return a;
}

Atom Atom::parameter(std::string name) {
  Atom a;
  a.kind = AtomKind::Parameter;
  a.name = std::move(name);
  return a;
}

// ---------------------------------------------------------------- Monomial

Monomial::Monomial(Atom atom, int exponent) {
  if (exponent != 0) factors_.push_back({std::move(atom), exponent});
}

int Monomial::exponent_of(const Atom& atom) const {
  auto it = std::lower_bound(factors_.begin(), factors_.end(), atom,
                             [](const Factor& f, const Atom& a) { return f.atom < a; });
  return (it != factors_.end() && it->atom == atom) ? it->exponent : 0;
}

bool Monomial::has_negative_exponent() const {
  return std::any_of(factors_.begin(), factors_.end(), [](const Factor& f) { return f.exponent < 0; });
}

bool Monomial::divides(const Monomial& other) const {
  return !(other / *this).has_negative_exponent();
}

Monomial Monomial::inverse() const {
  std::vector<Factor> out = factors_;
  for (auto& f : out) f.exponent = -f.exponent;
  return Monomial(std::move(out));
}

Monomial operator*(const Monomial& a, const Monomial& b) {
  std::vector<Factor> out;
  out.reserve(a.factors_.size() + b.factors_.size());
  auto i = a.factors_.begin();
  auto j = b.factors_.begin();
  while (i != a.factors_.end() || j != b.factors_.end()) {
    if (j == b.factors_.end() || (i != a.factors_.end() && i->atom < j->atom)) {
      out.push_back(*i++);
    } else if (i == a.factors_.end() || j->atom < i->atom) {
      out.push_back(*j++);
    } else {
      int e = i->exponent + j->exponent;
      if (e != 0) out.push_back({i->atom, e});
      ++i;
      ++j;
    }
  }
  return Monomial(std::move(out));
}

std::strong_ordering operator<=>(const Monomial& a, const Monomial& b) {
  auto i = a.factors_.begin();
  auto j = b.factors_.begin();
  while (i != a.factors_.end() || j != b.factors_.end()) {
    if (j == b.factors_.end() || (i != a.factors_.end() && i->atom < j->atom)) {
      return i->exponent <=> 0;
    }
    if (i == a.factors_.end() || j->atom < i->atom) {
      return 0 <=> j->exponent;
    }
    if (i->exponent != j->exponent) return i->exponent <=> j->exponent;
    ++i;
    ++j;
  }
  return std::strong_ordering::equal;
}

// -------------------------------------------------------------- Polynomial

Polynomial Polynomial::constant(const Rational& c) { return term(Monomial{}, c); }

Polynomial Polynomial::term(Monomial m, const Rational& c) {
  Polynomial p;
  if (c != 0) {
    Rational r = c;
    r.canonicalize();
    p.terms_.emplace(std::move(m), std::move(r));
  }
  return p;
}

bool Polynomial::is_one() const {
  return terms_.size() == 1 && terms_.begin()->first.empty() && terms_.begin()->second == 1;
}

std::optional<Rational> Polynomial::constant_value() const {
  if (terms_.empty()) return Rational(0);
  if (terms_.size() == 1 && terms_.begin()->first.empty()) return terms_.begin()->second;
  return std::nullopt;
}

void Polynomial::add_term(const Monomial& m, const Rational& c) {
  if (c == 0) return;
  auto [it, inserted] = terms_.try_emplace(m, c);
  if (inserted) {
    it->second.canonicalize();
  } else {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

Polynomial Polynomial::operator-() const { return scaled(-1); }

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
  Polynomial out = a;
  for (const auto& [m, c] : b.terms_) out.add_term(m, c);
  return out;
}

Polynomial operator-(const Polynomial& a, const Polynomial& b) {
  Polynomial out = a;
  for (const auto& [m, c] : b.terms_) out.add_term(m, -c);
  return out;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  Polynomial out;
  for (const auto& [ma, ca] : a.terms_) {
    for (const auto& [mb, cb] : b.terms_) out.add_term(ma * mb, ca * cb);
  }
  return out;
}

Polynomial Polynomial::scaled(const Rational& c) const {
  Polynomial out;
  if (c == 0) return out;
  for (const auto& [m, k] : terms_) out.terms_.emplace_hint(out.terms_.end(), m, k * c);
  return out;
}

Polynomial Polynomial::times(const Monomial& m) const {
  Polynomial out;
  for (const auto& [t, c] : terms_) out.terms_.emplace(t * m, c);
  return out;
}

Polynomial Polynomial::derivative(const Atom& atom) const {
  Polynomial out;
  for (const auto& [m, c] : terms_) {
    int e = m.exponent_of(atom);
    if (e == 0) continue;
    out.add_term(m * Monomial(atom, -1), c * e);
  }
  return out;
}

Monomial Polynomial::content() const {
  std::map<Atom, int> lo;
  for (const auto& [m, c] : terms_) {
    for (const auto& f : m.factors()) lo.try_emplace(f.atom, 0);
  }
  bool first = true;
  for (const auto& [m, c] : terms_) {
    for (auto& [atom, e] : lo) {
      int x = m.exponent_of(atom);
      e = first ? x : std::min(e, x);
    }
    first = false;
  }
  std::vector<Factor> out;
  for (const auto& [atom, e] : lo) {
    if (e != 0) out.push_back({atom, e});
  }
  return Monomial(std::move(out));
}

std::optional<Polynomial> Polynomial::divide_exact(const Polynomial& divisor) const {
  if (divisor.is_zero()) return std::nullopt;
  const auto& [lead_m, lead_c] = divisor.leading();
  Polynomial rest = *this;
  Polynomial quotient;
  while (!rest.is_zero()) {
    const auto& [m, c] = rest.leading();
    if (!lead_m.divides(m)) return std::nullopt;
    Monomial qm = m / lead_m;
    Rational qc = c / lead_c;
    quotient.add_term(qm, qc);
    rest = rest - divisor.times(qm).scaled(qc);
  }
  return quotient;
}

std::set<Atom> Polynomial::atoms() const {
  std::set<Atom> out;
  for (const auto& [m, c] : terms_) {
    for (const auto& f : m.factors()) out.insert(f.atom);
  }
  return out;
}

Polynomial Polynomial::map_atoms(const std::function<Atom(const Atom&)>& fn) const {
  Polynomial out;
  for (const auto& [m, c] : terms_) {
    Monomial mapped;
    for (const auto& f : m.factors()) mapped = mapped * Monomial(fn(f.atom), f.exponent);
    out.add_term(mapped, c);
  }
  return out;
}

// -------------------------------------------------------------- Expression

namespace {

int arity_of(const Polynomial& p, int seed) {
  int arity = seed;
  for (const auto& [m, c] : p.terms()) {
    for (const auto& f : m.factors()) {
      if (!f.atom.has_offset()) continue;
      int a = static_cast<int>(f.atom.offset.size());
      if (arity < 0) {
        arity = a;
      } else if (arity != a) {
        throw ArityError("inconsistent offset arity: " + std::to_string(arity) + " vs " + std::to_string(a));
      }
    }
  }
  return arity;
}

int combine_arity(int a, int b) {
  if (a >= 0 && b >= 0 && a != b) {
    throw ArityError("inconsistent offset arity: " + std::to_string(a) + " vs " + std::to_string(b));
  }
  return a >= 0 ? a : b;
}

}  // namespace

Expression::Expression() : Expression(Rational(0)) {}

Expression::Expression(const Rational& c)
    : repr_(std::make_shared<const Repr>(Repr{Polynomial::constant(c), Polynomial::constant(1), -1})) {}

Expression::Expression(const Atom& atom)
    : repr_(std::make_shared<const Repr>(
          Repr{Polynomial::term(Monomial(atom)), Polynomial::constant(1),
               atom.has_offset() ? static_cast<int>(atom.offset.size()) : -1})) {}

Expression Expression::make(Polynomial num, Polynomial den) {
  int arity = arity_of(den, arity_of(num, -1));
  return Expression(std::make_shared<const Repr>(Repr{std::move(num), std::move(den), arity}));
}

Expression Expression::quotient(Polynomial num, Polynomial den) {
  if (den.is_zero()) throw DivisionByZero("division by the zero expression");
  if (num.is_zero()) return Expression();

  if (den.size() == 1) {
    const auto& [m, c] = den.leading();
    return make(num.times(m.inverse()).scaled(1 / c), Polynomial::constant(1));
  }

  // Denominator becomes an ordinary polynomial with no monomial factor.
  Monomial content = den.content();
  if (!content.empty()) {
    Monomial inv = content.inverse();
    num = num.times(inv);
    den = den.times(inv);
  }

  // Cancel when the denominator divides the numerator exactly.
  Monomial lift = num.content();
  std::vector<Factor> negative;
  for (const auto& f : lift.factors()) {
    if (f.exponent < 0) negative.push_back(f);
  }
  Monomial clear;
  for (const auto& f : negative) clear = clear * Monomial(f.atom, -f.exponent);
  if (auto q = num.times(clear).divide_exact(den)) {
    return make(q->times(clear.inverse()), Polynomial::constant(1));
  }

  Rational lead = den.leading().second;
  if (lead != 1) {
    Rational inv = 1 / lead;
    num = num.scaled(inv);
    den = den.scaled(inv);
  }
  return make(std::move(num), std::move(den));
}

std::optional<Rational> Expression::constant_value() const {
  if (!is_polynomial()) return std::nullopt;
  return repr_->num.constant_value();
}

NodeKind Expression::kind() const {
  if (!is_polynomial()) return NodeKind::Quotient;
  const auto& num = repr_->num;
  if (num.size() == 0) return NodeKind::Rational;
  if (num.size() > 1) return NodeKind::Sum;
  const auto& [m, c] = num.leading();
  if (m.empty()) return NodeKind::Rational;
  if (c != 1 || m.factors().size() > 1) return NodeKind::Product;
  const Factor& f = m.factors().front();
  if (f.exponent != 1) return NodeKind::Power;
  switch (f.atom.kind) {
    case AtomKind::Cell:
      return NodeKind::Cell;
    case AtomKind::Given:
      return NodeKind::Given;
    case AtomKind::Parameter:
      return NodeKind::Parameter;
  }
  return NodeKind::Parameter;
}

std::vector<Expression> Expression::children() const {
  std::vector<Expression> out;
  switch (kind()) {
    case NodeKind::Quotient:
      out.push_back(make(repr_->num, Polynomial::constant(1)));
      out.push_back(make(repr_->den, Polynomial::constant(1)));
      break;
    case NodeKind::Sum:
      for (auto it = repr_->num.terms().rbegin(); it != repr_->num.terms().rend(); ++it) {
        out.push_back(make(Polynomial::term(it->first, it->second), Polynomial::constant(1)));
      }
      break;
    case NodeKind::Product: {
      const auto& [m, c] = repr_->num.leading();
      if (c != 1) out.emplace_back(c);
      for (const auto& f : m.factors()) {
        out.push_back(make(Polynomial::term(Monomial(f.atom, f.exponent)), Polynomial::constant(1)));
      }
      break;
    }
    case NodeKind::Power: {
      const Factor& f = repr_->num.leading().first.factors().front();
      out.emplace_back(f.atom);
      out.emplace_back(Rational(f.exponent));
      break;
    }
    default:
      break;
  }
  return out;
}

std::set<Atom> Expression::atoms() const {
  std::set<Atom> out = repr_->num.atoms();
  out.merge(repr_->den.atoms());
  return out;
}

Expression operator+(const Expression& a, const Expression& b) {
  combine_arity(a.arity(), b.arity());
  if (a.is_polynomial() && b.is_polynomial()) return Expression::make(a.numerator() + b.numerator(), a.denominator());
  if (a.denominator() == b.denominator()) return Expression::quotient(a.numerator() + b.numerator(), a.denominator());
  return Expression::quotient(a.numerator() * b.denominator() + b.numerator() * a.denominator(),
                              a.denominator() * b.denominator());
}

Expression operator-(const Expression& a, const Expression& b) { return a + (-b); }

Expression Expression::operator-() const {
  return Expression(std::make_shared<const Repr>(Repr{-repr_->num, repr_->den, repr_->arity}));
}

Expression operator*(const Expression& a, const Expression& b) {
  combine_arity(a.arity(), b.arity());
  if (a.is_polynomial() && b.is_polynomial()) {
    return Expression::make(a.numerator() * b.numerator(), Polynomial::constant(1));
  }
  return Expression::quotient(a.numerator() * b.numerator(), a.denominator() * b.denominator());
}

Expression operator/(const Expression& a, const Expression& b) {
  combine_arity(a.arity(), b.arity());
  if (b.is_zero()) throw DivisionByZero("division by the zero expression");
  return Expression::quotient(a.numerator() * b.denominator(), a.denominator() * b.numerator());
}

bool operator==(const Expression& a, const Expression& b) {
  return a.repr_ == b.repr_ || (a.numerator() == b.numerator() && a.denominator() == b.denominator());
}

Expression pow(const Expression& base, int exponent) {
  if (exponent < 0) return Expression(1) / pow(base, -exponent);
  Expression result(1);
  Expression square = base;
  while (exponent > 0) {
    if (exponent & 1) result = result * square;
    exponent >>= 1;
    if (exponent > 0) square = square * square;
  }
  return result;
}

Expression differentiate(const Expression& e, const Atom& atom) {
  const Polynomial& n = e.numerator();
  if (e.is_polynomial()) return Expression::quotient(n.derivative(atom), Polynomial::constant(1));
  const Polynomial& d = e.denominator();
  return Expression::quotient(n.derivative(atom) * d - n * d.derivative(atom), d * d);
}

// -------------------------------------------------------------- evaluation

double to_double(const Rational& r) {
  constexpr double kExact = 9007199254740992.0;  // 2^53
  const mpz_class& n = r.get_num();
  const mpz_class& d = r.get_den();
  if (mpz_sizeinbase(n.get_mpz_t(), 2) <= 53 && mpz_sizeinbase(d.get_mpz_t(), 2) <= 53) {
    double dn = n.get_d();
    double dd = d.get_d();
    if (std::abs(dn) <= kExact && dd <= kExact) return dn / dd;
  }
  return r.get_d();
}

double evaluate(const Polynomial& p, const Lookup& lookup) {
  double sum = 0.0;
  for (const auto& [m, c] : p.terms()) {
    double t = to_double(c);
    for (const auto& f : m.factors()) {
      double v = lookup(f.atom);
      if (f.exponent < 0) {
        if (v == 0.0) throw DivisionByZero("division by zero evaluating " + to_string(f.atom));
        t /= std::pow(v, -f.exponent);
      } else {
        t *= f.exponent == 1 ? v : std::pow(v, f.exponent);
      }
    }
    sum += t;
  }
  return sum;
}

double evaluate(const Expression& e, const Lookup& lookup) {
  double num = evaluate(e.numerator(), lookup);
  if (e.is_polynomial()) return num;
  double den = evaluate(e.denominator(), lookup);
  if (den == 0.0) throw DivisionByZero("denominator vanishes at the evaluation point");
  return num / den;
}

double evaluate(const Expression& e, const Bindings& bindings) {
  return evaluate(e, Lookup([&](const Atom& a) {
                    auto it = bindings.find(a);
                    if (it == bindings.end()) throw UnboundSymbol("unbound symbol " + to_string(a));
                    return it->second;
                  }));
}

// ------------------------------------------------------------ substitution

Expression substitute(const Expression& e, const std::map<Atom, Expression>& replacements) {
  for (const auto& [atom, value] : replacements) {
    if (atom.has_offset()) combine_arity(e.arity(), static_cast<int>(atom.offset.size()));
    combine_arity(e.arity(), value.arity());
  }
  auto rewrite = [&](const Polynomial& p) {
    Expression sum;
    for (const auto& [m, c] : p.terms()) {
      Expression term(c);
      for (const auto& f : m.factors()) {
        auto it = replacements.find(f.atom);
        term = term * pow(it == replacements.end() ? Expression(f.atom) : it->second, f.exponent);
      }
      sum = sum + term;
    }
    return sum;
  };
  if (e.is_polynomial()) return rewrite(e.numerator());
  return rewrite(e.numerator()) / rewrite(e.denominator());
}

Expression shift(const Expression& e, const Offset& delta) {
  combine_arity(e.arity(), static_cast<int>(delta.size()));
  auto move = [&](const Atom& a) {
    if (!a.has_offset()) return a;
    Atom out = a;
    for (std::size_t i = 0; i < delta.size(); ++i) out.offset[i] += delta[i];
    return out;
  };
  return Expression::quotient(e.numerator().map_atoms(move), e.denominator().map_atoms(move));
}

// ---------------------------------------------------------------- printing

std::string to_string(const Rational& r) { return r.get_str(); }

std::string to_string(const Atom& atom, const SymbolNames& names) {
  std::string out;
  if (atom.kind == AtomKind::Cell) {
    out = atom.component < static_cast<int>(names.fields.size()) ? names.fields[atom.component]
                                                                  : "f" + std::to_string(atom.component);
  } else {
    out = atom.name;
  }
  if (atom.has_offset()) {
    out += '[';
    for (std::size_t i = 0; i < atom.offset.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(atom.offset[i]);
    }
    out += ']';
  }
  return out;
}

namespace {

std::string polynomial_to_string(const Polynomial& p, const SymbolNames& names) {
  if (p.is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  for (auto it = p.terms().rbegin(); it != p.terms().rend(); ++it) {
    const auto& [m, c] = *it;
    Rational mag = abs(c);
    if (first) {
      if (c < 0) os << '-';
    } else {
      os << (c < 0 ? " - " : " + ");
    }
    first = false;
    bool wrote = false;
    if (mag != 1 || m.empty()) {
      os << to_string(mag);
      wrote = true;
    }
    for (const auto& f : m.factors()) {
      if (wrote) os << '*';
      os << to_string(f.atom, names);
      if (f.exponent != 1) os << '^' << f.exponent;
      wrote = true;
    }
  }
  return os.str();
}

}  // namespace

std::string to_string(const Expression& e, const SymbolNames& names) {
  std::string num = polynomial_to_string(e.numerator(), names);
  if (e.is_polynomial()) return num;
  return "(" + num + ")/(" + polynomial_to_string(e.denominator(), names) + ")";
}

}  // namespace stencilforge
