#include "stencilforge/compiled.hpp"

#include <cmath>
#include <map>
#include <tuple>

#include "stencilforge/error.hpp"

namespace stencilforge {

namespace {

using FactorKey = std::tuple<int, int, std::ptrdiff_t, int>;  // kind, given, delta, exponent

double power(double v, int e) {
  if (e == 1) return v;
  if (e == 2) return v * v;
  if (e > 0) return std::pow(v, e);
  return 1.0 / std::pow(v, -e);
}

}  // namespace

std::vector<const double*> given_buffers(const ProblemSpec& spec) {
  std::vector<const double*> out;
  for (const auto& g : spec.fields().given) out.push_back(g.samples.data());
  return out;
}

CompiledPolynomial::CompiledPolynomial(const Polynomial& p, const ProblemSpec& spec) {
  one_ = p.is_one();
  const auto strides = spec.grid().strides();
  const std::ptrdiff_t m = spec.field_arity();
  arity_ = m;
  const auto& givens = spec.fields().given;

  std::map<std::vector<FactorKey>, double> merged;
  for (const auto& [mono, c] : p.terms()) {
    double coefficient = to_double(c);
    std::vector<FactorKey> key;
    for (const auto& f : mono.factors()) {
      const Atom& a = f.atom;
      if (a.kind == AtomKind::Parameter) {
        auto it = spec.parameters().find(a.name);
        if (it == spec.parameters().end()) throw UnboundSymbol("unbound parameter " + a.name);
        coefficient *= power(it->second, f.exponent);
        continue;
      }
      std::ptrdiff_t delta = 0;
      for (std::size_t ax = 0; ax < a.offset.size(); ++ax) delta += a.offset[ax] * strides[ax];
      if (a.kind == AtomKind::Cell) {
        key.emplace_back(0, 0, delta * m + a.component, f.exponent);
      } else {
        int g = 0;
        while (g < static_cast<int>(givens.size()) && givens[g].name != a.name) ++g;
        if (g == static_cast<int>(givens.size())) throw UnboundSymbol("unbound given " + a.name);
        key.emplace_back(1, g, delta, f.exponent);
      }
    }
    merged[key] += coefficient;
  }
  for (const auto& [key, coefficient] : merged) {
    Term t;
    t.coefficient = coefficient;
    t.begin = static_cast<std::uint32_t>(factors_.size());
    for (const auto& [kind, g, delta, e] : key) factors_.push_back({kind == 0, g, delta, e});
    t.end = static_cast<std::uint32_t>(factors_.size());
    terms_.push_back(t);
  }
}

double CompiledPolynomial::term_weight(const Term& t, std::size_t cell, const EvalContext& ctx) const {
  double v = t.coefficient;
  for (std::uint32_t i = t.begin; i < t.end; ++i) {
    const Factor& f = factors_[i];
    if (!f.cell) v *= power((*ctx.givens)[f.given][static_cast<std::ptrdiff_t>(cell) + f.delta], f.exponent);
  }
  return v;
}

double CompiledPolynomial::evaluate(std::size_t cell, const EvalContext& ctx) const {
  if (one_) return 1.0;
  const double* base = ctx.state + cell * arity_;
  double sum = 0;
  for (const Term& t : terms_) {
    double v = t.coefficient;
    for (std::uint32_t i = t.begin; i < t.end; ++i) {
      const Factor& f = factors_[i];
      double x = f.cell ? base[f.delta]
                        : (*ctx.givens)[f.given][static_cast<std::ptrdiff_t>(cell) + f.delta];
      v *= power(x, f.exponent);
    }
    sum += v;
  }
  return sum;
}

double CompiledPolynomial::magnitude(std::size_t cell, const EvalContext& ctx) const {
  double sum = 0;
  for (const Term& t : terms_) {
    double v = t.coefficient;
    for (std::uint32_t i = t.begin; i < t.end; ++i) {
      const Factor& f = factors_[i];
      double x = f.cell ? ctx.state[cell * arity_ + f.delta] : (*ctx.givens)[f.given][static_cast<std::ptrdiff_t>(cell) + f.delta];
      v *= power(x, f.exponent);
    }
    sum += std::abs(v);
  }
  return sum;
}

bool CompiledPolynomial::has_cell_factors() const {
  for (const auto& f : factors_) {
    if (f.cell) return true;
  }
  return false;
}

bool CompiledPolynomial::affine_in_cells() const {
  for (const Term& t : terms_) {
    int cells = 0;
    for (std::uint32_t i = t.begin; i < t.end; ++i) {
      if (!factors_[i].cell) continue;
      if (factors_[i].exponent != 1) return false;
      ++cells;
    }
    if (cells > 1) return false;
  }
  return true;
}

bool CompiledRational::evaluate(std::size_t cell, const EvalContext& ctx, double& out) const {
  double n = num.evaluate(cell, ctx);
  if (den.is_one()) {
    out = n;
    return true;
  }
  double d = den.evaluate(cell, ctx);
  if (d == 0.0 || std::abs(d) < kSingularThreshold * den.magnitude(cell, ctx)) return false;
  out = n / d;
  return true;
}

double CompiledRational::evaluate(std::size_t cell, const EvalContext& ctx) const {
  double out = 0;
  if (!evaluate(cell, ctx, out)) throw DivisionByZero("singular denominator");
  return out;
}

}  // namespace stencilforge
