#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "stencilforge/error.hpp"
#include "stencilforge/expr.hpp"
#include "stencilforge/expr_parser.hpp"

using namespace stencilforge;

namespace {

Expression phi(int o) { return Expression::cell(0, {o}); }
Expression rho(int o) { return Expression::given("rho", {o}); }
Expression h() { return Expression::parameter("h"); }

SymbolContext ctx1() {
  SymbolContext c;
  c.dimension = 1;
  c.fields = {"phi"};
  c.givens = {"rho"};
  c.parameters = {"h", "k"};
  return c;
}

Expression parse(const std::string& text) { return parse_expression(text, ctx1()); }

Bindings random_bindings(const Expression& e, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 2.0);
  Bindings b;
  for (const Atom& a : e.atoms()) b[a] = u(rng);
  return b;
}

}  // namespace

TEST(Build, LaplacianHasThreeTerms) {
  Expression lap = (phi(1) - 2 * phi(0) + phi(-1)) / pow(h(), 2);
  EXPECT_EQ(lap, parse("phi[1]/h^2 - 2*phi[0]/h^2 + phi[-1]/h^2"));
  EXPECT_EQ(lap.numerator().size(), 3u);
  Bindings b{{Atom::cell(0, {-1}), 1.0}, {Atom::cell(0, {0}), 0.0}, {Atom::cell(0, {1}), 0.0},
             {Atom::parameter("h"), 2.0}};
  EXPECT_DOUBLE_EQ(evaluate(lap, b), 0.25);
}

TEST(Build, Cancellation) {
  Expression x = phi(0);
  EXPECT_TRUE((x - x).is_zero());
  EXPECT_EQ(x - x, Expression(0L));
}

TEST(Build, RingIdentity) {
  Expression a = phi(0), b = rho(1);
  EXPECT_EQ((a + b) * (a - b), pow(a, 2) - pow(b, 2));
}

TEST(Build, ArityMismatchThrows) {
  EXPECT_THROW(Expression::cell(0, {1}) + Expression::cell(0, {1, 0}), ArityError);
}

TEST(Build, DivisionByZeroExpressionThrows) {
  EXPECT_THROW(phi(0) / (phi(1) - phi(1)), DivisionByZero);
}

TEST(Build, RationalsStayExact) {
  Expression third = Expression(Rational(1, 3));
  Expression sum = third + third + third;
  ASSERT_TRUE(sum.constant_value().has_value());
  EXPECT_EQ(*sum.constant_value(), Rational(1));
}

TEST(Differentiate, SquaredLaplacianResidual) {
  Expression r = (phi(-1) - 2 * phi(0) + phi(1)) / pow(h(), 2) - rho(0);
  Expression d = differentiate(pow(r, 2), Atom::cell(0, {0}));
  EXPECT_EQ(d, 2 * r * (Expression(-2L) / pow(h(), 2)));
}

TEST(Differentiate, GivenIsConstant) { EXPECT_TRUE(differentiate(rho(0), Atom::cell(0, {0})).is_zero()); }

TEST(Differentiate, Square) { EXPECT_EQ(differentiate(pow(phi(0), 2), Atom::cell(0, {0})), 2 * phi(0)); }

TEST(Differentiate, MatchesCentralDifferences) {
  std::mt19937_64 rng(7);
  const std::vector<Expression> exprs = {
      pow((phi(-1) - 2 * phi(0) + phi(1)) / pow(h(), 2) - rho(0), 2),
      phi(0) * phi(1) / (phi(0) + rho(0) * h()),
      pow(phi(0), 3) - phi(-1) * pow(phi(0), 2) / h() + Expression(Rational(7, 3)),
      (phi(0) - phi(-1)) / (h() * h() + phi(0) * phi(0)),
  };
  const double eps = 1e-6;
  for (const auto& e : exprs) {
    for (const Atom& v : {Atom::cell(0, {0}), Atom::cell(0, {-1})}) {
      Expression d = differentiate(e, v);
      for (int trial = 0; trial < 100; ++trial) {
        Bindings b = random_bindings(e, rng);
        b[v] = b.count(v) ? b[v] : 1.0;
        for (const Atom& a : d.atoms()) {
          if (!b.count(a)) b[a] = 1.0;
        }
        Bindings plus = b, minus = b;
        plus[v] += eps;
        minus[v] -= eps;
        const double fd = (evaluate(e, plus) - evaluate(e, minus)) / (2 * eps);
        const double exact = evaluate(d, b);
        EXPECT_NEAR(exact, fd, 1e-6 * std::max(1.0, std::abs(exact))) << to_string(e);
      }
    }
  }
}

TEST(Evaluate, Reciprocal) { EXPECT_DOUBLE_EQ(evaluate(1 / pow(h(), 2), Bindings{{Atom::parameter("h"), 2.0}}), 0.25); }

TEST(Evaluate, InteriorRuleOnLinearField) {
  // Interior 1D rule written out by hand, evaluated on phi = 0..4, rho = 0.
  Expression rule = (-phi(-2) + 4 * phi(-1) + 4 * phi(1) - phi(2) + pow(h(), 2) * (rho(-1) - 2 * rho(0) + rho(1))) / 6;
  Bindings b{{Atom::cell(0, {-2}), 0}, {Atom::cell(0, {-1}), 1}, {Atom::cell(0, {1}), 3}, {Atom::cell(0, {2}), 4},
             {Atom::given("rho", {-1}), 0}, {Atom::given("rho", {0}), 0}, {Atom::given("rho", {1}), 0},
             {Atom::parameter("h"), 1}};
  EXPECT_DOUBLE_EQ(evaluate(rule, b), 2.0);
}

TEST(Evaluate, UnboundSymbolThrows) { EXPECT_THROW(evaluate(phi(0) + h(), Bindings{{Atom::parameter("h"), 1}}), UnboundSymbol); }

TEST(Evaluate, DivisionByZeroAtPoint) {
  EXPECT_THROW(evaluate(1 / phi(0), Bindings{{Atom::cell(0, {0}), 0.0}}), DivisionByZero);
}

TEST(Substitute, ReplaceCellByParameter) {
  Expression c = Expression::parameter("k");
  EXPECT_EQ(substitute(phi(0) + phi(1), {{Atom::cell(0, {0}), c}}), c + phi(1));
}

TEST(Substitute, ShiftOffsets) {
  EXPECT_EQ(shift(phi(-1) - 2 * phi(0) + phi(1), {1}), phi(0) - 2 * phi(1) + phi(2));
}

TEST(Substitute, WrongArityThrows) {
  EXPECT_THROW(substitute(phi(0), {{Atom::cell(0, {0, 0}), Expression(1L)}}), ArityError);
  EXPECT_THROW(shift(phi(0), {1, 1}), ArityError);
}

TEST(Canonical, Idempotent) {
  const std::vector<std::string> texts = {"(phi[1] - 2*phi[0] + phi[-1])/h^2 - rho[0]",
                                          "(phi[0] + 1)*(phi[0] - 1)/(phi[0]^2 - 1)",
                                          "h^2*(rho[1] - rho[-1])/(2*h) + phi[2]/3"};
  for (const auto& t : texts) {
    Expression e = parse(t);
    const SymbolNames names{{"phi"}};
    Expression again = parse(to_string(e, names));
    EXPECT_EQ(e, again) << t;
    EXPECT_EQ(to_string(e, names), to_string(again, names)) << t;
  }
}

TEST(Canonical, PreservesValues) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  const std::vector<std::string> texts = {"(phi[1] - 2*phi[0] + phi[-1])/h^2 - rho[0]",
                                          "(phi[0]*rho[0] + h)^3/(h + 1)", "phi[-1]/(3*h) - (2/7)*phi[1]*h"};
  for (const auto& t : texts) {
    Expression e = parse(t);
    for (int trial = 0; trial < 50; ++trial) {
      double p0 = u(rng), p1 = u(rng), pm = u(rng), r0 = u(rng), hv = u(rng);
      Bindings b{{Atom::cell(0, {0}), p0}, {Atom::cell(0, {1}), p1}, {Atom::cell(0, {-1}), pm},
                 {Atom::given("rho", {0}), r0}, {Atom::parameter("h"), hv}};
      double direct = 0;
      if (t == texts[0]) direct = (p1 - 2 * p0 + pm) / (hv * hv) - r0;
      if (t == texts[1]) direct = std::pow(p0 * r0 + hv, 3) / (hv + 1);
      if (t == texts[2]) direct = pm / (3 * hv) - 2.0 / 7.0 * p1 * hv;
      EXPECT_NEAR(evaluate(e, b), direct, 1e-12 * std::max(1.0, std::abs(direct))) << t;
    }
  }
}

TEST(Parser, ReportsPosition) {
  try {
    parse("phi[0] + * 2");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1);
    EXPECT_GT(e.column(), 1);
  }
}

TEST(Parser, DecimalIsExact) { EXPECT_EQ(parse_decimal("-1.25e-3"), Rational(-1, 800)); }
