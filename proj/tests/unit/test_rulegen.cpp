#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "../oracle/oracle.hpp"
#include "stencilforge/engine.hpp"
#include "stencilforge/rulegen.hpp"

using namespace stencilforge;

namespace {

Expression parse_in(const ProblemSpec& p, const std::string& text) { return parse_expression(text, p.symbols()); }

std::set<Offset> offsets1(std::initializer_list<int> xs) {
  std::set<Offset> s;
  for (int x : xs) s.insert(Offset{x});
  return s;
}

/// Rule count by deriving every cell separately and deduplicating by text.
std::size_t brute_force_census(const ProblemSpec& spec) {
  std::set<std::string> keys;
  for (std::size_t c = 0; c < spec.cell_count(); ++c) keys.insert(rule_key(newton_rule(spec, c), spec.names()));
  return keys.size();
}

}  // namespace

TEST(LocalError, InteriorHasThreeSquaredResiduals) {
  ProblemSpec p = builtin_poisson1d(9, 1, "0", 0, 0);
  EXPECT_EQ(dependency_set(p, 4), offsets1({-1, 0, 1}));
  Expression r = parse_in(p, "(phi[-1] - 2*phi[0] + phi[1])/h^2 - rho[0]");
  Expression expected = pow(shift(r, {-1}), 2) + pow(r, 2) + pow(shift(r, {1}), 2);
  EXPECT_EQ(local_error(p, 4), expected);
}

TEST(LocalError, SecondCellHasTwoTerms) {
  ProblemSpec p = builtin_poisson1d(9, 1, "0", 0, 0);
  EXPECT_EQ(dependency_set(p, 1), offsets1({0, 1}));
  Expression r = parse_in(p, "(phi[-1] - 2*phi[0] + phi[1])/h^2 - rho[0]");
  EXPECT_EQ(local_error(p, 1), pow(r, 2) + pow(shift(r, {1}), 2));
}

TEST(LocalError, DirichletCellIsEmpty) {
  ProblemSpec p = builtin_poisson1d(9, 1, "0", 0, 0);
  EXPECT_TRUE(local_error(p, 0).is_zero());
  EXPECT_EQ(dependency_set(p, 0), offsets1({1}));
}

TEST(Gradient, MatchesFiniteDifferenceOfGlobalError) {
  ProblemSpec p = builtin_poisson1d(8, 0.5, "x0*x0 - 3", 0.25, -1);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  const auto& rho = p.fields().given[0].samples;
  for (std::size_t cell = 1; cell < 7; ++cell) {
    Expression g = gradient(local_error(p, cell), 1, 1)[0];
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> phi(8);
      for (double& v : phi) v = u(rng);
      const double eps = 1e-3;
      auto plus = phi, minus = phi;
      plus[cell] += eps;
      minus[cell] -= eps;
      const double fd = (oracle::poisson1d_error(plus, 0.5, rho) - oracle::poisson1d_error(minus, 0.5, rho)) / (2 * eps);
      auto lookup = [&](const Atom& a) {
        if (a.kind == AtomKind::Parameter) return 0.5;
        std::size_t at = cell + a.offset[0];
        return a.kind == AtomKind::Cell ? phi[at] : rho[at];
      };
      EXPECT_NEAR(evaluate(g, lookup), fd, 1e-7 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Gradient, ZeroErrorGivesZeroVector) {
  auto g = gradient(Expression(0L), 2, 3);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_TRUE(g[0].is_zero() && g[1].is_zero());
}

TEST(Hessian, Poisson1dScalars) {
  ProblemSpec p = builtin_poisson1d(9, 1, "0", 0, 0);
  Expression h4 = pow(Expression::parameter("h"), 4);
  EXPECT_EQ(hessian(local_error(p, 4), 1, 1)[0][0], Expression(12L) / h4);
  EXPECT_EQ(hessian(local_error(p, 1), 1, 1)[0][0], Expression(10L) / h4);
}

TEST(Hessian, BeamIsSymmetricAndMatchesFiniteDifferences) {
  BeamParams bp;
  bp.extents = {6, 6, 6};
  ProblemSpec spec = builtin_beam(bp);
  oracle::Box box{6, 6, 6};
  oracle::BeamCoefficients c{spec.grid().step, spec.parameters().at("hz"), spec.parameters().at("k"),
                             spec.parameters().at("n"), spec.fields().find_given("dn")->samples};
  const std::size_t cell = box.at(2, 3, 3);
  auto H = hessian(local_error(spec, cell), 2, 3);
  EXPECT_EQ(H[0][1], H[1][0]);
  std::vector<double> uv(spec.cell_count() * 2, 0.0);
  auto E = [&](const std::vector<double>& s) { return oracle::beam_error(s, box, c); };
  auto lookup = [&](const Atom& a) {
    if (a.kind == AtomKind::Parameter) return a.name == "h" ? spec.grid().step : spec.parameters().at(a.name);
    return c.dn[cell + a.offset[0] * 36 + a.offset[1] * 6 + a.offset[2]];
  };
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double eps = 1e-2;
      auto at = [&](double di, double dj) {
        auto s = uv;
        s[2 * cell + i] += di;
        s[2 * cell + j] += dj;
        return E(s);
      };
      const double fd = (at(eps, eps) - at(eps, -eps) - at(-eps, eps) + at(-eps, -eps)) / (4 * eps * eps);
      EXPECT_NEAR(evaluate(H[i][j], lookup), fd, 1e-6 * std::abs(fd) + 1e-15);
    }
}

TEST(NewtonRule, Poisson1dRulesExact) {
  ProblemSpec p = builtin_poisson1d(9, 1, "0", 0, 0);
  EXPECT_EQ(newton_rule(p, 4).components[0],
            parse_in(p, "(1/6)*(-phi[-2] + 4*phi[-1] + 4*phi[1] - phi[2] + h^2*(rho[-1] - 2*rho[0] + rho[1]))"));
  EXPECT_EQ(newton_rule(p, 1).components[0],
            parse_in(p, "(1/5)*(2*phi[-1] + 4*phi[1] - phi[2] + h^2*(rho[1] - 2*rho[0]))"));
  EXPECT_EQ(newton_rule(p, 7).components[0],
            parse_in(p, "(1/5)*(2*phi[1] + 4*phi[-1] - phi[-2] + h^2*(rho[-1] - 2*rho[0]))"));
  UpdateRule d = newton_rule(p, 0);
  EXPECT_TRUE(d.identity);
  EXPECT_EQ(d.components[0], Expression::cell(0, {0}));
}

TEST(NewtonRule, Poisson3dInteriorKernel) {
  ProblemSpec p = builtin_poisson3d({7, 7, 7}, 1, "0", 0);
  UpdateRule r = newton_rule(p, p.grid().index({3, 3, 3}));
  // 12/42 on the six nearest cells, -2/42 on the twelve diagonals, -1/42 two cells out.
  Expression expected;
  for (int a = 0; a < 3; ++a)
    for (int s : {-1, 1}) {
      Offset o(3, 0);
      o[a] = s;
      expected += Expression(Rational(12, 42)) * Expression::cell(0, o);
      o[a] = 2 * s;
      expected += Expression(Rational(-1, 42)) * Expression::cell(0, o);
    }
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b)
      for (int s : {-1, 1})
        for (int t : {-1, 1}) {
          Offset o(3, 0);
          o[a] = s;
          o[b] = t;
          expected += Expression(Rational(-2, 42)) * Expression::cell(0, o);
        }
  Expression h2 = pow(Expression::parameter("h"), 2);
  expected += Expression(Rational(-6, 42)) * h2 * Expression::given("rho", {0, 0, 0});
  for (int a = 0; a < 3; ++a)
    for (int s : {-1, 1}) {
      Offset o(3, 0);
      o[a] = s;
      expected += Expression(Rational(1, 42)) * h2 * Expression::given("rho", o);
    }
  EXPECT_EQ(r.components[0], expected);
  EXPECT_EQ(r.neighborhood.field.size(), 24u);
  EXPECT_EQ(r.hessian[0][0], Expression(84L) / pow(Expression::parameter("h"), 4));
}

TEST(Neighborhood, Poisson1dNeighborhoods) {
  ProblemSpec p = builtin_poisson1d(9, 1, "0", 0, 0);
  EXPECT_EQ(newton_rule(p, 4).neighborhood.field, offsets1({-2, -1, 1, 2}));
  EXPECT_EQ(newton_rule(p, 1).neighborhood.field, offsets1({-1, 1, 2}));
  EXPECT_EQ(newton_rule(p, 7).neighborhood.field, offsets1({-2, -1, 1}));
  EXPECT_TRUE(newton_rule(p, 0).neighborhood.field.empty());
  EXPECT_TRUE(newton_rule(p, 8).neighborhood.field.empty());
}

TEST(Classify, Poisson1dHasFourRules) {
  for (int n : {6, 7, 10, 65}) {
    RuleTable t = classify(builtin_poisson1d(n, 1, "0", 0, 0));
    EXPECT_EQ(t.rules.size(), 4u) << n;
    EXPECT_EQ(t.rule_of(0), t.rule_of(n - 1));
  }
  EXPECT_EQ(classify(builtin_poisson1d(5, 1, "0", 0, 0)).rules.size(), brute_force_census(builtin_poisson1d(5, 1, "0", 0, 0)));
  EXPECT_EQ(classify(builtin_poisson1d(4, 1, "0", 0, 0)).rules.size(), 3u);
}

TEST(Classify, Poisson3dCensus) {
  for (std::vector<int> e : {std::vector<int>{7, 7, 7}, {8, 7, 9}, {20, 20, 20}}) {
    EXPECT_EQ(classify(builtin_poisson3d(e, 1, kRampProfile, 0)).rules.size(), 28u);
  }
  for (std::vector<int> e : {std::vector<int>{5, 5, 5}, {7, 5, 5}, {7, 7, 7}}) {
    ProblemSpec p = builtin_poisson3d(e, 1, "0", 0);
    EXPECT_EQ(classify(p).rules.size(), brute_force_census(p));
  }
}

TEST(Classify, BeamCensusMatchesBruteForce) {
  for (bool full : {false, true}) {
    BeamParams bp;
    bp.extents = {8, 8, 8};
    bp.full_laplacian = full;
    ProblemSpec p = builtin_beam(bp);
    RuleTable t = classify(p);
    EXPECT_EQ(t.rules.size(), brute_force_census(p));
    EXPECT_EQ(t.rules.size(), full ? 28u : 19u);
  }
}

TEST(Classify, EveryCellGetsItsOwnDerivation) {
  ProblemSpec p = builtin_poisson3d({6, 7, 5}, 1, "0", 0);
  RuleTable t = classify(p);
  for (std::size_t c = 0; c < p.cell_count(); ++c) {
    EXPECT_EQ(rule_key(t.rules[t.rule_of(c)], p.names()), rule_key(newton_rule(p, c), p.names()));
  }
}

TEST(Classify, RulesArePairwiseDistinct) {
  ProblemSpec p = builtin_poisson3d({7, 7, 7}, 1, "0", 0);
  RuleTable t = classify(p);
  std::set<std::string> keys;
  for (const auto& r : t.rules) keys.insert(rule_key(r, p.names()));
  EXPECT_EQ(keys.size(), t.rules.size());
}

TEST(Locality, HoldsOnEveryBuiltin) {
  std::vector<ProblemSpec> specs = {builtin_poisson1d(9, 1, "0", 0, 0), builtin_poisson3d({7, 7, 7}, 1, "0", 0)};
  BeamParams bp;
  bp.extents = {8, 8, 8};
  specs.push_back(builtin_beam(bp));
  bp.full_laplacian = true;
  specs.push_back(builtin_beam(bp));
  for (const auto& p : specs) {
    LocalityReport rep = locality_check(classify(p), p);
    EXPECT_TRUE(rep.ok);
    for (const auto& e : rep.entries) EXPECT_TRUE(e.violations.empty());
  }
}

TEST(Locality, InteriorBoundIsRadiusTwo) {
  ProblemSpec p = builtin_poisson1d(9, 1, "0", 0, 0);
  RuleTable t = classify(p);
  LocalityReport rep = locality_check(t, p);
  const auto& entry = rep.entries[t.rule_of(4)];
  std::set<Offset> bound = entry.bound;
  bound.erase(Offset{0});
  EXPECT_EQ(bound, offsets1({-2, -1, 1, 2}));
}

TEST(Locality, ViolationIsReported) {
  ProblemSpec p = builtin_poisson1d(9, 1, "0", 0, 0);
  RuleTable t = classify(p);
  auto& rule = t.rules[t.rule_of(4)];
  rule.components[0] = rule.components[0] + Expression::cell(0, {3});
  rule.neighborhood = neighborhood(rule);
  EXPECT_FALSE(locality_check(t, p).ok);
}

TEST(Export, RoundTrip) {
  for (const ProblemSpec& p : {builtin_poisson1d(9, 1, "0", 0, 0), builtin_poisson3d({7, 7, 7}, 1, "0", 0)}) {
    RuleTable t = classify(p);
    nlohmann::json doc = export_rules(t, p);
    auto back = import_rules(nlohmann::json::parse(doc.dump()), p);
    ASSERT_EQ(back.size(), t.rules.size());
    for (std::size_t r = 0; r < back.size(); ++r) EXPECT_EQ(back[r], t.rules[r].components);
  }
}

TEST(Export, Poisson1dRulesSurviveExport) {
  ProblemSpec p = builtin_poisson1d(9, 1, "0", 0, 0);
  nlohmann::json doc = export_rules(classify(p), p);
  ASSERT_EQ(doc["rules"].size(), 4u);
  std::set<std::string> got;
  for (const auto& r : doc["rules"]) {
    got.insert(to_string(parse_in(p, r["components"][0]["expression"].get<std::string>()), p.names()));
  }
  std::set<std::string> expected;
  for (const char* t : {"phi[0]", "(1/6)*(-phi[-2] + 4*phi[-1] + 4*phi[1] - phi[2] + h^2*(rho[-1] - 2*rho[0] + rho[1]))",
                        "(1/5)*(2*phi[-1] + 4*phi[1] - phi[2] + h^2*(rho[1] - 2*rho[0]))",
                        "(1/5)*(2*phi[1] + 4*phi[-1] - phi[-2] + h^2*(rho[-1] - 2*rho[0]))"}) {
    expected.insert(to_string(parse_in(p, t), p.names()));
  }
  EXPECT_EQ(got, expected);
}

TEST(Export, AllDirichletGivesOneIdentityRule) {
  const char* text = "dim 2 extent 3 4 step h = 1\nfield u\nregion all where depth >= 0 dirichlet 2\n";
  ProblemSpec p = parse_problem(text);
  RuleTable t = classify(p);
  ASSERT_EQ(t.rules.size(), 1u);
  EXPECT_TRUE(t.rules[0].identity);
  EXPECT_EQ(export_rules(t, p)["rules"].size(), 1u);
}

TEST(FixedPoint, LinearFieldIsPreserved) {
  ProblemSpec p = builtin_poisson1d(12, 0.1, "0", 0, 1);
  RuleTable t = classify(p);
  Automaton a(p, t, false);
  std::vector<double> line(12);
  for (int i = 0; i < 12; ++i) line[i] = i / 11.0;
  for (std::size_t c = 0; c < 12; ++c) {
    double out = 0;
    ASSERT_TRUE(a.propose(c, line.data(), &out));
    EXPECT_NEAR(out, line[c], 1e-12);
  }
}

TEST(Oracle, RuleOutputsMatchFiniteDifferenceNewton) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1, 1);
  // 1D, random rho via a grid of samples
  for (int n : {5, 6, 8}) {
    ProblemSpec p = builtin_poisson1d(n, 0.3, "sin(3*x0) + x0/7", 0, 0);
    RuleTable t = classify(p);
    Automaton a(p, t, false);
    const auto& rho = p.fields().given[0].samples;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> phi(n);
      for (double& v : phi) v = u(rng);
      for (std::size_t c = 1; c + 1 < static_cast<std::size_t>(n); ++c) {
        auto expected = oracle::fd_newton([&](const std::vector<double>& s) { return oracle::poisson1d_error(s, 0.3, rho); },
                                          phi, c, 1);
        double got = 0;
        ASSERT_TRUE(a.propose(c, phi.data(), &got));
        EXPECT_NEAR(got, expected[0], 1e-7 * std::max({1.0, std::abs(got)}));
      }
    }
  }
}
