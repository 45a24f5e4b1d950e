#include <gtest/gtest.h>

#include <complex>
#include <filesystem>
#include <fstream>
#include <random>

#include "../oracle/oracle.hpp"
#include "stencilforge/error.hpp"
#include "stencilforge/metrics.hpp"
#include "stencilforge/problem.hpp"
#include "stencilforge/rulegen.hpp"

using namespace stencilforge;
namespace fs = std::filesystem;

namespace {

const char* kPoisson1d = R"(# 1D Poisson
dim 1 extent 7 step h = 0.5
field phi
given rho expr 1 + x0
region left where x = 0 dirichlet 0
region right where x = end dirichlet 1
region interior where x depth >= 1
  residual (phi[-1] - 2*phi[0] + phi[1])/h^2 - rho[0]
)";

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("stencilforge_" + name + "_" + std::to_string(::getpid()));
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Parse, Poisson1dSource) {
  ProblemSpec p = parse_problem(kPoisson1d);
  EXPECT_EQ(p.dimension(), 1);
  EXPECT_EQ(p.grid().extents, std::vector<int>{7});
  ASSERT_EQ(p.regions().size(), 3u);
  EXPECT_TRUE(p.regions()[0].dirichlet);
  EXPECT_TRUE(p.regions()[1].dirichlet);
  ASSERT_EQ(p.regions()[2].residuals.size(), 1u);
  Expression expected = (Expression::cell(0, {-1}) - 2 * Expression::cell(0, {0}) + Expression::cell(0, {1})) /
                            pow(Expression::parameter("h"), 2) -
                        Expression::given("rho", {0});
  EXPECT_EQ(p.regions()[2].residuals[0], expected);
  EXPECT_EQ(p.residual_cell_count(), 5u);
  EXPECT_DOUBLE_EQ(p.fields().given[0].samples[3], 4.0);
  EXPECT_DOUBLE_EQ(p.dirichlet_value(6, 0), 1.0);
}

TEST(Parse, CellInNoRegionIsRejected) {
  std::string text = kPoisson1d;
  text.replace(text.find("region right where x = end dirichlet 1\n"), 39, "");
  EXPECT_THROW(parse_problem(text), ValidationError);
}

TEST(Parse, OverlapIsRejected) {
  std::string text = kPoisson1d;
  text.replace(text.find("x depth >= 1"), 12, "x in [0, end]");
  EXPECT_THROW(parse_problem(text), ValidationError);
}

TEST(Parse, DanglingOffsetIsRejected) {
  const char* text = R"(dim 1 extent 5 step h = 1
field phi
region right where x = end dirichlet 0
region rest where x in [0, end - 1]
  residual phi[-1] - phi[0]
)";
  EXPECT_THROW(parse_problem(text), ValidationError);
}

TEST(Parse, UndeclaredSymbolIsRejected) {
  std::string text = kPoisson1d;
  text.replace(text.find("rho[0]\n"), 6, "sigma[0]");
  EXPECT_THROW(parse_problem(text), Error);
}

TEST(Parse, SyntaxErrorHasPosition) {
  std::string text = kPoisson1d;
  text.replace(text.find("where x = 0"), 5, "wher");
  try {
    parse_problem(text);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5);
  }
}

TEST(Parse, GivenGridFile) {
  fs::path dir = temp_dir("grid");
  GridSpec g;
  g.dimension = 1;
  g.extents = {7};
  std::vector<double> samples{0.5, 1, 1.5, 2, 2.5, 3, 3.5};
  write_given_grid(dir / "rho.txt", g, samples);
  std::ofstream(dir / "p.pde") << "dim 1 extent 7 step h = 1\nfield phi\ngiven rho grid rho.txt\n"
                                  "region ends where x = 0 or x = end dirichlet 0\n"
                                  "region interior where x depth >= 1 residual phi[-1] - 2*phi[0] + phi[1] - rho[0]\n";
  ProblemSpec p = load_problem(dir / "p.pde");
  EXPECT_EQ(p.fields().given[0].samples, samples);
  fs::remove_all(dir);
}

TEST(Parse, RoundTripThroughRender) {
  fs::path dir = temp_dir("render");
  std::vector<ProblemSpec> specs = {parse_problem(kPoisson1d), builtin_poisson1d(9, 0.25, "x0*x0", -1, 2),
                                    builtin_poisson3d({5, 6, 7}, 1, kRampProfile, 0.5), builtin_beam({})};
  BeamParams full;
  full.extents = {7, 7, 9};
  full.full_laplacian = true;
  specs.push_back(builtin_beam(full));
  for (const auto& p : specs) {
    std::string text = render_problem(p, &dir);
    ProblemSpec q = parse_problem(text, dir);
    EXPECT_EQ(p, q) << text;
    EXPECT_EQ(render_problem(q, &dir), text);
  }
  fs::remove_all(dir);
}

TEST(Builtins, Poisson1dSizes) {
  ProblemSpec p = builtin_poisson1d(5, 1, "0", 0, 0);
  EXPECT_EQ(p.residual_cell_count(), 3u);
  for (std::size_t c : {1u, 2u, 3u}) EXPECT_FALSE(p.is_dirichlet(c));
  EXPECT_NO_THROW(builtin_poisson1d(4, 1, "0", 0, 0));
  EXPECT_THROW(builtin_poisson1d(2, 1, "0", 0, 0), ValidationError);
}

TEST(Builtins, Poisson3dSizes) {
  ProblemSpec p = builtin_poisson3d({5, 5, 5}, 1, "0", 0);
  EXPECT_EQ(p.residual_cell_count(), 27u);
  EXPECT_NO_THROW(builtin_poisson3d({7, 5, 5}, 1, "0", 0));
  EXPECT_THROW(builtin_poisson3d({4, 5, 5}, 1, "0", 0), ValidationError);
  EXPECT_THROW(builtin_poisson3d({5, 5}, 1, "0", 0), ValidationError);
}

TEST(Builtins, Poisson3dRampRunsAlongX) {
  ProblemSpec p = builtin_poisson3d({5, 5, 5}, 1, kRampProfile, 0);
  const auto& rho = p.fields().given[0].samples;
  const auto& g = p.grid();
  EXPECT_DOUBLE_EQ(rho[g.index({0, 2, 3})], 1.0);
  EXPECT_DOUBLE_EQ(rho[g.index({4, 1, 1})], 0.0);
  EXPECT_DOUBLE_EQ(rho[g.index({2, 0, 4})], 0.5);
}

TEST(Builtins, BeamRejectsBadParameters) {
  BeamParams p;
  p.wavelength = 0;
  EXPECT_THROW(builtin_beam(p), ValidationError);
  p = {};
  p.extents = {4, 4, 30};
  EXPECT_THROW(builtin_beam(p), ValidationError);
  p = {};
  p.window = -1;
  EXPECT_THROW(builtin_beam(p), ValidationError);
}

TEST(Builtins, BeamZeroInputHasZeroResiduals) {
  BeamParams p;
  p.extents = {7, 7, 7};
  p.input_amplitude = 0;
  p.depth = 0;
  ProblemSpec spec = builtin_beam(p);
  std::vector<double> zero(spec.cell_count() * 2, 0.0);
  ResidualEvaluator r(spec);
  for (std::size_t c = 0; c < spec.cell_count(); ++c) EXPECT_EQ(r.cell_error(c, zero.data()), 0.0);
}

TEST(Builtins, BeamSplitMatchesComplexResidual) {
  BeamParams bp;
  bp.extents = {7, 7, 8};
  ProblemSpec spec = builtin_beam(bp);
  oracle::Box box{7, 7, 8};
  oracle::BeamCoefficients c{spec.grid().step, spec.parameters().at("hz"), spec.parameters().at("k"),
                             spec.parameters().at("n"), spec.fields().find_given("dn")->samples};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  ResidualEvaluator eval(spec);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> uv(spec.cell_count() * 2);
    for (double& v : uv) v = u(rng);
    for (int x = 1; x < 6; ++x)
      for (int y = 1; y < 6; ++y)
        for (int z = 1; z < 8; ++z) {
          std::complex<double> expected = oracle::beam_residual(uv, box, c, x, y, z);
          auto r = eval.residuals(box.at(x, y, z), uv.data());
          ASSERT_EQ(r.size(), 2u);
          EXPECT_NEAR(r[0], expected.real(), 1e-12 * (1 + std::abs(expected)));
          EXPECT_NEAR(r[1], expected.imag(), 1e-12 * (1 + std::abs(expected)));
        }
  }
}

TEST(Builtins, PartitionHoldsAtEveryLegalSize) {
  for (int n = 3; n <= 12; ++n) {
    ProblemSpec p = builtin_poisson1d(n, 1, "0", 0, 0);
    for (std::size_t c = 0; c < p.cell_count(); ++c) {
      EXPECT_EQ(p.is_dirichlet(c), c == 0 || c + 1 == p.cell_count());
    }
  }
  for (int nx = 5; nx <= 8; ++nx)
    for (int ny = 5; ny <= 7; ++ny) {
      ProblemSpec p = builtin_poisson3d({nx, ny, 6}, 1, "0", 0);
      for (std::size_t c = 0; c < p.cell_count(); ++c) {
        auto x = p.grid().coords(c);
        bool face = false;
        for (int a = 0; a < 3; ++a) face = face || x[a] == 0 || x[a] == p.grid().extents[a] - 1;
        EXPECT_EQ(p.is_dirichlet(c), face);
      }
    }
  for (bool full : {false, true})
    for (int n = 5; n <= 8; ++n) {
      BeamParams bp;
      bp.extents = {n, n, n + 1};
      bp.full_laplacian = full;
      ProblemSpec p = builtin_beam(bp);
      for (std::size_t c = 0; c < p.cell_count(); ++c) {
        auto x = p.grid().coords(c);
        bool wall = x[0] == 0 || x[1] == 0 || x[0] == n - 1 || x[1] == n - 1;
        bool fixed = wall || x[2] == 0 || (full && x[2] == n);
        EXPECT_EQ(p.is_dirichlet(c), fixed);
      }
    }
}

TEST(Builtins, Poisson1dSecondDerivativeIsConstant) {
  for (double h : {1.0, 0.5, 0.125}) {
    ProblemSpec p = builtin_poisson1d(6, h, "0", 0, 0);
    Expression d = differentiate(p.regions()[2].residuals[0], Atom::cell(0, {0}));
    ASSERT_TRUE(d.atoms().size() == 1) << to_string(d);
    EXPECT_DOUBLE_EQ(evaluate(d, Bindings{{Atom::parameter("h"), h}}), -2 / (h * h));
  }
}

TEST(Profiles, ClosedForms) {
  GridSpec g;
  g.dimension = 2;
  g.extents = {3, 4};
  auto v = evaluate_profile("x0 + 10*x1 + n1 + pi*0 + exp(0)", g, {});
  EXPECT_DOUBLE_EQ(v[g.index({2, 3})], 2 + 30 + 4 + 1);
  EXPECT_THROW(evaluate_profile("x0 +", g, {}), Error);
}
