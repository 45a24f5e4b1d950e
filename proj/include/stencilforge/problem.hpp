#pragma once

// Discretized differential problems: mesh geometry, fields, given functions,
// regions with their residuals or Dirichlet constants, and the text DSL.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stencilforge/expr.hpp"
#include "stencilforge/expr_parser.hpp"

namespace stencilforge {

/// Rectangular lattice with row-major cell numbering (last axis fastest).
struct GridSpec {
  int dimension = 1;
  std::vector<int> extents;
  std::string step_name = "h";
  double step = 1.0;

  std::size_t cell_count() const;
  std::vector<std::ptrdiff_t> strides() const;
  std::vector<int> coords(std::size_t cell) const;
  std::size_t index(const std::vector<int>& coords) const;
  bool contains(const std::vector<int>& coords) const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Where the samples of a given function came from; kept for rendering.
struct GivenSource {
  enum class Kind { Profile, GridFile, Samples };
  Kind kind = Kind::Samples;
  std::string text;  // profile expression or resolved grid path

  friend bool operator==(const GivenSource&, const GivenSource&) = default;
};

struct GivenFunction {
  std::string name;
  GivenSource source;
  std::vector<double> samples;  // one per cell, row-major

  // Sources are provenance only; two functions are equal when their samples are.
  friend bool operator==(const GivenFunction& a, const GivenFunction& b) {
    return a.name == b.name && a.samples == b.samples;
  }
};

struct FieldSpec {
  std::vector<std::string> components;
  std::vector<GivenFunction> given;

  int arity() const { return static_cast<int>(components.size()); }
  const GivenFunction* find_given(std::string_view name) const;

  friend bool operator==(const FieldSpec&, const FieldSpec&) = default;
};

/// One per-axis index test. `axis == -1` applies a depth test to every axis.
struct AxisPredicate {
  enum class Test { Equals, InRange, DepthAtLeast };
  struct Bound {
    bool from_end = false;  // value counts back from extent-1
    int value = 0;
    int resolve(int extent) const { return from_end ? extent - 1 - value : value; }
    friend bool operator==(const Bound&, const Bound&) = default;
  };

  int axis = 0;
  Test test = Test::Equals;
  Bound lo;
  Bound hi;

  bool matches(const std::vector<int>& coords, const std::vector<int>& extents) const;
  friend bool operator==(const AxisPredicate&, const AxisPredicate&) = default;
};

/// Disjunction of conjunctions of axis tests; an empty conjunction is "all".
struct Predicate {
  std::vector<std::vector<AxisPredicate>> alternatives;

  bool matches(const std::vector<int>& coords, const std::vector<int>& extents) const;
  friend bool operator==(const Predicate&, const Predicate&) = default;
};

/// Dirichlet constant: a number, or the name of a given function sampled per cell.
using DirichletValue = std::variant<double, std::string>;

struct Region {
  std::string name;
  Predicate where;
  bool dirichlet = false;
  std::vector<DirichletValue> values;   // Dirichlet: one per field component
  std::vector<Expression> residuals;    // residual-bearing: n scalar equations

  friend bool operator==(const Region&, const Region&) = default;
};

class ProblemSpec {
 public:
  ProblemSpec() = default;

  /// Validates every invariant and computes the cell-to-region map.
  ProblemSpec(GridSpec grid, FieldSpec fields, std::vector<Region> regions,
              std::map<std::string, double> parameters);

  const GridSpec& grid() const { return grid_; }
  const FieldSpec& fields() const { return fields_; }
  const std::vector<Region>& regions() const { return regions_; }
  const std::map<std::string, double>& parameters() const { return parameters_; }

  int dimension() const { return grid_.dimension; }
  int field_arity() const { return fields_.arity(); }
  std::size_t cell_count() const { return grid_.cell_count(); }

  int region_of(std::size_t cell) const { return cell_region_[cell]; }
  const std::vector<int>& cell_regions() const { return cell_region_; }
  bool is_dirichlet(std::size_t cell) const { return regions_[cell_region_[cell]].dirichlet; }
  std::size_t residual_cell_count() const;

  /// Value of Dirichlet component `component` at `cell`.
  double dirichlet_value(std::size_t cell, int component) const;

  SymbolContext symbols() const;
  SymbolNames names() const { return {fields_.components}; }

  friend bool operator==(const ProblemSpec& a, const ProblemSpec& b);

 private:
  void validate();

  GridSpec grid_;
  FieldSpec fields_;
  std::vector<Region> regions_;
  std::map<std::string, double> parameters_;
  std::vector<int> cell_region_;
};

/// Parses the problem DSL. Grid file paths are resolved against `base_dir`.
///
///   problem ::= header decl* region+
///   header  ::= "dim" INT "extent" INT+ "step" NAME "=" FLOAT
///   decl    ::= "field" NAME ("," NAME)* | "given" NAME ("grid" PATH | "expr" profile)
///             | "param" NAME "=" FLOAT
///   region  ::= "region" NAME "where" predicate ("dirichlet" constlist | ("residual" expr)+)
///
/// Lines starting with '#' are comments. `dirichlet` and `residual` clauses may
/// follow the predicate on the same line or start continuation lines.
ProblemSpec parse_problem(std::string_view text, const std::filesystem::path& base_dir = ".");
ProblemSpec load_problem(const std::filesystem::path& path);

/// Renders back to the DSL. Given functions without a profile or file source
/// are written as grid files into `grid_dir`, which is then required.
std::string render_problem(const ProblemSpec& spec, const std::filesystem::path* grid_dir = nullptr);

std::string to_string(const Predicate& p, int dimension);

/// Evaluates a closed-form profile onto the grid. Variables: x0.. (cell index
/// per axis, also x, y, z, t), n0.. (extents), pi, and numeric parameters.
/// Functions: exp, sqrt, sin, cos, abs.
std::vector<double> evaluate_profile(std::string_view profile, const GridSpec& grid,
                                     const std::map<std::string, double>& parameters);

/// Given-grid file: line 1 "dims d n1 ... nd", then one sample per line, row-major.
std::vector<double> read_given_grid(const std::filesystem::path& path, const GridSpec& grid);
void write_given_grid(const std::filesystem::path& path, const GridSpec& grid, const std::vector<double>& samples);

// ---------------------------------------------------------------- builtins

/// Linear ramp from 1 at index 0 to 0 at the last index along axis 0.
inline constexpr std::string_view kRampProfile = "1 - x0/(n0 - 1)";

/// 1D Poisson: centered second difference over h^2 minus rho, both ends Dirichlet.
ProblemSpec builtin_poisson1d(int n, double h, std::string_view rho_profile, double left, double right);

/// 3D Poisson: 7-point Laplacian minus rho, all six faces Dirichlet at `boundary`.
ProblemSpec builtin_poisson3d(const std::vector<int>& extents, double h, std::string_view rho_profile,
                              double boundary);

struct BeamParams {
  std::vector<int> extents{30, 30, 30};  // x, y transverse; z propagation
  double window = 30.0;                   // transverse width, micrometres
  double wavelength = 0.2;                // vacuum wavelength, micrometres
  double length = 3000.0;                 // propagation length, micrometres
  double index = 1.5;                     // background refractive index n
  double depth = 1e-4;                    // waveguide index modulation
  double waist = 10.0;                    // input beam width w; waveguide width is w/2
  double input_offset = 5.0;              // beam centre minus waveguide centre along x
  double input_amplitude = 1.0;
  bool full_laplacian = false;            // include the z second difference
};

/// Coupled real/imaginary residuals of dE/dz - (i/2k) Lap E - (ik/n) dn E = 0,
/// with a backward difference along z and Dirichlet input plane at z = 0.
ProblemSpec builtin_beam(const BeamParams& params);

}  // namespace stencilforge
