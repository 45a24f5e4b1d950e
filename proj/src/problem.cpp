#include "stencilforge/problem.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "stencilforge/error.hpp"
#include "stencilforge/format.hpp"

namespace stencilforge {

// ------------------------------------------------------------------ grid

std::size_t GridSpec::cell_count() const {
  std::size_t n = 1;
  for (int e : extents) n *= static_cast<std::size_t>(e);
  return n;
}

std::vector<std::ptrdiff_t> GridSpec::strides() const {
  std::vector<std::ptrdiff_t> s(extents.size(), 1);
  for (int a = static_cast<int>(extents.size()) - 2; a >= 0; --a) s[a] = s[a + 1] * extents[a + 1];
  return s;
}

std::vector<int> GridSpec::coords(std::size_t cell) const {
  std::vector<int> c(extents.size());
  for (int a = static_cast<int>(extents.size()) - 1; a >= 0; --a) {
    c[a] = static_cast<int>(cell % static_cast<std::size_t>(extents[a]));
    cell /= static_cast<std::size_t>(extents[a]);
  }
  return c;
}

std::size_t GridSpec::index(const std::vector<int>& c) const {
  std::size_t i = 0;
  for (std::size_t a = 0; a < extents.size(); ++a) i = i * static_cast<std::size_t>(extents[a]) + c[a];
  return i;
}

bool GridSpec::contains(const std::vector<int>& c) const {
  for (std::size_t a = 0; a < extents.size(); ++a) {
    if (c[a] < 0 || c[a] >= extents[a]) return false;
  }
  return true;
}

const GivenFunction* FieldSpec::find_given(std::string_view name) const {
  for (const auto& g : given) {
    if (g.name == name) return &g;
  }
  return nullptr;
}

// ------------------------------------------------------------ predicates

bool AxisPredicate::matches(const std::vector<int>& coords, const std::vector<int>& extents) const {
  auto test_axis = [&](int a) {
    int x = coords[a];
    int n = extents[a];
    switch (test) {
      case Test::Equals:
        return x == lo.resolve(n);
      case Test::InRange:
        return lo.resolve(n) <= x && x <= hi.resolve(n);
      case Test::DepthAtLeast:
        return lo.value <= x && x <= n - 1 - lo.value;
    }
    return false;
  };
  if (axis >= 0) return test_axis(axis);
  for (std::size_t a = 0; a < coords.size(); ++a) {
    if (!test_axis(static_cast<int>(a))) return false;
  }
  return true;
}

bool Predicate::matches(const std::vector<int>& coords, const std::vector<int>& extents) const {
  if (alternatives.empty()) return true;
  for (const auto& conj : alternatives) {
    bool all = true;
    for (const auto& t : conj) {
      if (!t.matches(coords, extents)) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

namespace {

std::string axis_name(int axis, int dimension) {
  static constexpr std::string_view kAliases = "xyzt";
  if (dimension <= 4) return std::string(1, kAliases[axis]);
  return "a" + std::to_string(axis);
}

std::string bound_string(const AxisPredicate::Bound& b) {
  if (!b.from_end) return std::to_string(b.value);
  return b.value == 0 ? "end" : "end - " + std::to_string(b.value);
}

std::string coords_string(const std::vector<int>& c) {
  std::string s = "(";
  for (std::size_t i = 0; i < c.size(); ++i) s += (i ? "," : "") + std::to_string(c[i]);
  return s + ")";
}

}  // namespace

std::string to_string(const Predicate& p, int dimension) {
  if (p.alternatives.empty()) return "all";
  std::string out;
  for (std::size_t i = 0; i < p.alternatives.size(); ++i) {
    if (i) out += " or ";
    const auto& conj = p.alternatives[i];
    if (conj.empty()) out += "all";
    for (std::size_t j = 0; j < conj.size(); ++j) {
      if (j) out += " and ";
      const auto& t = conj[j];
      std::string axis = t.axis >= 0 ? axis_name(t.axis, dimension) + " " : "";
      switch (t.test) {
        case AxisPredicate::Test::Equals:
          out += axis + "= " + bound_string(t.lo);
          break;
        case AxisPredicate::Test::InRange:
          out += axis + "in [" + bound_string(t.lo) + ", " + bound_string(t.hi) + "]";
          break;
        case AxisPredicate::Test::DepthAtLeast:
          out += axis + "depth >= " + std::to_string(t.lo.value);
          break;
      }
    }
  }
  return out;
}

// ----------------------------------------------------------- ProblemSpec

ProblemSpec::ProblemSpec(GridSpec grid, FieldSpec fields, std::vector<Region> regions,
                         std::map<std::string, double> parameters)
    : grid_(std::move(grid)),
      fields_(std::move(fields)),
      regions_(std::move(regions)),
      parameters_(std::move(parameters)) {
  parameters_[grid_.step_name] = grid_.step;
  validate();
}

void ProblemSpec::validate() {
  const int d = grid_.dimension;
  if (d < 1) throw ValidationError("dimension must be at least 1");
  if (static_cast<int>(grid_.extents.size()) != d) {
    throw ValidationError("expected " + std::to_string(d) + " extents, got " + std::to_string(grid_.extents.size()));
  }
  for (int e : grid_.extents) {
    if (e < 1) throw ValidationError("extents must be positive");
  }
  if (fields_.components.empty()) throw ValidationError("at least one field component is required");

  std::set<std::string> declared;
  auto declare = [&](const std::string& name) {
    if (!declared.insert(name).second) throw ValidationError("symbol '" + name + "' declared twice");
  };
  for (const auto& f : fields_.components) declare(f);
  for (const auto& g : fields_.given) {
    declare(g.name);
    if (g.samples.size() != grid_.cell_count()) {
      throw ValidationError("given '" + g.name + "' has " + std::to_string(g.samples.size()) + " samples, mesh has " +
                            std::to_string(grid_.cell_count()) + " cells");
    }
  }
  for (const auto& [p, v] : parameters_) declare(p);

  if (regions_.empty()) throw ValidationError("at least one region is required");
  std::set<std::string> region_names;
  const int m = field_arity();
  for (const auto& r : regions_) {
    if (!region_names.insert(r.name).second) throw ValidationError("region '" + r.name + "' declared twice");
    for (const auto& conj : r.where.alternatives) {
      for (const auto& t : conj) {
        if (t.axis >= d) throw ValidationError("region '" + r.name + "' tests an axis beyond the dimension");
      }
    }
    if (r.dirichlet) {
      if (static_cast<int>(r.values.size()) != m) {
        throw ValidationError("region '" + r.name + "' needs " + std::to_string(m) + " Dirichlet values");
      }
      for (const auto& v : r.values) {
        if (const auto* name = std::get_if<std::string>(&v); name && !fields_.find_given(*name)) {
          throw ValidationError("region '" + r.name + "': undeclared given '" + *name + "'");
        }
      }
      continue;
    }
    if (r.residuals.empty()) throw ValidationError("region '" + r.name + "' has neither residuals nor Dirichlet values");
    for (const auto& e : r.residuals) {
      for (const auto& a : e.atoms()) {
        if (a.has_offset() && static_cast<int>(a.offset.size()) != d) {
          throw ValidationError("region '" + r.name + "': offset arity mismatch in " + to_string(a, names()));
        }
        if (a.kind == AtomKind::Cell && (a.component < 0 || a.component >= m)) {
          throw ValidationError("region '" + r.name + "': field component out of range");
        }
        if (a.kind == AtomKind::Given && !fields_.find_given(a.name)) {
          throw ValidationError("region '" + r.name + "': undeclared given '" + a.name + "'");
        }
        if (a.kind == AtomKind::Parameter && !parameters_.count(a.name)) {
          throw ValidationError("region '" + r.name + "': undeclared parameter '" + a.name + "'");
        }
      }
    }
  }

  // Partition: every cell in exactly one region.
  cell_region_.assign(grid_.cell_count(), -1);
  for (std::size_t cell = 0; cell < cell_region_.size(); ++cell) {
    auto c = grid_.coords(cell);
    for (std::size_t r = 0; r < regions_.size(); ++r) {
      if (!regions_[r].where.matches(c, grid_.extents)) continue;
      if (cell_region_[cell] >= 0) {
        throw ValidationError("cell " + coords_string(c) + " is in regions '" + regions_[cell_region_[cell]].name +
                              "' and '" + regions_[r].name + "'");
      }
      cell_region_[cell] = static_cast<int>(r);
    }
    if (cell_region_[cell] < 0) throw ValidationError("cell " + coords_string(c) + " is in no region");
  }

  // Second differences need three cells along the axis.
  for (const auto& r : regions_) {
    for (const auto& e : r.residuals) {
      std::vector<int> lo(d, 0), hi(d, 0);
      for (const auto& a : e.atoms()) {
        if (!a.has_offset()) continue;
        for (int ax = 0; ax < d; ++ax) {
          lo[ax] = std::min(lo[ax], a.offset[ax]);
          hi[ax] = std::max(hi[ax], a.offset[ax]);
        }
      }
      for (int ax = 0; ax < d; ++ax) {
        if (hi[ax] - lo[ax] >= 2 && grid_.extents[ax] < 3) {
          throw ValidationError("extent along axis " + std::to_string(ax) + " must be at least 3 for region '" +
                                r.name + "'");
        }
      }
    }
  }

  // Offsets referenced from residuals stay inside the mesh.
  for (std::size_t cell = 0; cell < cell_region_.size(); ++cell) {
    const Region& r = regions_[cell_region_[cell]];
    if (r.dirichlet) continue;
    auto c = grid_.coords(cell);
    for (const auto& e : r.residuals) {
      for (const auto& a : e.atoms()) {
        if (!a.has_offset()) continue;
        auto t = c;
        for (int ax = 0; ax < d; ++ax) t[ax] += a.offset[ax];
        if (!grid_.contains(t)) {
          throw ValidationError("region '" + r.name + "': " + to_string(a, names()) + " at cell " + coords_string(c) +
                                " falls outside the mesh");
        }
      }
    }
  }
}

std::size_t ProblemSpec::residual_cell_count() const {
  std::size_t n = 0;
  for (int r : cell_region_) n += regions_[r].dirichlet ? 0 : 1;
  return n;
}

double ProblemSpec::dirichlet_value(std::size_t cell, int component) const {
  const Region& r = regions_[cell_region_[cell]];
  const auto& v = r.values.at(component);
  if (const double* x = std::get_if<double>(&v)) return *x;
  return fields_.find_given(std::get<std::string>(v))->samples[cell];
}

SymbolContext ProblemSpec::symbols() const {
  SymbolContext ctx;
  ctx.dimension = grid_.dimension;
  ctx.fields = fields_.components;
  for (const auto& g : fields_.given) ctx.givens.insert(g.name);
  for (const auto& [p, v] : parameters_) ctx.parameters.insert(p);
  return ctx;
}

bool operator==(const ProblemSpec& a, const ProblemSpec& b) {
  return a.grid_ == b.grid_ && a.fields_ == b.fields_ && a.regions_ == b.regions_ && a.parameters_ == b.parameters_;
}

// --------------------------------------------------------------- parsing

namespace {

bool is_name_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

/// Token cursor over a single DSL line.
class Cursor {
 public:
  Cursor(std::string_view line, int line_no) : text_(line), line_(line_no) {}

  [[noreturn]] void fail(const std::string& message) const { throw ParseError(message, line_, column()); }
  int column() const { return static_cast<int>(pos_) + 1; }
  int line() const { return line_; }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool at_end() {
    skip();
    return pos_ >= text_.size();
  }

  std::string peek_word() {
    skip();
    std::size_t p = pos_;
    if (p >= text_.size() || !is_name_start(text_[p])) return {};
    while (p < text_.size() && is_name_char(text_[p])) ++p;
    return std::string(text_.substr(pos_, p - pos_));
  }

  std::string name(const char* what) {
    std::string w = peek_word();
    if (w.empty()) fail(std::string("expected ") + what);
    pos_ += w.size();
    return w;
  }

  void keyword(std::string_view kw) {
    std::string w = peek_word();
    if (w != kw) fail("expected '" + std::string(kw) + "'");
    pos_ += w.size();
  }

  bool accept_word(std::string_view kw) {
    if (peek_word() != kw) return false;
    pos_ += kw.size();
    return true;
  }

  bool accept(std::string_view sym) {
    skip();
    if (text_.substr(pos_, sym.size()) != sym) return false;
    pos_ += sym.size();
    return true;
  }

  void expect(std::string_view sym) {
    if (!accept(sym)) fail("expected '" + std::string(sym) + "'");
  }

  int integer(const char* what = "integer") {
    skip();
    std::size_t start = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    std::string_view tok = text_.substr(start, pos_ - start);
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    int v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
      pos_ = start;
      fail(std::string("expected ") + what);
    }
    return v;
  }

  bool peek_integer() {
    skip();
    std::size_t p = pos_;
    if (p < text_.size() && (text_[p] == '-' || text_[p] == '+')) ++p;
    return p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]));
  }

  double number() {
    skip();
    std::size_t start = pos_;
    if (pos_ < text_.size() && text_[pos_] == '+') ++pos_;
    double v = 0;
    auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
    if (ec != std::errc()) {
      pos_ = start;
      fail("expected number");
    }
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    return v;
  }

  /// Remaining text and the column it starts at.
  std::pair<std::string_view, int> rest() {
    skip();
    int col = column();
    std::string_view r = text_.substr(pos_);
    while (!r.empty() && std::isspace(static_cast<unsigned char>(r.back()))) r.remove_suffix(1);
    pos_ = text_.size();
    return {r, col};
  }

 private:
  std::string_view text_;
  int line_;
  std::size_t pos_ = 0;
};

int parse_axis(const std::string& word, int dimension, const Cursor& cur) {
  int axis = -1;
  if (word.size() == 1) {
    static constexpr std::string_view kAliases = "xyzt";
    auto p = kAliases.find(word[0]);
    if (p != std::string_view::npos) axis = static_cast<int>(p);
  } else if (word.size() > 1 && word[0] == 'a') {
    auto [ptr, ec] = std::from_chars(word.data() + 1, word.data() + word.size(), axis);
    if (ec != std::errc() || ptr != word.data() + word.size()) axis = -1;
  }
  if (axis < 0 || axis >= dimension) cur.fail("unknown axis '" + word + "'");
  return axis;
}

AxisPredicate::Bound parse_bound(Cursor& cur) {
  AxisPredicate::Bound b;
  if (cur.accept_word("end")) {
    b.from_end = true;
    if (cur.accept("-")) b.value = cur.integer();
    return b;
  }
  b.value = cur.integer("integer or 'end'");
  return b;
}

bool at_clause(Cursor& cur) {
  if (cur.at_end()) return true;
  std::string w = cur.peek_word();
  return w == "dirichlet" || w == "residual";
}

Predicate parse_predicate(Cursor& cur, int dimension) {
  Predicate p;
  bool trivially_all = false;
  do {
    std::vector<AxisPredicate> conj;
    do {
      if (cur.accept_word("all")) continue;
      AxisPredicate t;
      if (cur.accept_word("depth")) {
        t.axis = -1;
        t.test = AxisPredicate::Test::DepthAtLeast;
        cur.expect(">=");
        t.lo.value = cur.integer();
        conj.push_back(t);
        continue;
      }
      t.axis = parse_axis(cur.name("axis"), dimension, cur);
      if (cur.accept_word("in")) {
        t.test = AxisPredicate::Test::InRange;
        cur.expect("[");
        t.lo = parse_bound(cur);
        cur.expect(",");
        t.hi = parse_bound(cur);
        cur.expect("]");
      } else if (cur.accept_word("depth")) {
        t.test = AxisPredicate::Test::DepthAtLeast;
        cur.expect(">=");
        t.lo.value = cur.integer();
      } else {
        cur.expect("=");
        t.test = AxisPredicate::Test::Equals;
        t.lo = parse_bound(cur);
      }
      conj.push_back(t);
    } while (cur.accept_word("and"));
    if (conj.empty()) trivially_all = true;
    p.alternatives.push_back(std::move(conj));
  } while (cur.accept_word("or"));
  if (trivially_all) p.alternatives.clear();
  if (!at_clause(cur)) cur.fail("expected 'and', 'or', 'dirichlet' or 'residual'");
  return p;
}

std::vector<DirichletValue> parse_constlist(Cursor& cur) {
  std::vector<DirichletValue> values;
  do {
    std::string w = cur.peek_word();
    if (!w.empty() && w != "inf" && w != "nan") {
      values.emplace_back(cur.name("value"));
    } else {
      values.emplace_back(cur.number());
    }
  } while (cur.accept(","));
  if (!cur.at_end()) cur.fail("unexpected text after Dirichlet values");
  return values;
}

struct PendingResidual {
  std::string text;
  int line;
  int column;
};

struct PendingRegion {
  Region region;
  std::vector<PendingResidual> residuals;
  int line = 0;
};

struct PendingGiven {
  std::string name;
  GivenSource source;
  int line = 0;
};

}  // namespace

ProblemSpec parse_problem(std::string_view text, const std::filesystem::path& base_dir) {
  std::optional<GridSpec> grid;
  FieldSpec fields;
  std::vector<PendingGiven> givens;
  std::map<std::string, double> parameters;
  std::vector<PendingRegion> regions;

  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

    Cursor cur(line, line_no);
    if (cur.at_end()) continue;
    std::string kw = cur.name("keyword");

    if (kw == "dim") {
      if (grid) cur.fail("duplicate header");
      GridSpec g;
      g.dimension = cur.integer("dimension");
      if (g.dimension < 1) cur.fail("dimension must be at least 1");
      cur.keyword("extent");
      while (cur.peek_integer()) g.extents.push_back(cur.integer());
      if (static_cast<int>(g.extents.size()) != g.dimension) {
        cur.fail("expected " + std::to_string(g.dimension) + " extents");
      }
      cur.keyword("step");
      g.step_name = cur.name("step name");
      cur.expect("=");
      g.step = cur.number();
      if (!cur.at_end()) cur.fail("unexpected text after header");
      grid = std::move(g);
      continue;
    }
    if (!grid) cur.fail("problem must start with the 'dim' header");

    if (kw == "field") {
      do {
        fields.components.push_back(cur.name("field name"));
      } while (cur.accept(","));
      if (!cur.at_end()) cur.fail("unexpected text after field list");
    } else if (kw == "given") {
      PendingGiven g;
      g.line = line_no;
      g.name = cur.name("given name");
      if (cur.accept_word("grid")) {
        auto [path, col] = cur.rest();
        if (path.empty()) cur.fail("expected grid path");
        g.source = {GivenSource::Kind::GridFile, (base_dir / std::filesystem::path(path)).lexically_normal().string()};
      } else if (cur.accept_word("expr")) {
        auto [profile, col] = cur.rest();
        if (profile.empty()) cur.fail("expected profile expression");
        g.source = {GivenSource::Kind::Profile, std::string(profile)};
      } else {
        cur.fail("expected 'grid' or 'expr'");
      }
      givens.push_back(std::move(g));
    } else if (kw == "param") {
      std::string name = cur.name("parameter name");
      cur.expect("=");
      parameters[name] = cur.number();
      if (!cur.at_end()) cur.fail("unexpected text after parameter");
    } else if (kw == "region") {
      PendingRegion r;
      r.line = line_no;
      r.region.name = cur.name("region name");
      cur.keyword("where");
      r.region.where = parse_predicate(cur, grid->dimension);
      regions.push_back(std::move(r));
      if (cur.accept_word("dirichlet")) {
        regions.back().region.dirichlet = true;
        regions.back().region.values = parse_constlist(cur);
      } else if (cur.accept_word("residual")) {
        auto [expr, col] = cur.rest();
        regions.back().residuals.push_back({std::string(expr), line_no, col});
      }
    } else if (kw == "dirichlet" || kw == "residual") {
      if (regions.empty()) cur.fail("'" + kw + "' outside a region");
      PendingRegion& r = regions.back();
      if (kw == "dirichlet") {
        if (r.region.dirichlet || !r.residuals.empty()) cur.fail("region already has a clause");
        r.region.dirichlet = true;
        r.region.values = parse_constlist(cur);
      } else {
        if (r.region.dirichlet) cur.fail("Dirichlet region cannot carry residuals");
        auto [expr, col] = cur.rest();
        if (expr.empty()) cur.fail("expected residual expression");
        r.residuals.push_back({std::string(expr), line_no, col});
      }
    } else {
      cur.fail("unknown keyword '" + kw + "'");
    }
  }

  if (!grid) throw ParseError("missing 'dim' header", 1, 1);
  if (regions.empty()) throw ParseError("expected at least one region", line_no, 1);

  for (const auto& g : givens) {
    GivenFunction fn{g.name, g.source, {}};
    std::map<std::string, double> params = parameters;
    params[grid->step_name] = grid->step;
    if (g.source.kind == GivenSource::Kind::Profile) {
      try {
        fn.samples = evaluate_profile(g.source.text, *grid, params);
      } catch (const ParseError& e) {
        throw ParseError(std::string("given '") + g.name + "': " + e.what(), g.line, 1);
      }
    } else {
      fn.samples = read_given_grid(g.source.text, *grid);
    }
    fields.given.push_back(std::move(fn));
  }

  SymbolContext ctx;
  ctx.dimension = grid->dimension;
  ctx.fields = fields.components;
  for (const auto& g : fields.given) ctx.givens.insert(g.name);
  for (const auto& [p, v] : parameters) ctx.parameters.insert(p);
  ctx.parameters.insert(grid->step_name);

  std::vector<Region> out;
  for (auto& r : regions) {
    if (!r.region.dirichlet && r.residuals.empty()) {
      throw ParseError("region '" + r.region.name + "' needs 'dirichlet' or 'residual'", r.line, 1);
    }
    for (const auto& pr : r.residuals) {
      r.region.residuals.push_back(parse_expression(pr.text, ctx, pr.line, pr.column));
    }
    out.push_back(std::move(r.region));
  }
  return ProblemSpec(std::move(*grid), std::move(fields), std::move(out), std::move(parameters));
}

ProblemSpec load_problem(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open problem file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

// -------------------------------------------------------------- rendering

std::string render_problem(const ProblemSpec& spec, const std::filesystem::path* grid_dir) {
  const GridSpec& g = spec.grid();
  std::ostringstream os;
  os << "dim " << g.dimension << " extent";
  for (int e : g.extents) os << ' ' << e;
  os << " step " << g.step_name << " = " << format_double(g.step) << '\n';

  os << "field ";
  for (std::size_t i = 0; i < spec.fields().components.size(); ++i) os << (i ? ", " : "") << spec.fields().components[i];
  os << '\n';

  for (const auto& [name, value] : spec.parameters()) {
    if (name != g.step_name) os << "param " << name << " = " << format_double(value) << '\n';
  }
  for (const auto& fn : spec.fields().given) {
    switch (fn.source.kind) {
      case GivenSource::Kind::Profile:
        os << "given " << fn.name << " expr " << fn.source.text << '\n';
        break;
      case GivenSource::Kind::GridFile:
        os << "given " << fn.name << " grid " << fn.source.text << '\n';
        break;
      case GivenSource::Kind::Samples: {
        if (!grid_dir) throw Error("given '" + fn.name + "' has no textual source; a grid directory is required");
        auto path = std::filesystem::absolute(*grid_dir / (fn.name + ".grid"));
        write_given_grid(path, g, fn.samples);
        os << "given " << fn.name << " grid " << path.string() << '\n';
        break;
      }
    }
  }
  SymbolNames names = spec.names();
  for (const auto& r : spec.regions()) {
    os << "region " << r.name << " where " << to_string(r.where, g.dimension);
    if (r.dirichlet) {
      os << " dirichlet ";
      for (std::size_t i = 0; i < r.values.size(); ++i) {
        if (i) os << ", ";
        if (const double* x = std::get_if<double>(&r.values[i])) {
          os << format_double(*x);
        } else {
          os << std::get<std::string>(r.values[i]);
        }
      }
      os << '\n';
    } else {
      os << '\n';
      for (const auto& e : r.residuals) os << "  residual " << to_string(e, names) << '\n';
    }
  }
  return os.str();
}

// ------------------------------------------------------------ given grids

std::vector<double> read_given_grid(const std::filesystem::path& path, const GridSpec& grid) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open given grid " + path.string());
  std::string word;
  int d = 0;
  if (!(in >> word) || word != "dims" || !(in >> d) || d != grid.dimension) {
    throw Error(path.string() + ": expected header 'dims " + std::to_string(grid.dimension) + " ...'");
  }
  for (int a = 0; a < d; ++a) {
    int n = 0;
    if (!(in >> n) || n != grid.extents[a]) throw Error(path.string() + ": extents do not match the mesh");
  }
  std::vector<double> out;
  out.reserve(grid.cell_count());
  std::string tok;
  while (in >> tok) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) throw Error(path.string() + ": invalid sample '" + tok + "'");
    out.push_back(v);
  }
  if (out.size() != grid.cell_count()) {
    throw Error(path.string() + ": expected " + std::to_string(grid.cell_count()) + " samples, found " +
                std::to_string(out.size()));
  }
  return out;
}

void write_given_grid(const std::filesystem::path& path, const GridSpec& grid, const std::vector<double>& samples) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "dims " << grid.dimension;
  for (int e : grid.extents) out << ' ' << e;
  out << '\n';
  for (double v : samples) out << format_double(v) << '\n';
}

// --------------------------------------------------------------- builtins

ProblemSpec builtin_poisson1d(int n, double h, std::string_view rho_profile, double left, double right) {
  if (n < 3) throw ValidationError("poisson1d needs at least 3 cells, got " + std::to_string(n));
  if (!(h > 0)) throw ValidationError("poisson1d step must be positive");
  std::ostringstream os;
  os << "dim 1 extent " << n << " step h = " << format_double(h) << '\n'
     << "field phi\n"
     << "given rho expr " << rho_profile << '\n'
     << "region left where x = 0 dirichlet " << format_double(left) << '\n'
     << "region right where x = end dirichlet " << format_double(right) << '\n'
     << "region interior where x depth >= 1\n"
     << "  residual (phi[-1] - 2*phi[0] + phi[1])/h^2 - rho[0]\n";
  return parse_problem(os.str());
}

ProblemSpec builtin_poisson3d(const std::vector<int>& extents, double h, std::string_view rho_profile,
                              double boundary) {
  if (extents.size() != 3) throw ValidationError("poisson3d needs three extents");
  for (int e : extents) {
    if (e < 5) throw ValidationError("poisson3d extents must be at least 5, got " + std::to_string(e));
  }
  if (!(h > 0)) throw ValidationError("poisson3d step must be positive");
  std::ostringstream os;
  os << "dim 3 extent " << extents[0] << ' ' << extents[1] << ' ' << extents[2] << " step h = " << format_double(h)
     << '\n'
     << "field phi\n"
     << "given rho expr " << rho_profile << '\n'
     << "region faces where x = 0 or x = end or y = 0 or y = end or z = 0 or z = end dirichlet "
     << format_double(boundary) << '\n'
     << "region interior where depth >= 1\n"
     << "  residual (phi[1,0,0] + phi[-1,0,0] + phi[0,1,0] + phi[0,-1,0] + phi[0,0,1] + phi[0,0,-1]"
        " - 6*phi[0,0,0])/h^2 - rho[0,0,0]\n";
  return parse_problem(os.str());
}

ProblemSpec builtin_beam(const BeamParams& p) {
  if (p.extents.size() != 3) throw ValidationError("beam needs three extents");
  for (int e : p.extents) {
    if (e < 5) throw ValidationError("beam extents must be at least 5, got " + std::to_string(e));
  }
  if (!(p.window > 0) || !(p.wavelength > 0) || !(p.length > 0) || !(p.index > 0) || !(p.waist > 0)) {
    throw ValidationError("beam window, wavelength, length, index and waist must be positive");
  }
  const double h = p.window / (p.extents[0] - 1);
  const double hy = p.window / (p.extents[1] - 1);
  if (std::abs(h - hy) > 1e-12 * h) throw ValidationError("beam transverse extents must match");
  const double hz = p.length / (p.extents[2] - 1);
  const double k = 2 * std::numbers::pi * p.index / p.wavelength;
  const double cx = 0.5 * (p.extents[0] - 1);
  const double cy = 0.5 * (p.extents[1] - 1);

  // Profiles work in cell-index coordinates; physical distance is index * h.
  auto gaussian = [&](double amplitude, double centre_x, double width) {
    std::ostringstream g;
    g << format_double(amplitude) << "*exp(-((x0 - " << format_double(centre_x) << ")^2 + (x1 - "
      << format_double(cy) << ")^2)*" << format_double(h * h / (width * width)) << ")";
    return g.str();
  };

  const std::string lap_v = "(v[1,0,0] + v[-1,0,0] + v[0,1,0] + v[0,-1,0] - 4*v[0,0,0])/h^2";
  const std::string lap_u = "(u[1,0,0] + u[-1,0,0] + u[0,1,0] + u[0,-1,0] - 4*u[0,0,0])/h^2";
  const std::string dzz_v = " + (v[0,0,1] - 2*v[0,0,0] + v[0,0,-1])/hz^2";
  const std::string dzz_u = " + (u[0,0,1] - 2*u[0,0,0] + u[0,0,-1])/hz^2";

  std::ostringstream os;
  os << "dim 3 extent " << p.extents[0] << ' ' << p.extents[1] << ' ' << p.extents[2] << " step h = "
     << format_double(h) << '\n'
     << "field u, v\n"
     << "param hz = " << format_double(hz) << '\n'
     << "param k = " << format_double(k) << '\n'
     << "param n = " << format_double(p.index) << '\n'
     << "given dn expr " << gaussian(p.depth, cx, 0.5 * p.waist) << '\n'
     << "given ein expr " << gaussian(p.input_amplitude, cx + p.input_offset / h, p.waist) << '\n'
     << "region walls where x = 0 or x = end or y = 0 or y = end dirichlet 0, 0\n"
     << "region inlet where z = 0 and x depth >= 1 and y depth >= 1 dirichlet ein, 0\n";
  if (p.full_laplacian) {
    os << "region outlet where z = end and x depth >= 1 and y depth >= 1 dirichlet 0, 0\n"
       << "region bulk where z in [1, end - 1] and x depth >= 1 and y depth >= 1\n";
  } else {
    os << "region bulk where z in [1, end] and x depth >= 1 and y depth >= 1\n";
  }
  const std::string zu = p.full_laplacian ? dzz_u : "";
  const std::string zv = p.full_laplacian ? dzz_v : "";
  os << "  residual (u[0,0,0] - u[0,0,-1])/hz + (" << lap_v << zv << ")/(2*k) + k/n*dn[0,0,0]*v[0,0,0]\n"
     << "  residual (v[0,0,0] - v[0,0,-1])/hz - (" << lap_u << zu << ")/(2*k) - k/n*dn[0,0,0]*u[0,0,0]\n";
  return parse_problem(os.str());
}

}  // namespace stencilforge
