#include "stencilforge/rulegen.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "stencilforge/error.hpp"

namespace stencilforge {

namespace {

std::set<Offset> cell_offsets(const std::vector<Expression>& residuals) {
  std::set<Offset> out;
  for (const auto& r : residuals) {
    for (const auto& a : r.atoms()) {
      if (a.kind == AtomKind::Cell) out.insert(a.offset);
    }
  }
  return out;
}

std::set<Offset> given_offsets(const std::vector<Expression>& residuals) {
  std::set<Offset> out;
  for (const auto& r : residuals) {
    for (const auto& a : r.atoms()) {
      if (a.kind == AtomKind::Given) out.insert(a.offset);
    }
  }
  return out;
}

Offset add(const Offset& a, const Offset& b) {
  Offset out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Offset negate(const Offset& a) {
  Offset out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = -a[i];
  return out;
}

bool is_origin(const Offset& o) {
  return std::all_of(o.begin(), o.end(), [](int v) { return v == 0; });
}

/// Every offset in the box [-reach, reach] per axis, lexicographic.
std::vector<Offset> window(const std::vector<int>& reach) {
  std::vector<Offset> out{Offset{}};
  for (int r : reach) {
    std::vector<Offset> next;
    for (const auto& o : out) {
      for (int v = -r; v <= r; ++v) {
        Offset e = o;
        e.push_back(v);
        next.push_back(std::move(e));
      }
    }
    out = std::move(next);
  }
  return out;
}

/// Cell at `cell + delta`, if inside the mesh.
std::optional<std::size_t> neighbour(const GridSpec& grid, const std::vector<int>& coords, const Offset& delta) {
  std::vector<int> t(coords.size());
  for (std::size_t a = 0; a < coords.size(); ++a) t[a] = coords[a] + delta[a];
  if (!grid.contains(t)) return std::nullopt;
  return grid.index(t);
}

UpdateRule identity_rule(int arity, int dimension) {
  UpdateRule rule;
  for (int i = 0; i < arity; ++i) rule.components.push_back(Expression::cell(i, Offset(dimension, 0)));
  rule.identity = true;
  return rule;
}

std::string offset_text(const Offset& o) {
  std::string s;
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (i) s += ",";
    s += (o[i] > 0 ? "+" : "") + std::to_string(o[i]);
  }
  return o.size() > 1 ? "(" + s + ")" : s;
}

std::string offsets_text(const std::set<Offset>& s) {
  std::string out = "{";
  bool first = true;
  for (const auto& o : s) {
    out += (first ? "" : ", ") + offset_text(o);
    first = false;
  }
  return out + "}";
}

nlohmann::json offsets_json(const std::set<Offset>& s) {
  auto out = nlohmann::json::array();
  for (const auto& o : s) out.push_back(o);
  return out;
}

}  // namespace

std::size_t RuleTable::cells_using(int rule) const {
  std::size_t n = 0;
  for (const auto& c : classes) {
    if (class_rule[c.id] == rule) n += c.cell_count;
  }
  return n;
}

std::vector<int> RuleTable::classes_of(int rule) const {
  std::vector<int> out;
  for (const auto& c : classes) {
    if (class_rule[c.id] == rule) out.push_back(c.id);
  }
  return out;
}

std::vector<int> residual_reach(const ProblemSpec& spec) {
  std::vector<int> reach(spec.dimension(), 0);
  for (const auto& r : spec.regions()) {
    for (const auto& o : cell_offsets(r.residuals)) {
      for (int a = 0; a < spec.dimension(); ++a) reach[a] = std::max(reach[a], std::abs(o[a]));
    }
  }
  return reach;
}

std::set<Offset> dependency_set(const ProblemSpec& spec, std::size_t cell) {
  std::set<Offset> out;
  const auto coords = spec.grid().coords(cell);
  for (const auto& mu : window(residual_reach(spec))) {
    auto t = neighbour(spec.grid(), coords, mu);
    if (!t) continue;
    const Region& r = spec.regions()[spec.region_of(*t)];
    if (r.dirichlet) continue;
    if (cell_offsets(r.residuals).count(negate(mu))) out.insert(mu);
  }
  return out;
}

Expression local_error(const ProblemSpec& spec, std::size_t cell) {
  if (spec.is_dirichlet(cell)) return Expression{};
  const auto coords = spec.grid().coords(cell);
  Expression sum;
  for (const auto& mu : dependency_set(spec, cell)) {
    const Region& r = spec.regions()[spec.region_of(*neighbour(spec.grid(), coords, mu))];
    for (const auto& res : r.residuals) {
      Expression s = shift(res, mu);
      sum += s * s;
    }
  }
  return sum;
}

std::vector<Expression> gradient(const Expression& local, int arity, int dimension) {
  std::vector<Expression> g;
  for (int i = 0; i < arity; ++i) g.push_back(differentiate(local, Atom::cell(i, Offset(dimension, 0))));
  return g;
}

std::vector<std::vector<Expression>> hessian(const Expression& local, int arity, int dimension) {
  auto g = gradient(local, arity, dimension);
  std::vector<std::vector<Expression>> h(arity, std::vector<Expression>(arity));
  const Offset origin(dimension, 0);
  for (int i = 0; i < arity; ++i) {
    for (int j = 0; j < arity; ++j) h[i][j] = differentiate(g[i], Atom::cell(j, origin));
  }
  return h;
}

namespace {

Expression determinant(const std::vector<std::vector<Expression>>& a) {
  const std::size_t m = a.size();
  if (m == 1) return a[0][0];
  if (m == 2) return a[0][0] * a[1][1] - a[0][1] * a[1][0];
  return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
         a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

/// Transposed cofactor matrix, for m = 2 or 3.
std::vector<std::vector<Expression>> adjugate(const std::vector<std::vector<Expression>>& a) {
  const std::size_t m = a.size();
  std::vector<std::vector<Expression>> adj(m, std::vector<Expression>(m));
  if (m == 2) {
    adj[0][0] = a[1][1];
    adj[0][1] = -a[0][1];
    adj[1][0] = -a[1][0];
    adj[1][1] = a[0][0];
    return adj;
  }
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      std::size_t r0 = (j + 1) % 3, r1 = (j + 2) % 3, c0 = (i + 1) % 3, c1 = (i + 2) % 3;
      adj[i][j] = a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
    }
  }
  return adj;
}

}  // namespace

UpdateRule newton_rule(const ProblemSpec& spec, std::size_t cell) {
  const int m = spec.field_arity();
  const Offset origin(spec.dimension(), 0);
  if (spec.is_dirichlet(cell)) return identity_rule(m, spec.dimension());

  UpdateRule rule;
  rule.dependency = dependency_set(spec, cell);
  if (rule.dependency.empty()) {
    rule = identity_rule(m, spec.dimension());
    rule.frozen = true;
    rule.diagnostic = "cell appears in no residual";
    return rule;
  }

  Expression local = local_error(spec, cell);
  rule.gradient = gradient(local, m, spec.dimension());
  rule.hessian = hessian(local, m, spec.dimension());
  bool diagonal = true;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i != j && !rule.hessian[i][j].is_zero()) diagonal = false;
    }
  }

  auto freeze = [&](std::string why) {
    UpdateRule frozen = identity_rule(m, spec.dimension());
    frozen.gradient = std::move(rule.gradient);
    frozen.hessian = std::move(rule.hessian);
    frozen.dependency = std::move(rule.dependency);
    frozen.frozen = true;
    frozen.diagnostic = std::move(why);
    frozen.determinant = Expression{};
    return frozen;
  };

  if (diagonal) {
    rule.determinant = Expression(1L);
    for (int i = 0; i < m; ++i) {
      if (rule.hessian[i][i].is_zero()) return freeze("singular Hessian");
      rule.determinant *= rule.hessian[i][i];
    }
    for (int i = 0; i < m; ++i) {
      rule.components.push_back(Expression::cell(i, origin) - rule.gradient[i] / rule.hessian[i][i]);
    }
  } else {
    if (m > 3) throw Error("coupled Hessians are only inverted for up to 3 field components");
    rule.determinant = determinant(rule.hessian);
    if (rule.determinant.is_zero()) return freeze("singular Hessian");
    auto adj = adjugate(rule.hessian);
    for (int i = 0; i < m; ++i) {
      Expression step;
      for (int j = 0; j < m; ++j) step += adj[i][j] * rule.gradient[j];
      rule.components.push_back(Expression::cell(i, origin) - step / rule.determinant);
    }
  }
  rule.neighborhood = neighborhood(rule.components);
  return rule;
}

Neighborhood neighborhood(const std::vector<Expression>& components) {
  Neighborhood n;
  for (const auto& e : components) {
    for (const auto& a : e.atoms()) {
      if (a.kind == AtomKind::Cell && !is_origin(a.offset)) n.field.insert(a.offset);
      if (a.kind == AtomKind::Given) n.given.insert(a.offset);
    }
  }
  return n;
}

std::string rule_key(const UpdateRule& rule, const SymbolNames& names) {
  std::string key;
  for (const auto& e : rule.components) key += to_string(e, names) + " ; ";
  return key;
}

RuleTable classify(const ProblemSpec& spec) {
  RuleTable table;
  const GridSpec& grid = spec.grid();
  table.reach = residual_reach(spec);
  const auto win = window(table.reach);

  std::map<std::vector<int>, int> class_of_key;
  table.cell_class.resize(spec.cell_count());
  for (std::size_t cell = 0; cell < spec.cell_count(); ++cell) {
    std::vector<int> key{spec.region_of(cell)};
    if (spec.is_dirichlet(cell)) {
      key.push_back(-2);
    } else {
      const auto coords = grid.coords(cell);
      for (const auto& mu : win) {
        auto t = neighbour(grid, coords, mu);
        key.push_back(t ? spec.region_of(*t) : -1);
      }
    }
    auto [it, inserted] = class_of_key.emplace(std::move(key), static_cast<int>(table.classes.size()));
    if (inserted) {
      CellClass c;
      c.id = it->second;
      c.region = spec.region_of(cell);
      c.dirichlet = spec.is_dirichlet(cell);
      c.representative = cell;
      const auto coords = grid.coords(cell);
      for (int a = 0; a < spec.dimension(); ++a) {
        int sat = table.reach[a] + 1;
        c.signature.emplace_back(std::min(coords[a], sat), std::min(grid.extents[a] - 1 - coords[a], sat));
      }
      table.classes.push_back(std::move(c));
    }
    table.cell_class[cell] = it->second;
    ++table.classes[it->second].cell_count;
  }

  const SymbolNames names = spec.names();
  std::map<std::string, int> rule_of_key;
  table.class_rule.resize(table.classes.size());
  for (const auto& c : table.classes) {
    UpdateRule rule = newton_rule(spec, c.representative);
    std::string key = rule_key(rule, names);
    auto [it, inserted] = rule_of_key.emplace(key, static_cast<int>(table.rules.size()));
    if (inserted) {
      table.rules.push_back(std::move(rule));
    } else if (rule.frozen) {
      UpdateRule& kept = table.rules[it->second];
      kept.frozen = true;
      if (kept.diagnostic.empty()) kept.diagnostic = rule.diagnostic;
    }
    table.class_rule[c.id] = it->second;
  }
  return table;
}

LocalityReport locality_check(const RuleTable& table, const ProblemSpec& spec) {
  LocalityReport report;
  for (int r = 0; r < static_cast<int>(table.rules.size()); ++r) {
    const UpdateRule& rule = table.rules[r];
    LocalityEntry entry;
    entry.rule = r;
    bool first = true;
    for (int cid : table.classes_of(r)) {
      const CellClass& c = table.classes[cid];
      std::set<Offset> bound;
      std::set<Offset> given_bound;
      if (!c.dirichlet) {
        const auto coords = spec.grid().coords(c.representative);
        for (const auto& mu : dependency_set(spec, c.representative)) {
          const Region& reg = spec.regions()[spec.region_of(*neighbour(spec.grid(), coords, mu))];
          for (const auto& o : cell_offsets(reg.residuals)) {
            Offset t = add(mu, o);
            if (!is_origin(t)) bound.insert(t);
          }
          for (const auto& o : given_offsets(reg.residuals)) given_bound.insert(add(mu, o));
        }
      }
      for (const auto& o : rule.neighborhood.field) {
        if (!bound.count(o)) entry.violations.insert(o);
      }
      for (const auto& o : rule.neighborhood.given) {
        if (!given_bound.count(o)) entry.violations.insert(o);
      }
      int margin = static_cast<int>(bound.size()) - static_cast<int>(rule.neighborhood.field.size());
      if (first || margin < entry.margin) {
        entry.margin = margin;
        entry.bound = bound;
      }
      first = false;
    }
    entry.ok = entry.violations.empty();
    report.ok = report.ok && entry.ok;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

nlohmann::json export_rules(const RuleTable& table, const ProblemSpec& spec) {
  const SymbolNames names = spec.names();
  nlohmann::json doc;
  doc["rule_count"] = table.rules.size();
  doc["class_count"] = table.classes.size();
  doc["reach"] = table.reach;
  doc["fields"] = spec.fields().components;
  auto rules = nlohmann::json::array();
  for (int r = 0; r < static_cast<int>(table.rules.size()); ++r) {
    const UpdateRule& rule = table.rules[r];
    nlohmann::json j;
    j["index"] = r;
    j["identity"] = rule.identity;
    j["frozen"] = rule.frozen;
    if (!rule.diagnostic.empty()) j["diagnostic"] = rule.diagnostic;
    j["cells"] = table.cells_using(r);
    auto classes = nlohmann::json::array();
    for (int cid : table.classes_of(r)) {
      const CellClass& c = table.classes[cid];
      nlohmann::json cj;
      cj["region"] = spec.regions()[c.region].name;
      auto sig = nlohmann::json::array();
      for (auto [lo, hi] : c.signature) sig.push_back({lo, hi});
      cj["signature"] = sig;
      cj["cells"] = c.cell_count;
      classes.push_back(cj);
    }
    j["classes"] = classes;
    auto comps = nlohmann::json::array();
    for (std::size_t i = 0; i < rule.components.size(); ++i) {
      comps.push_back({{"field", spec.fields().components[i]}, {"expression", to_string(rule.components[i], names)}});
    }
    j["components"] = comps;
    j["determinant"] = to_string(rule.determinant, names);
    j["neighborhood"] = offsets_json(rule.neighborhood.field);
    j["given_neighborhood"] = offsets_json(rule.neighborhood.given);
    j["dependency"] = offsets_json(rule.dependency);
    rules.push_back(j);
  }
  doc["rules"] = rules;
  return doc;
}

std::vector<std::vector<Expression>> import_rules(const nlohmann::json& doc, const ProblemSpec& spec) {
  const SymbolContext ctx = spec.symbols();
  std::vector<std::vector<Expression>> out;
  for (const auto& j : doc.at("rules")) {
    std::vector<Expression> comps;
    for (const auto& c : j.at("components")) {
      comps.push_back(parse_expression(c.at("expression").get<std::string>(), ctx));
    }
    out.push_back(std::move(comps));
  }
  return out;
}

std::string format_rules(const RuleTable& table, const ProblemSpec& spec) {
  const SymbolNames names = spec.names();
  std::ostringstream os;
  for (int r = 0; r < static_cast<int>(table.rules.size()); ++r) {
    const UpdateRule& rule = table.rules[r];
    os << "rule " << r << ": " << table.cells_using(r) << " cells";
    std::set<std::string> regions;
    for (int cid : table.classes_of(r)) regions.insert(spec.regions()[table.classes[cid].region].name);
    os << ", regions";
    for (const auto& name : regions) os << ' ' << name;
    if (rule.frozen) os << " [frozen: " << rule.diagnostic << "]";
    else if (rule.identity) os << " [constant]";
    os << '\n';
    for (std::size_t i = 0; i < rule.components.size(); ++i) {
      os << "  " << spec.fields().components[i] << " <- " << to_string(rule.components[i], names) << '\n';
    }
    os << "  neighborhood " << offsets_text(rule.neighborhood.field) << '\n';
  }
  return os.str();
}

}  // namespace stencilforge
