#include "stencilforge/engine.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "stencilforge/error.hpp"
#include "stencilforge/format.hpp"
#include "stencilforge/metrics.hpp"

namespace stencilforge {

namespace {

constexpr int kMaxComponents = 16;

}  // namespace

double FieldState::max_abs() const {
  double m = 0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

FieldState init(const ProblemSpec& spec, const std::optional<FieldState>& initial) {
  FieldState state;
  state.grid = spec.grid();
  state.components = spec.field_arity();
  if (initial) {
    if (initial->grid.extents != spec.grid().extents || initial->components != spec.field_arity() ||
        initial->values.size() != spec.cell_count() * spec.field_arity()) {
      throw ValidationError("initial field shape does not match the problem");
    }
    state.values = initial->values;
  } else {
    state.values.assign(spec.cell_count() * spec.field_arity(), 0.0);
  }
  for (std::size_t cell = 0; cell < spec.cell_count(); ++cell) {
    if (!spec.is_dirichlet(cell)) continue;
    for (int c = 0; c < state.components; ++c) state.at(cell, c) = spec.dirichlet_value(cell, c);
  }
  return state;
}

// ------------------------------------------------------------- automaton

Automaton::Automaton(const ProblemSpec& spec, const RuleTable& table, bool affine_cache, double gradient_step)
    : spec_(spec), m_(spec.field_arity()), gradient_step_(gradient_step), givens_(given_buffers(spec)) {
  if (m_ > kMaxComponents) throw Error("at most 16 field components are supported");
  for (const auto& rule : table.rules) {
    Kernel k;
    if (!rule.identity) {
      for (const auto& e : rule.components) k.components.emplace_back(e, spec);
      if (gradient_step > 0) {
        for (const auto& g : rule.gradient) k.gradient.emplace_back(g.numerator(), spec);
      }
    }
    kernels_.push_back(std::move(k));
  }
  cell_rule_.resize(spec.cell_count());
  for (std::size_t cell = 0; cell < spec.cell_count(); ++cell) {
    cell_rule_[cell] = table.rule_of(cell);
    if (!table.rules[cell_rule_[cell]].identity) free_cells_.push_back(cell);
  }

  cached_.assign(free_cells_.size(), 0);
  row_ptr_.assign(free_cells_.size() * m_ + 1, 0);
  constant_.assign(free_cells_.size() * m_, 0.0);
  EvalContext ctx{nullptr, &givens_};
  for (std::size_t k = 0; k < free_cells_.size(); ++k) {
    const std::size_t cell = free_cells_[k];
    const Kernel& kernel = kernels_[cell_rule_[cell]];
    bool cacheable = affine_cache;
    for (const auto& c : kernel.components) {
      cacheable = cacheable && c.num.affine_in_cells() && !c.den.has_cell_factors();
    }
    std::vector<double> dens(m_, 1.0);
    for (int i = 0; cacheable && i < m_; ++i) {
      const auto& den = kernel.components[i].den;
      if (den.is_one()) continue;
      double d = 0, scale = 0;
      for (const auto& t : den.terms()) {
        double w = den.term_weight(t, cell, ctx);
        d += w;
        scale += std::abs(w);
      }
      if (d == 0.0 || std::abs(d) < kSingularThreshold * scale) cacheable = false;
      dens[i] = d;
    }
    cached_[k] = cacheable;
    for (int i = 0; i < m_; ++i) {
      const std::size_t r = k * m_ + i;
      if (cacheable) {
        const auto& num = kernel.components[i].num;
        std::map<std::uint32_t, double> row;
        double constant = 0;
        for (const auto& t : num.terms()) {
          double w = num.term_weight(t, cell, ctx) / dens[i];
          std::ptrdiff_t target = -1;
          for (std::uint32_t f = t.begin; f < t.end; ++f) {
            if (num.factors()[f].cell) target = static_cast<std::ptrdiff_t>(cell) * m_ + num.factors()[f].delta;
          }
          if (target < 0) {
            constant += w;
          } else {
            row[static_cast<std::uint32_t>(target)] += w;
          }
        }
        for (const auto& [col, w] : row) {
          if (w == 0.0) continue;
          col_.push_back(col);
          coef_.push_back(w);
        }
        constant_[r] = constant;
      }
      row_ptr_[r + 1] = static_cast<std::uint32_t>(col_.size());
    }
  }
  order_.resize(free_cells_.size());
  all_cached_ = cached_cell_count() == free_cells_.size();
}

std::size_t Automaton::cached_cell_count() const {
  return static_cast<std::size_t>(std::count(cached_.begin(), cached_.end(), 1));
}

void Automaton::diverged(std::size_t cell, int component) const {
  auto c = spec_.grid().coords(cell);
  std::string where = "(";
  for (std::size_t i = 0; i < c.size(); ++i) where += (i ? "," : "") + std::to_string(c[i]);
  throw DivergenceError("non-finite value at cell " + where + ") component " + spec_.fields().components[component]);
}

bool Automaton::propose(std::size_t cell, const double* state, double* out) const {
  const Kernel& kernel = kernels_[cell_rule_[cell]];
  if (kernel.components.empty()) {
    for (int i = 0; i < m_; ++i) out[i] = state[cell * m_ + i];
    return true;
  }
  EvalContext ctx{state, &givens_};
  for (int i = 0; i < m_; ++i) {
    if (!kernel.components[i].evaluate(cell, ctx, out[i])) return false;
  }
  return true;
}

bool Automaton::update_slot(std::size_t slot, const double* read, double* write, double relaxation, double& change,
                            std::size_t& skips, std::size_t& fallbacks) const {
  const std::size_t cell = free_cells_[slot];
  const std::size_t base = cell * m_;
  double next[kMaxComponents];
  if (cached_[slot]) {
    for (int i = 0; i < m_; ++i) {
      const std::size_t r = slot * m_ + i;
      double s = constant_[r];
      for (std::uint32_t j = row_ptr_[r]; j < row_ptr_[r + 1]; ++j) s += coef_[j] * read[col_[j]];
      next[i] = s;
    }
  } else if (!propose(cell, read, next)) {
    if (gradient_step_ <= 0) {
      ++skips;
      return false;
    }
    const Kernel& kernel = kernels_[cell_rule_[cell]];
    EvalContext ctx{read, &givens_};
    for (int i = 0; i < m_; ++i) next[i] = read[base + i] - gradient_step_ * kernel.gradient[i].evaluate(cell, ctx);
    ++fallbacks;
  }
  for (int i = 0; i < m_; ++i) {
    if (relaxation != 1.0) next[i] = read[base + i] + relaxation * (next[i] - read[base + i]);
    const double d = std::abs(next[i] - read[base + i]);
    if (!std::isfinite(d)) diverged(cell, i);
    change = std::max(change, d);
  }
  for (int i = 0; i < m_; ++i) write[base + i] = next[i];
  return true;
}

double Automaton::sweep_random(FieldState& state, std::mt19937_64& rng, double relaxation) {
  std::iota(order_.begin(), order_.end(), 0u);
  std::shuffle(order_.begin(), order_.end(), rng);
  double change = 0;
  double* v = state.values.data();
  if (all_cached_ && m_ == 1 && relaxation == 1.0) {
    const std::uint32_t* rows = row_ptr_.data();
    const std::uint32_t* cols = col_.data();
    const double* coefs = coef_.data();
    const double* constants = constant_.data();
    for (std::uint32_t slot : order_) {
      double s = constants[slot];
      for (std::uint32_t j = rows[slot]; j < rows[slot + 1]; ++j) s += coefs[j] * v[cols[j]];
      double& x = v[free_cells_[slot]];
      double d = std::abs(s - x);
      if (!(d <= change)) {
        if (!std::isfinite(d)) diverged(free_cells_[slot], 0);
        change = d;
      }
      x = s;
    }
    return change;
  }
  if (all_cached_ && relaxation == 1.0) {
    const std::size_t m = m_;
    const std::size_t n = order_.size();
    double next[kMaxComponents];
    for (std::size_t k = 0; k < n; ++k) {
      if (k + 4 < n) {
        const std::size_t ahead = order_[k + 4] * m;
        for (std::uint32_t j = row_ptr_[ahead]; j < row_ptr_[ahead + m]; j += 8) __builtin_prefetch(&coef_[j]);
        for (std::uint32_t j = row_ptr_[ahead]; j < row_ptr_[ahead + m]; j += 16) __builtin_prefetch(&col_[j]);
      }
      const std::size_t slot = order_[k];
      const std::size_t base = free_cells_[slot] * m;
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t r = slot * m + i;
        double s = constant_[r];
        for (std::uint32_t j = row_ptr_[r]; j < row_ptr_[r + 1]; ++j) s += coef_[j] * v[col_[j]];
        next[i] = s;
      }
      for (std::size_t i = 0; i < m; ++i) {
        double d = std::abs(next[i] - v[base + i]);
        if (!(d <= change)) {
          if (!std::isfinite(d)) diverged(free_cells_[slot], static_cast<int>(i));
          change = d;
        }
        v[base + i] = next[i];
      }
    }
    return change;
  }
  for (std::uint32_t slot : order_) update_slot(slot, v, v, relaxation, change, skips_, fallbacks_);
  return change;
}

double Automaton::sweep_synchronous(FieldState& state, int threads, double relaxation) {
  buffer_ = state.values;
  const double* read = state.values.data();
  double* write = buffer_.data();
  const std::size_t n = free_cells_.size();
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n ? n : 1));

  struct Part {
    double change = 0;
    std::size_t skips = 0, fallbacks = 0;
    std::exception_ptr error;
  };
  std::vector<Part> parts(workers);
  auto run = [&](std::size_t w) {
    std::size_t lo = n * w / workers, hi = n * (w + 1) / workers;
    try {
      for (std::size_t s = lo; s < hi; ++s) update_slot(s, read, write, relaxation, parts[w].change, parts[w].skips, parts[w].fallbacks);
    } catch (...) {
      parts[w].error = std::current_exception();
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  double change = 0;
  for (const auto& p : parts) {
    if (p.error) std::rethrow_exception(p.error);
    change = std::max(change, p.change);
    skips_ += p.skips;
    fallbacks_ += p.fallbacks;
  }
  state.values.swap(buffer_);
  return change;
}

double sweep(FieldState& state, Automaton& automaton, Schedule schedule, std::mt19937_64& rng, int threads,
             double relaxation) {
  return schedule == Schedule::RandomSequential ? automaton.sweep_random(state, rng, relaxation)
                                                : automaton.sweep_synchronous(state, threads, relaxation);
}

double default_relaxation(Schedule schedule) { return schedule == Schedule::Synchronous ? 0.5 : 1.0; }

// ------------------------------------------------------------------ solve

void ContractionEstimator::observe(std::size_t sweep, double change) {
  if ((sweep & (sweep - 1)) == 0) anchors_.emplace_back(sweep, change);
  factor_.reset();
  if (sweep < 8) return;
  const std::pair<std::size_t, double>* anchor = nullptr;
  for (const auto& a : anchors_) {
    if (2 * a.first <= sweep) anchor = &a;
  }
  if (!anchor || anchor->second <= 0 || change <= 0) return;
  factor_ = std::pow(change / anchor->second, 1.0 / static_cast<double>(sweep - anchor->first));
}

double default_tolerance(double field_scale) { return std::max(1e-12 * field_scale, 1e-15); }

SolveReport solve(const ProblemSpec& spec, const RuleTable& table, const SolveConfig& config, FieldState& state) {
  if (config.max_sweeps < 1) throw ValidationError("max sweeps must be at least 1");
  if (config.threads < 1) throw ValidationError("threads must be at least 1");
  if (config.tolerance && !(*config.tolerance > 0)) throw ValidationError("tolerance must be positive");
  const double relaxation = config.relaxation.value_or(default_relaxation(config.schedule));
  if (!(relaxation > 0 && relaxation <= 1)) throw ValidationError("relaxation must lie in (0, 1]");

  SolveReport report;
  auto start = std::chrono::steady_clock::now();
  Automaton automaton(spec, table, config.affine_cache, config.gradient_step);
  std::mt19937_64 rng(config.seed);
  ContractionEstimator estimator;
  std::optional<ResidualEvaluator> residuals;
  if (config.log_every) residuals.emplace(spec);

  // The default tolerance follows the field magnitude, refreshed periodically
  // and exactly whenever a stop is considered.
  double scale = state.max_abs();
  auto tolerance = [&] { return config.tolerance.value_or(default_tolerance(scale)); };
  report.tolerance = tolerance();

  for (std::size_t s = 1; s <= config.max_sweeps; ++s) {
    double change = sweep(state, automaton, config.schedule, rng, config.threads, relaxation);
    estimator.observe(s, change);
    report.sweeps = s;
    report.final_max_change = change;
    if (config.log_every && s % config.log_every == 0) {
      auto errors = residuals->cell_errors(state);
      report.trace.push_back({s, change, pairwise_sum(errors.data(), errors.size())});
    }
    auto q = estimator.factor();
    report.contraction = q.value_or(0);
    report.estimated_distance = q && *q < 1 ? change / (1 - *q) : change;
    if (change == 0) {
      report.converged = true;
      break;
    }
    if (s % 1024 == 0) scale = state.max_abs();
    if (change > 2 * tolerance()) continue;
    scale = state.max_abs();
    report.tolerance = tolerance();
    if (change > report.tolerance) continue;
    if (config.stop == StopRule::MaxChange) {
      report.converged = true;
      break;
    }
    if (!q || *q >= 1) continue;
    if (report.estimated_distance <= report.tolerance) {
      report.converged = true;
      break;
    }
    if (change <= kRoundingFloor * scale) {
      report.converged = true;
      report.rounding_floor = true;
      break;
    }
  }
  report.skip_count = automaton.skip_count();
  report.fallback_count = automaton.fallback_count();
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::pair<FieldState, SolveReport> solve(const ProblemSpec& spec, const SolveConfig& config,
                                         const std::optional<FieldState>& initial) {
  FieldState state = init(spec, initial);
  RuleTable table = classify(spec);
  SolveReport report = solve(spec, table, config, state);
  return {std::move(state), std::move(report)};
}

// ------------------------------------------------------------- field I/O

void write_field(std::ostream& out, const FieldState& state, const std::string& manifest) {
  out << "dims " << state.grid.dimension;
  for (int e : state.grid.extents) out << ' ' << e;
  out << ' ' << state.components;
  if (!manifest.empty()) out << " # " << manifest;
  out << '\n';
  std::string line;
  const std::size_t cells = state.values.size() / state.components;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    line.clear();
    for (int c = 0; c < state.components; ++c) {
      if (c) line += ' ';
      line += format_double(state.at(cell, c));
    }
    line += '\n';
    out << line;
  }
}

void write_field(const std::filesystem::path& path, const FieldState& state, const std::string& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_field(out, state, manifest);
}

FieldState read_field(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw Error("empty field file");
  if (auto hash = header.find('#'); hash != std::string::npos) header.resize(hash);
  std::istringstream hs(header);
  std::string word;
  FieldState state;
  if (!(hs >> word) || word != "dims" || !(hs >> state.grid.dimension) || state.grid.dimension < 1) {
    throw Error("field file must start with 'dims d n1 ... nd m'");
  }
  state.grid.extents.resize(state.grid.dimension);
  for (int& e : state.grid.extents) {
    if (!(hs >> e) || e < 1) throw Error("invalid extent in field header");
  }
  if (!(hs >> state.components) || state.components < 1) throw Error("invalid component count in field header");
  const std::size_t expected = state.grid.cell_count() * state.components;
  state.values.reserve(expected);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      double v = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) throw Error("invalid value '" + tok + "' in field file");
      state.values.push_back(v);
    }
  }
  if (state.values.size() != expected) {
    throw Error("field file has " + std::to_string(state.values.size()) + " values, expected " +
                std::to_string(expected));
  }
  return state;
}

FieldState read_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_field(in);
}

std::string to_string(Schedule s) { return s == Schedule::RandomSequential ? "random" : "synchronous"; }
std::string to_string(StopRule s) { return s == StopRule::MaxChange ? "max-change" : "fixed-point"; }

Schedule parse_schedule(const std::string& text) {
  if (text == "random" || text == "random-sequential") return Schedule::RandomSequential;
  if (text == "synchronous" || text == "sync") return Schedule::Synchronous;
  throw ValidationError("unknown schedule '" + text + "'");
}

StopRule parse_stop_rule(const std::string& text) {
  if (text == "max-change") return StopRule::MaxChange;
  if (text == "fixed-point") return StopRule::FixedPointEstimate;
  throw ValidationError("unknown stop rule '" + text + "'");
}

}  // namespace stencilforge
