// Numeric closed-form profiles for given functions (ramps, Gaussians, ...).
// These produce grid samples only; they never become symbolic expressions.

#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <numbers>

#include "stencilforge/error.hpp"
#include "stencilforge/problem.hpp"

namespace stencilforge {

namespace {

using Coords = std::vector<double>;
using Node = std::function<double(const Coords&)>;

class ProfileParser {
 public:
  ProfileParser(std::string_view text, const GridSpec& grid, const std::map<std::string, double>& parameters)
      : text_(text), grid_(grid), parameters_(parameters) {}

  Node parse() {
    Node n = sum();
    skip();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError("profile: " + message, 1, static_cast<int>(pos_) + 1);
  }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Node sum() {
    Node left = product();
    for (;;) {
      if (accept('+')) {
        left = [a = left, b = product()](const Coords& x) { return a(x) + b(x); };
      } else if (accept('-')) {
        left = [a = left, b = product()](const Coords& x) { return a(x) - b(x); };
      } else {
        return left;
      }
    }
  }

  Node product() {
    Node left = unary();
    for (;;) {
      if (accept('*')) {
        left = [a = left, b = unary()](const Coords& x) { return a(x) * b(x); };
      } else if (accept('/')) {
        left = [a = left, b = unary()](const Coords& x) { return a(x) / b(x); };
      } else {
        return left;
      }
    }
  }

  Node unary() {
    if (accept('-')) return [a = unary()](const Coords& x) { return -a(x); };
    if (accept('+')) return unary();
    return power();
  }

  Node power() {
    Node base = primary();
    if (accept('^')) {
      Node exponent = unary();
      return [base, exponent](const Coords& x) { return std::pow(base(x), exponent(x)); };
    }
    return base;
  }

  Node primary() {
    skip();
    if (pos_ >= text_.size()) fail("unexpected end of profile");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Node n = sum();
      if (!accept(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double value = 0;
      auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
      if (ec != std::errc()) fail("invalid number");
      pos_ = static_cast<std::size_t>(ptr - text_.data());
      return [value](const Coords&) { return value; };
    }
    if (!std::isalpha(static_cast<unsigned char>(c)) && c != '_') fail("unexpected '" + std::string(1, c) + "'");
    std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    std::string name(text_.substr(start, pos_ - start));

    if (accept('(')) {
      Node arg = sum();
      if (!accept(')')) fail("expected ')'");
      double (*fn)(double) = nullptr;
      if (name == "exp") fn = [](double v) { return std::exp(v); };
      if (name == "sqrt") fn = [](double v) { return std::sqrt(v); };
      if (name == "sin") fn = [](double v) { return std::sin(v); };
      if (name == "cos") fn = [](double v) { return std::cos(v); };
      if (name == "abs") fn = [](double v) { return std::abs(v); };
      if (!fn) fail("unknown function '" + name + "'");
      return [fn, arg](const Coords& x) { return fn(arg(x)); };
    }
    if (auto it = parameters_.find(name); it != parameters_.end()) {
      double value = it->second;
      return [value](const Coords&) { return value; };
    }
    if (name == "pi") return [](const Coords&) { return std::numbers::pi; };
    if (int axis = axis_index(name, 'x'); axis >= 0) return [axis](const Coords& x) { return x[axis]; };
    if (int axis = axis_index(name, 'n'); axis >= 0) {
      double extent = grid_.extents[axis];
      return [extent](const Coords&) { return extent; };
    }
    pos_ = start;
    fail("unknown symbol '" + name + "'");
  }

  int axis_index(const std::string& name, char prefix) const {
    int axis = -1;
    if (prefix == 'x' && name.size() == 1) {
      static constexpr std::string_view kAliases = "xyzt";
      auto p = kAliases.find(name[0]);
      if (p != std::string_view::npos) axis = static_cast<int>(p);
    } else if (name.size() > 1 && name[0] == prefix) {
      auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), axis);
      if (ec != std::errc() || ptr != name.data() + name.size()) axis = -1;
    }
    return axis < grid_.dimension ? axis : -1;
  }

  std::string_view text_;
  const GridSpec& grid_;
  const std::map<std::string, double>& parameters_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<double> evaluate_profile(std::string_view profile, const GridSpec& grid,
                                     const std::map<std::string, double>& parameters) {
  Node node = ProfileParser(profile, grid, parameters).parse();
  std::vector<double> out(grid.cell_count());
  Coords x(grid.dimension);
  for (std::size_t cell = 0; cell < out.size(); ++cell) {
    auto c = grid.coords(cell);
    for (int a = 0; a < grid.dimension; ++a) x[a] = c[a];
    out[cell] = node(x);
  }
  return out;
}

}  // namespace stencilforge
