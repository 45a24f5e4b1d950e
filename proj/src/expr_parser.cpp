#include "stencilforge/expr_parser.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "stencilforge/error.hpp"

namespace stencilforge {

Rational parse_decimal(std::string_view literal) {
  std::string digits;
  long exponent = 0;
  bool negative = false;
  std::size_t i = 0;
  if (i < literal.size() && (literal[i] == '+' || literal[i] == '-')) negative = literal[i++] == '-';
  bool seen_digit = false;
  bool seen_dot = false;
  for (; i < literal.size(); ++i) {
    char c = literal[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digits += c;
      seen_digit = true;
      if (seen_dot) --exponent;
    } else if (c == '.' && !seen_dot) {
      seen_dot = true;
    } else {
      break;
    }
  }
  if (!seen_digit) throw Error("invalid number '" + std::string(literal) + "'");
  if (i < literal.size() && (literal[i] == 'e' || literal[i] == 'E')) {
    long e = 0;
    std::string_view rest = literal.substr(i + 1);
    if (!rest.empty() && rest.front() == '+') rest.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), e);
    if (ec != std::errc() || ptr != rest.data() + rest.size()) {
      throw Error("invalid exponent in '" + std::string(literal) + "'");
    }
    exponent += e;
  } else if (i != literal.size()) {
    throw Error("invalid number '" + std::string(literal) + "'");
  }
  mpz_class mantissa(digits, 10);
  mpz_class scale;
  mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(exponent < 0 ? -exponent : exponent));
  Rational out = exponent < 0 ? Rational(mantissa, scale) : Rational(mantissa * scale);
  out.canonicalize();
  return negative ? Rational(-out) : out;
}

namespace {

class ExprParser {
 public:
  ExprParser(std::string_view text, const SymbolContext& ctx, int line, int column)
      : text_(text), ctx_(ctx), line_(line), column_(column) {}

  Expression parse() {
    Expression e = expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(message, line_, column_ + static_cast<int>(pos_));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  int integer() {
    skip_space();
    std::size_t start = pos_;
    if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) ++pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    std::string_view tok = text_.substr(start, pos_ - start);
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    int value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
      pos_ = start;
      fail("expected integer");
    }
    return value;
  }

  Expression expr() {
    Expression e = term();
    for (;;) {
      if (accept('+')) {
        e = e + term();
      } else if (accept('-')) {
        e = e - term();
      } else {
        return e;
      }
    }
  }

  Expression term() {
    Expression e = unary();
    for (;;) {
      if (accept('*')) {
        e = e * unary();
      } else if (accept('/')) {
        std::size_t at = pos_;
        Expression d = unary();
        if (d.is_zero()) {
          pos_ = at;
          fail("division by the zero expression");
        }
        e = e / d;
      } else {
        return e;
      }
    }
  }

  Expression unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Expression power() {
    Expression base = primary();
    if (accept('^')) {
      std::size_t at = pos_;
      int e = integer();
      if (e < 0 && base.is_zero()) {
        pos_ = at;
        fail("division by the zero expression");
      }
      return pow(base, e);
    }
    return base;
  }

  Expression primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expression e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return symbol();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  Expression number() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) ++pos_;
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    try {
      return Expression(parse_decimal(text_.substr(start, pos_ - start)));
    } catch (const Error& e) {
      pos_ = start;
      fail(e.what());
    }
  }

  Expression symbol() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    std::string name(text_.substr(start, pos_ - start));

    auto field = std::find(ctx_.fields.begin(), ctx_.fields.end(), name);
    bool is_field = field != ctx_.fields.end();
    bool is_given = ctx_.givens.count(name) > 0;
    if (is_field || is_given) {
      std::size_t at = pos_;
      if (!accept('[')) {
        pos_ = at;
        fail("'" + name + "' needs an offset, e.g. " + name + "[0]");
      }
      Offset offset{integer()};
      while (accept(',')) offset.push_back(integer());
      expect(']');
      if (static_cast<int>(offset.size()) != ctx_.dimension) {
        pos_ = start;
        fail("offset of '" + name + "' has " + std::to_string(offset.size()) + " components, problem dimension is " +
             std::to_string(ctx_.dimension));
      }
      if (is_field) return Expression::cell(static_cast<int>(field - ctx_.fields.begin()), std::move(offset));
      return Expression::given(std::move(name), std::move(offset));
    }
    if (ctx_.parameters.count(name)) return Expression::parameter(std::move(name));
    pos_ = start;
    fail("undeclared symbol '" + name + "'");
  }

  std::string_view text_;
  const SymbolContext& ctx_;
  int line_;
  int column_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression parse_expression(std::string_view text, const SymbolContext& ctx, int line, int column) {
  return ExprParser(text, ctx, line, column).parse();
}

}  // namespace stencilforge
