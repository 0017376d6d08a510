#pragma once

// Symbolic scalar expressions.
//
// Grammar (whitespace-insensitive):
//   expr  := term (('+' | '-') term)*
//   term  := unary (('*' | '/') unary)*
//   unary := '-' unary | power
//   power := atom ('^' INT)?
//   atom  := NUMBER | 'pi' | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'
// so that '^' binds tighter than unary minus, which binds tighter than '*'.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "nnbc/error.hpp"
#include "nnbc/scalar.hpp"

namespace nnbc {

enum class ExprKind {
  Const, Var, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Tan, Sqrt, Min, Max, Abs,
  Step,  // indicator u > 0, produced only by diff() for Min/Max/Abs
};

class Expr {
 public:
  struct Node {
    ExprKind kind = ExprKind::Const;
    double value = 0;  // Const
    int index = -1;    // Var: environment slot; Pow: exponent
    std::string name;  // Var name, or "pi" for the reserved constant
    std::vector<Expr> args;
  };

  Expr() : Expr(constant(0.0)) {}

  static Expr constant(double v) {
    Node n;
    n.value = v;
    return Expr(std::move(n));
  }

  /// Constant that prints and reparses to the same tree: negative values
  /// become Neg(Const(|v|)).
  static Expr number(double v) {
    if (v < 0) return unary(ExprKind::Neg, constant(-v));
    return constant(v == 0 ? 0.0 : v);
  }

  static Expr pi() {
    Node n;
    n.value = kPi;
    n.name = "pi";
    return Expr(std::move(n));
  }

  static Expr var(std::string name, int index) {
    Node n;
    n.kind = ExprKind::Var;
    n.name = std::move(name);
    n.index = index;
    return Expr(std::move(n));
  }

  static Expr unary(ExprKind k, Expr a) {
    Node n;
    n.kind = k;
    n.args.push_back(std::move(a));
    return Expr(std::move(n));
  }

  static Expr binary(ExprKind k, Expr a, Expr b) {
    Node n;
    n.kind = k;
    n.args.push_back(std::move(a));
    n.args.push_back(std::move(b));
    return Expr(std::move(n));
  }

  static Expr pow(Expr base, int exponent) {
    if (exponent < 1) throw std::invalid_argument("Pow exponent must be >= 1");
    Node n;
    n.kind = ExprKind::Pow;
    n.index = exponent;
    n.args.push_back(std::move(base));
    return Expr(std::move(n));
  }

  ExprKind kind() const { return node_->kind; }
  const Node& node() const { return *node_; }
  const Expr& arg(std::size_t i) const { return node_->args[i]; }

  bool is_const(double v) const {
    return node_->kind == ExprKind::Const && node_->name.empty() && node_->value == v;
  }

  friend bool operator==(const Expr& a, const Expr& b) {
    if (a.node_ == b.node_) return true;
    const Node& x = *a.node_;
    const Node& y = *b.node_;
    if (x.kind != y.kind || x.name != y.name || x.index != y.index) return false;
    if (x.kind == ExprKind::Const && x.value != y.value) return false;
    if (x.args.size() != y.args.size()) return false;
    for (std::size_t i = 0; i < x.args.size(); ++i) {
      if (!(x.args[i] == y.args[i])) return false;
    }
    return true;
  }

 private:
  explicit Expr(Node n) : node_(std::make_shared<const Node>(std::move(n))) {}
  std::shared_ptr<const Node> node_;
};

inline Expr operator+(Expr a, Expr b) { return Expr::binary(ExprKind::Add, std::move(a), std::move(b)); }
inline Expr operator-(Expr a, Expr b) { return Expr::binary(ExprKind::Sub, std::move(a), std::move(b)); }
inline Expr operator*(Expr a, Expr b) { return Expr::binary(ExprKind::Mul, std::move(a), std::move(b)); }
inline Expr operator/(Expr a, Expr b) { return Expr::binary(ExprKind::Div, std::move(a), std::move(b)); }
inline Expr operator-(Expr a) { return Expr::unary(ExprKind::Neg, std::move(a)); }

// ---------------------------------------------------------------------------
// Lexing

enum class Tok {
  Number, Ident, LParen, RParen, LBracket, RBracket, Comma, Plus, Minus, Star, Slash, Caret,
  Lt, Le, Gt, Ge, Eq, Arrow, Bang, Semi, End,
};

struct Token {
  Tok kind;
  std::string text;
  double number = 0;
  int line = 1;
  int column = 1;
};

inline std::vector<Token> tokenize(std::string_view text, int line = 1, int column = 1) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto is_ident_start = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
  auto is_ident_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      column = 1;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      ++column;
      continue;
    }
    Token t{Tok::End, "", 0, line, column};
    const std::size_t start = i;
    if (is_digit(c) || (c == '.' && i + 1 < text.size() && is_digit(text[i + 1]))) {
      while (i < text.size() && is_digit(text[i])) ++i;
      if (i < text.size() && text[i] == '.') {
        ++i;
        while (i < text.size() && is_digit(text[i])) ++i;
      }
      if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < text.size() && (text[j] == '+' || text[j] == '-')) ++j;
        if (j < text.size() && is_digit(text[j])) {
          i = j;
          while (i < text.size() && is_digit(text[i])) ++i;
        }
      }
      t.kind = Tok::Number;
      t.text = std::string(text.substr(start, i - start));
      const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
      if (res.ec != std::errc()) throw ParseError("malformed number '" + t.text + "'", line, column);
    } else if (is_ident_start(c)) {
      while (i < text.size() && is_ident_char(text[i])) ++i;
      t.kind = Tok::Ident;
      t.text = std::string(text.substr(start, i - start));
    } else {
      auto two = [&](char next) { return i + 1 < text.size() && text[i + 1] == next; };
      switch (c) {
        case '(': t.kind = Tok::LParen; break;
        case ')': t.kind = Tok::RParen; break;
        case '[': t.kind = Tok::LBracket; break;
        case ']': t.kind = Tok::RBracket; break;
        case ',': t.kind = Tok::Comma; break;
        case '+': t.kind = Tok::Plus; break;
        case '*': t.kind = Tok::Star; break;
        case '/': t.kind = Tok::Slash; break;
        case '^': t.kind = Tok::Caret; break;
        case ';': t.kind = Tok::Semi; break;
        case '!': t.kind = Tok::Bang; break;
        case '=': t.kind = Tok::Eq; break;
        case '-':
          t.kind = two('>') ? Tok::Arrow : Tok::Minus;
          break;
        case '<':
          t.kind = two('=') ? Tok::Le : Tok::Lt;
          break;
        case '>':
          t.kind = two('=') ? Tok::Ge : Tok::Gt;
          break;
        default:
          throw ParseError(std::string("unexpected character '") + c + "'", line, column);
      }
      i += (t.kind == Tok::Arrow || t.kind == Tok::Le || t.kind == Tok::Ge) ? 2 : 1;
      t.text = std::string(text.substr(start, i - start));
    }
    column += static_cast<int>(i - start);
    out.push_back(std::move(t));
  }
  out.push_back(Token{Tok::End, "", 0, line, column});
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

/// Recursive-descent expression parser over a token stream. Exposed so that
/// other line-oriented formats can parse an expression prefix and continue.
class ExprParser {
 public:
  ExprParser(std::vector<Token> tokens, std::vector<std::string> vars)
      : toks_(std::move(tokens)), vars_(std::move(vars)) {}

  Expr parse_expression() {
    Expr lhs = parse_term();
    while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
      const bool plus = next().kind == Tok::Plus;
      Expr rhs = parse_term();
      lhs = Expr::binary(plus ? ExprKind::Add : ExprKind::Sub, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool at_end() const { return peek().kind == Tok::End; }
  std::size_t position() const { return pos_; }
  void rewind(std::size_t p) { pos_ = p; }

  const Token& expect(Tok kind, const char* what) {
    if (peek().kind != kind) fail(std::string("expected ") + what);
    return next();
  }

  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    const std::string got = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    throw ParseError(msg + ", got " + got, t.line, t.column);
  }

  const std::vector<std::string>& vars() const { return vars_; }

 private:
  Expr parse_term() {
    Expr lhs = parse_unary();
    while (peek().kind == Tok::Star || peek().kind == Tok::Slash) {
      const bool mul = next().kind == Tok::Star;
      Expr rhs = parse_unary();
      lhs = Expr::binary(mul ? ExprKind::Mul : ExprKind::Div, std::move(lhs), std::move(rhs));
    }
    return lhs;
  }

  Expr parse_unary() {
    if (peek().kind == Tok::Minus) {
      next();
      return Expr::unary(ExprKind::Neg, parse_unary());
    }
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_atom();
    if (peek().kind == Tok::Caret) {
      next();
      const Token& t = peek();
      const bool integral = t.kind == Tok::Number &&
                            t.text.find_first_not_of("0123456789") == std::string::npos;
      if (!integral || t.number < 1 || t.number > 64) fail("exponent must be an integer literal in [1, 64]");
      next();
      return Expr::pow(std::move(base), static_cast<int>(t.number));
    }
    return base;
  }

  Expr parse_atom() {
    const Token& t = peek();
    if (t.kind == Tok::Number) {
      next();
      return Expr::constant(t.number);
    }
    if (t.kind == Tok::LParen) {
      next();
      Expr e = parse_expression();
      expect(Tok::RParen, "')'");
      return e;
    }
    if (t.kind != Tok::Ident) fail("expected an expression");
    const Token ident = next();
    if (peek().kind == Tok::LParen) return parse_call(ident);
    if (ident.text == "pi") return Expr::pi();
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == ident.text) return Expr::var(ident.text, static_cast<int>(i));
    }
    throw UnboundIdentifier(ident.text, ident.line, ident.column);
  }

  Expr parse_call(const Token& ident) {
    struct Fn {
      const char* name;
      ExprKind kind;
      int arity;
    };
    static constexpr Fn kFns[] = {
        {"sin", ExprKind::Sin, 1}, {"cos", ExprKind::Cos, 1},   {"tan", ExprKind::Tan, 1},
        {"sqrt", ExprKind::Sqrt, 1}, {"abs", ExprKind::Abs, 1}, {"min", ExprKind::Min, 2},
        {"max", ExprKind::Max, 2},
    };
    const Fn* fn = nullptr;
    for (const auto& f : kFns) {
      if (ident.text == f.name) fn = &f;
    }
    if (!fn) throw ParseError("unknown function '" + ident.text + "'", ident.line, ident.column);
    expect(Tok::LParen, "'('");
    std::vector<Expr> args;
    args.push_back(parse_expression());
    while (peek().kind == Tok::Comma) {
      next();
      args.push_back(parse_expression());
    }
    expect(Tok::RParen, "')'");
    if (static_cast<int>(args.size()) != fn->arity) {
      throw ParseError(ident.text + "() takes " + std::to_string(fn->arity) + " argument(s)",
                       ident.line, ident.column);
    }
    if (fn->arity == 1) return Expr::unary(fn->kind, std::move(args[0]));
    return Expr::binary(fn->kind, std::move(args[0]), std::move(args[1]));
  }

  std::vector<Token> toks_;
  std::vector<std::string> vars_;
  std::size_t pos_ = 0;
};

/// Parses a complete expression. Every identifier must be in `vars` or be `pi`.
inline Expr parse_expr(std::string_view text, std::vector<std::string> vars, int line = 1,
                       int column = 1) {
  ExprParser p(tokenize(text, line, column), std::move(vars));
  Expr e = p.parse_expression();
  if (!p.at_end()) p.fail("unexpected trailing input");
  return e;
}

// ---------------------------------------------------------------------------
// Printing

enum class NumberStyle { Shortest, Fixed };

namespace detail {

inline std::string format_number(double v, NumberStyle style) {
  char buf[512];
  const auto res = style == NumberStyle::Fixed
                       ? std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed)
                       : std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline int precedence(const Expr& e) {
  switch (e.kind()) {
    case ExprKind::Add:
    case ExprKind::Sub: return 1;
    case ExprKind::Mul:
    case ExprKind::Div: return 2;
    case ExprKind::Neg: return 3;
    case ExprKind::Pow: return 4;
    default: return 5;
  }
}

inline void print(const Expr& e, std::string& out, NumberStyle style) {
  auto wrapped = [&](const Expr& child, bool wrap) {
    if (wrap) out += '(';
    print(child, out, style);
    if (wrap) out += ')';
  };
  const auto& n = e.node();
  const int p = precedence(e);
  switch (n.kind) {
    case ExprKind::Const:
      if (!n.name.empty()) {
        out += n.name;
      } else if (n.value < 0 || std::signbit(n.value)) {
        out += "(" + format_number(n.value, style) + ")";
      } else {
        out += format_number(n.value, style);
      }
      return;
    case ExprKind::Var: out += n.name; return;
    case ExprKind::Neg:
      out += '-';
      wrapped(n.args[0], precedence(n.args[0]) < 3);
      return;
    case ExprKind::Pow:
      wrapped(n.args[0], precedence(n.args[0]) < 5);
      out += "^" + std::to_string(n.index);
      return;
    case ExprKind::Add:
    case ExprKind::Sub:
    case ExprKind::Mul:
    case ExprKind::Div: {
      static constexpr const char* kOps[] = {" + ", " - ", "*", "/"};
      const int op = static_cast<int>(n.kind) - static_cast<int>(ExprKind::Add);
      wrapped(n.args[0], precedence(n.args[0]) < p);
      out += kOps[op];
      wrapped(n.args[1], precedence(n.args[1]) <= p);
      return;
    }
    default: {
      static constexpr const char* kNames[] = {"sin", "cos", "tan", "sqrt", "min", "max", "abs", "step"};
      out += kNames[static_cast<int>(n.kind) - static_cast<int>(ExprKind::Sin)];
      out += '(';
      for (std::size_t i = 0; i < n.args.size(); ++i) {
        if (i) out += ", ";
        print(n.args[i], out, style);
      }
      out += ')';
    }
  }
}

}  // namespace detail

inline std::string to_string(const Expr& e, NumberStyle style = NumberStyle::Shortest) {
  std::string out;
  detail::print(e, out, style);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

/// How generic code creates constants of scalar type S. Var specializes this
/// to record onto the tape of an existing operand.
template <class S>
struct ScalarTraits {
  static S constant(double v, std::span<const S>) { return S(v); }
};

/// Evaluates `e` with `lookup(node)` supplying variable values.
template <class S, class Lookup>
S evaluate_with(const Expr& e, Lookup&& lookup, std::span<const S> anchor) {
  const auto& n = e.node();
  auto arg = [&](std::size_t i) { return evaluate_with<S>(n.args[i], lookup, anchor); };
  switch (n.kind) {
    case ExprKind::Const: return ScalarTraits<S>::constant(n.value, anchor);
    case ExprKind::Var: return lookup(n);
    case ExprKind::Neg: return -arg(0);
    case ExprKind::Add: return arg(0) + arg(1);
    case ExprKind::Sub: return arg(0) - arg(1);
    case ExprKind::Mul: return arg(0) * arg(1);
    case ExprKind::Div: return checked_div(arg(0), arg(1));
    case ExprKind::Pow: return pow_int(arg(0), n.index);
    case ExprKind::Sin: return sin(arg(0));
    case ExprKind::Cos: return cos(arg(0));
    case ExprKind::Tan: return tan(arg(0));
    case ExprKind::Sqrt: return sqrt(arg(0));
    case ExprKind::Min: return min(arg(0), arg(1));
    case ExprKind::Max: return max(arg(0), arg(1));
    case ExprKind::Abs: return abs(arg(0));
    case ExprKind::Step: return step(arg(0));
  }
  throw std::logic_error("unreachable expression kind");
}

/// Evaluates with variables bound by environment slot (the parse-time index).
template <class S>
S evaluate(const Expr& e, std::span<const S> env) {
  return evaluate_with<S>(
      e,
      [env](const Expr::Node& n) -> S {
        if (n.index < 0 || static_cast<std::size_t>(n.index) >= env.size()) {
          throw std::out_of_range("variable '" + n.name + "' has no environment slot");
        }
        return env[n.index];
      },
      env);
}

inline double eval(const Expr& e, const std::map<std::string, double>& env) {
  return evaluate_with<double>(
      e,
      [&env](const Expr::Node& n) {
        const auto it = env.find(n.name);
        if (it == env.end()) throw std::invalid_argument("variable '" + n.name + "' is not bound");
        return it->second;
      },
      std::span<const double>{});
}

// ---------------------------------------------------------------------------
// Symbolic differentiation

namespace detail {

inline Expr d_add(Expr a, Expr b) {
  if (a.is_const(0)) return b;
  if (b.is_const(0)) return a;
  return std::move(a) + std::move(b);
}
inline Expr d_sub(Expr a, Expr b) {
  if (b.is_const(0)) return a;
  if (a.is_const(0)) return -std::move(b);
  return std::move(a) - std::move(b);
}
inline Expr d_mul(Expr a, Expr b) {
  if (a.is_const(0) || b.is_const(0)) return Expr::constant(0);
  if (a.is_const(1)) return b;
  if (b.is_const(1)) return a;
  return std::move(a) * std::move(b);
}

}  // namespace detail

/// d e / d v. Kinks: Max/Min follow the selected branch with ties going to
/// the second argument; Abs'(0) = 0.
inline Expr diff(const Expr& e, const std::string& v) {
  using namespace detail;
  const auto& n = e.node();
  auto a = [&](std::size_t i) -> const Expr& { return n.args[i]; };
  auto da = [&](std::size_t i) { return diff(n.args[i], v); };
  const Expr one = Expr::constant(1);
  switch (n.kind) {
    case ExprKind::Const:
    case ExprKind::Step: return Expr::constant(0);
    case ExprKind::Var: return Expr::constant(n.name == v ? 1 : 0);
    case ExprKind::Neg: {
      Expr d = da(0);
      return d.is_const(0) ? d : -d;
    }
    case ExprKind::Add: return d_add(da(0), da(1));
    case ExprKind::Sub: return d_sub(da(0), da(1));
    case ExprKind::Mul: return d_add(d_mul(da(0), a(1)), d_mul(a(0), da(1)));
    case ExprKind::Div: {
      Expr num = d_sub(d_mul(da(0), a(1)), d_mul(a(0), da(1)));
      if (num.is_const(0)) return num;
      return num / Expr::pow(a(1), 2);
    }
    case ExprKind::Pow: {
      const int k = n.index;
      if (k == 1) return da(0);
      Expr base = k == 2 ? a(0) : Expr::pow(a(0), k - 1);
      return d_mul(Expr::constant(k) * base, da(0));
    }
    case ExprKind::Sin: return d_mul(Expr::unary(ExprKind::Cos, a(0)), da(0));
    case ExprKind::Cos: return d_mul(-Expr::unary(ExprKind::Sin, a(0)), da(0));
    case ExprKind::Tan:
      return d_mul(one + Expr::pow(Expr::unary(ExprKind::Tan, a(0)), 2), da(0));
    case ExprKind::Sqrt: {
      Expr d = da(0);
      if (d.is_const(0)) return d;
      return d / (Expr::constant(2) * e);
    }
    case ExprKind::Max:
    case ExprKind::Min: {
      const bool is_max = n.kind == ExprKind::Max;
      Expr sel = Expr::unary(ExprKind::Step, is_max ? a(0) - a(1) : a(1) - a(0));
      return d_add(d_mul(sel, da(0)), d_mul(one - sel, da(1)));
    }
    case ExprKind::Abs: {
      Expr sign = Expr::unary(ExprKind::Step, a(0)) - Expr::unary(ExprKind::Step, -a(0));
      return d_mul(sign, da(0));
    }
  }
  throw std::logic_error("unreachable expression kind");
}

}  // namespace nnbc
