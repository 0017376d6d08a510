#pragma once

// Piecewise-linear Bent-ReLU bounds and iSAT3-style script emission.
//
// A script has a DECL section of bounded real variables and an EXPR section
// of constraints. The emitter builds a small AST, prints it, and
// parse_isat() reads the printed form back so the two can be compared.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nnbc/error.hpp"
#include "nnbc/expr.hpp"
#include "nnbc/interval.hpp"
#include "nnbc/nn.hpp"
#include "nnbc/system.hpp"
#include "nnbc/verify.hpp"

namespace nnbc {

inline double bent_relu(double x) { return 0.5 * x + std::sqrt(0.25 * x * x + kBentEps); }
inline double bent_relu_deriv(double x) { return 0.5 + 0.25 * x / std::sqrt(0.25 * x * x + kBentEps); }

struct PwlSegment {
  double x0 = 0, x1 = 0;
  double up_slope = 0, up_icpt = 0;  // chord, shifted up by the padding
  double lo_slope = 0, lo_icpt = 0;  // midpoint tangent, shifted down
  double d_lo = 0, d_hi = 0;         // derivative range on the segment
  double sagitta = 0;                // max of chord - a on the segment

  double upper(double x) const { return up_slope * x + up_icpt; }
  double lower(double x) const { return lo_slope * x + lo_icpt; }
};

struct PwlBentRelu {
  Interval range;
  std::vector<PwlSegment> segments;

  const PwlSegment& segment_for(double x) const {
    if (!range.contains(x)) throw std::out_of_range("point outside the PWL range");
    const double w = range.width() / static_cast<double>(segments.size());
    std::size_t k = w > 0 ? static_cast<std::size_t>((x - range.lo) / w) : 0;
    k = std::min(k, segments.size() - 1);
    // guard against rounding at segment borders
    while (k > 0 && x < segments[k].x0) --k;
    while (k + 1 < segments.size() && x > segments[k].x1) ++k;
    return segments[k];
  }

  /// Largest upper - lower gap over all segments (attained at segment ends).
  double max_gap() const {
    double g = 0;
    for (const auto& s : segments) {
      g = std::max({g, s.upper(s.x0) - s.lower(s.x0), s.upper(s.x1) - s.lower(s.x1)});
    }
    return g;
  }
};

/// Chords above and midpoint tangents below Bent-ReLU (which is convex),
/// plus per-segment derivative ranges from the endpoint derivative values
/// (the derivative is increasing).
inline PwlBentRelu pwl_bent_relu(Interval range, int segments) {
  if (segments < 1) throw std::invalid_argument("PWL needs at least one segment");
  PwlBentRelu out;
  out.range = range;
  for (int k = 0; k < segments; ++k) {
    PwlSegment s;
    s.x0 = k == 0 ? range.lo : range.lo + range.width() * k / segments;
    s.x1 = k == segments - 1 ? range.hi : range.lo + range.width() * (k + 1) / segments;
    const double pad = 1e-12 * (1 + std::fabs(s.x0) + std::fabs(s.x1));
    const double a0 = bent_relu(s.x0), a1 = bent_relu(s.x1);
    if (s.x1 > s.x0) {
      s.up_slope = (a1 - a0) / (s.x1 - s.x0);
    } else {
      s.up_slope = bent_relu_deriv(s.x0);
    }
    s.up_icpt = a0 - s.up_slope * s.x0 + pad;
    const double m = s.x0 + (s.x1 - s.x0) / 2;
    s.lo_slope = bent_relu_deriv(m);
    s.lo_icpt = bent_relu(m) - s.lo_slope * m - pad;
    s.d_lo = std::max(0.0, bent_relu_deriv(s.x0) - pad);
    s.d_hi = std::min(1.0, bent_relu_deriv(s.x1) + pad);
    // chord touches a' = slope at x* = 0.04 t / sqrt(1 - 4 t^2), t = slope - 1/2
    const double t = std::clamp(s.up_slope - 0.5, -0.5 + 1e-15, 0.5 - 1e-15);
    const double xs = std::clamp(0.04 * t / std::sqrt(1 - 4 * t * t), s.x0, s.x1);
    s.sagitta = std::max(0.0, (a0 + s.up_slope * (xs - s.x0)) - bent_relu(xs));
    out.segments.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Script AST

enum class RelOp { Lt, Le, Gt, Ge, Eq };

struct Formula {
  enum class Kind { Rel, And, Or, Imply, Not };
  Kind kind = Kind::Rel;
  RelOp op = RelOp::Eq;
  Expr lhs, rhs;
  std::vector<Formula> args;

  static Formula rel(Expr a, RelOp op, Expr b) {
    Formula f;
    f.op = op;
    f.lhs = std::move(a);
    f.rhs = std::move(b);
    return f;
  }
  static Formula group(Kind k, std::vector<Formula> xs) {
    if (xs.size() == 1 && (k == Kind::And || k == Kind::Or)) return std::move(xs[0]);
    Formula f;
    f.kind = k;
    f.args = std::move(xs);
    return f;
  }
  static Formula imply(Formula a, Formula b) { return group(Kind::Imply, {std::move(a), std::move(b)}); }
  static Formula negate(Formula a) { return group(Kind::Not, {std::move(a)}); }

  friend bool operator==(const Formula& a, const Formula& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == Kind::Rel) return a.op == b.op && a.lhs == b.lhs && a.rhs == b.rhs;
    return a.args == b.args;
  }
};

struct IsatDecl {
  std::string name;
  double lo = 0, hi = 0;
  friend bool operator==(const IsatDecl&, const IsatDecl&) = default;
};

struct IsatScript {
  std::vector<IsatDecl> decls;
  std::vector<Formula> constraints;

  friend bool operator==(const IsatScript& a, const IsatScript& b) {
    return a.decls == b.decls && a.constraints == b.constraints;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& d : decls) out.push_back(d.name);
    return out;
  }
};

namespace detail {

inline const char* relop_text(RelOp op) {
  switch (op) {
    case RelOp::Lt: return "<";
    case RelOp::Le: return "<=";
    case RelOp::Gt: return ">";
    case RelOp::Ge: return ">=";
    case RelOp::Eq: return "=";
  }
  return "?";
}

inline void print_formula(const Formula& f, std::string& out) {
  using K = Formula::Kind;
  switch (f.kind) {
    case K::Rel:
      out += to_string(f.lhs, NumberStyle::Fixed);
      out += ' ';
      out += relop_text(f.op);
      out += ' ';
      out += to_string(f.rhs, NumberStyle::Fixed);
      return;
    case K::Not:
      out += "!(";
      print_formula(f.args[0], out);
      out += ')';
      return;
    default: {
      const char* sep = f.kind == K::And ? " and " : f.kind == K::Or ? " or " : " -> ";
      out += '(';
      for (std::size_t i = 0; i < f.args.size(); ++i) {
        if (i) out += sep;
        print_formula(f.args[i], out);
      }
      out += ')';
    }
  }
}

}  // namespace detail

inline std::string to_string(const Formula& f) {
  std::string s;
  detail::print_formula(f, s);
  return s;
}

inline std::string to_string(const IsatScript& s) {
  std::ostringstream os;
  os << "DECL\n";
  for (const auto& d : s.decls) {
    os << "  float [" << detail::format_number(d.lo, NumberStyle::Fixed) << ", "
       << detail::format_number(d.hi, NumberStyle::Fixed) << "] " << d.name << ";\n";
  }
  os << "EXPR\n";
  for (const auto& c : s.constraints) os << "  " << to_string(c) << ";\n";
  return os.str();
}

namespace detail {

class FormulaParser {
 public:
  FormulaParser(std::vector<Token> toks, std::vector<std::string> vars) : p_(std::move(toks), std::move(vars)) {}

  ExprParser& base() { return p_; }

  Formula formula() {
    Formula a = disjunction();
    if (p_.peek().kind == Tok::Arrow) {
      p_.next();
      Formula b = disjunction();
      return Formula::imply(std::move(a), std::move(b));
    }
    return a;
  }

 private:
  bool keyword(const char* w) const { return p_.peek().kind == Tok::Ident && p_.peek().text == w; }

  Formula disjunction() {
    std::vector<Formula> xs{conjunction()};
    while (keyword("or")) {
      p_.next();
      xs.push_back(conjunction());
    }
    return Formula::group(Formula::Kind::Or, std::move(xs));
  }

  Formula conjunction() {
    std::vector<Formula> xs{unary()};
    while (keyword("and")) {
      p_.next();
      xs.push_back(unary());
    }
    return Formula::group(Formula::Kind::And, std::move(xs));
  }

  Formula unary() {
    if (p_.peek().kind == Tok::Bang) {
      p_.next();
      return Formula::negate(unary());
    }
    if (p_.peek().kind == Tok::LParen) {
      const std::size_t at = p_.position();
      try {
        return relation();
      } catch (const ParseError&) {
        p_.rewind(at);
      }
      p_.next();
      Formula f = formula();
      p_.expect(Tok::RParen, "')'");
      return f;
    }
    return relation();
  }

  Formula relation() {
    Expr a = p_.parse_expression();
    RelOp op;
    switch (p_.peek().kind) {
      case Tok::Lt: op = RelOp::Lt; break;
      case Tok::Le: op = RelOp::Le; break;
      case Tok::Gt: op = RelOp::Gt; break;
      case Tok::Ge: op = RelOp::Ge; break;
      case Tok::Eq: op = RelOp::Eq; break;
      default: p_.fail("expected a relational operator");
    }
    p_.next();
    Expr b = p_.parse_expression();
    return Formula::rel(std::move(a), op, std::move(b));
  }

  ExprParser p_;
};

}  // namespace detail

/// Reads a script printed by to_string(IsatScript).
inline IsatScript parse_isat(const std::string& text) {
  IsatScript s;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  enum { None, Decl, Body } section = None;
  std::string body;
  int body_line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto h = raw.find("--"); h != std::string::npos) raw.resize(h);
    const std::string t = detail::trim(raw);
    if (t.empty()) continue;
    if (t == "DECL") {
      section = Decl;
      continue;
    }
    if (t == "EXPR") {
      section = Body;
      body_line = line + 1;
      continue;
    }
    if (section == None) throw ParseError("expected DECL", line, 1);
    if (section == Decl) {
      const auto toks = tokenize(t, line, 1);
      ExprParser p(toks, {});
      const Token kw = p.expect(Tok::Ident, "'float'");
      if (kw.text != "float") throw ParseError("expected 'float'", kw.line, kw.column);
      p.expect(Tok::LBracket, "'['");
      const double lo = eval(p.parse_expression(), {});
      p.expect(Tok::Comma, "','");
      const double hi = eval(p.parse_expression(), {});
      p.expect(Tok::RBracket, "']'");
      const Token name = p.expect(Tok::Ident, "a variable name");
      p.expect(Tok::Semi, "';'");
      if (!p.at_end()) p.fail("unexpected trailing input");
      s.decls.push_back({name.text, lo, hi});
    } else {
      body += raw;
      body += '\n';
    }
  }
  if (section != Body) throw ParseError("missing section 'EXPR'", line + 1, 1);
  detail::FormulaParser fp(tokenize(body, body_line, 1), s.names());
  while (!fp.base().at_end()) {
    s.constraints.push_back(fp.formula());
    fp.base().expect(Tok::Semi, "';'");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Emission

namespace detail {

class ScriptBuilder {
 public:
  int declare(const std::string& name, Interval range) {
    const auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    const int idx = static_cast<int>(script_.decls.size());
    script_.decls.push_back({name, range.lo, range.hi});
    index_[name] = idx;
    return idx;
  }

  Expr var(const std::string& name) const { return Expr::var(name, index_.at(name)); }

  void add(Formula f) { script_.constraints.push_back(std::move(f)); }

  IsatScript take() { return std::move(script_); }

 private:
  IsatScript script_;
  std::map<std::string, int> index_;
};

// Sum of w_j * x_j + b with zero weights dropped.
inline Expr affine(std::span<const double> w, const std::vector<Expr>& x, double b) {
  std::optional<Expr> acc;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (w[j] == 0) continue;
    Expr t = w[j] == 1 ? x[j] : Expr::number(w[j]) * x[j];
    acc = acc ? *acc + t : t;
  }
  if (b != 0 || !acc) {
    Expr c = Expr::number(b);
    acc = acc ? *acc + c : c;
  }
  return *acc;
}

inline Interval widen(Interval r) {
  const double pad = 1e-9 * (1 + std::max(std::fabs(r.lo), std::fabs(r.hi)));
  return {r.lo - pad, r.hi + pad};
}

// Rewrites `e` for the script: variables through `bind`, pi as a number,
// tan as sin/cos, sqrt through an auxiliary variable.
inline Expr lower_expr(const Expr& e, const std::function<Expr(int)>& bind,
                       const std::function<Interval(const Expr&)>& range, ScriptBuilder& sb, int& aux) {
  const auto& n = e.node();
  auto rec = [&](std::size_t i) { return lower_expr(n.args[i], bind, range, sb, aux); };
  switch (n.kind) {
    case ExprKind::Const: return Expr::number(n.value);
    case ExprKind::Var: return bind(n.index);
    case ExprKind::Pow: return Expr::pow(rec(0), n.index);
    case ExprKind::Tan: {
      Expr a = rec(0);
      return Expr::unary(ExprKind::Sin, a) / Expr::unary(ExprKind::Cos, a);
    }
    case ExprKind::Sqrt: {
      Expr a = rec(0);
      const Interval r = sqrt(range(n.args[0]));
      const std::string name = "nn_sqrt" + std::to_string(aux++);
      sb.declare(name, widen(r));
      const Expr s = sb.var(name);
      sb.add(Formula::rel(s, RelOp::Ge, Expr::number(0)));
      sb.add(Formula::rel(Expr::pow(s, 2), RelOp::Eq, a));
      return s;
    }
    case ExprKind::Step: throw std::invalid_argument("step() cannot be emitted");
    default: {
      std::vector<Expr> args;
      for (std::size_t i = 0; i < n.args.size(); ++i) args.push_back(rec(i));
      if (args.size() == 1) return Expr::unary(n.kind, std::move(args[0]));
      return Expr::binary(n.kind, std::move(args[0]), std::move(args[1]));
    }
  }
}

struct EncodedNet {
  std::vector<Expr> outputs;
  // per layer pre-activation and derivative variables (barrier only)
  std::vector<std::vector<Expr>> pre;
  std::vector<std::vector<Expr>> deriv;
};

// Encodes a network over `inputs` whose ranges over the domain are `in_range`.
// Hidden units get declared pre-activation/activation variables; the output
// layer stays an inline expression.
inline EncodedNet encode_net(const Mlp& net, const std::string& prefix, const std::vector<Expr>& inputs,
                             std::vector<Interval> in_range, int segments, bool with_deriv, ScriptBuilder& sb) {
  EncodedNet enc;
  std::vector<Expr> cur = inputs;
  const auto& dims = net.dims();
  const std::size_t L = net.num_layers();
  for (std::size_t l = 0; l < L; ++l) {
    const Activation& act = net.activation(l);
    std::vector<Expr> nxt;
    std::vector<Interval> nxt_range;
    enc.pre.emplace_back();
    enc.deriv.emplace_back();
    for (int i = 0; i < dims[l + 1]; ++i) {
      std::vector<double> w(dims[l]);
      Interval zr(net.b(l, i));
      for (int j = 0; j < dims[l]; ++j) {
        w[j] = net.W(l, i, j);
        zr = zr + w[j] * in_range[j];
      }
      const Expr z_expr = affine(w, cur, net.b(l, i));
      const Interval ar = widen(activate(act, zr));
      if (l + 1 == L && act.kind == ActKind::Identity) {
        nxt.push_back(z_expr);
        nxt_range.push_back(widen(zr));
        continue;
      }
      const std::string tag = prefix + std::to_string(l + 1) + "_" + std::to_string(i + 1);
      sb.declare(tag + "_z", widen(zr));
      const Expr z = sb.var(tag + "_z");
      sb.add(Formula::rel(z, RelOp::Eq, z_expr));
      enc.pre.back().push_back(z);
      sb.declare(tag + "_a", ar);
      const Expr a = sb.var(tag + "_a");
      std::optional<Expr> d;
      if (with_deriv) {
        sb.declare(tag + "_d", widen(activate_deriv(act, zr)));
        d = sb.var(tag + "_d");
        enc.deriv.back().push_back(*d);
      }
      switch (act.kind) {
        case ActKind::Identity:
          sb.add(Formula::rel(a, RelOp::Eq, z));
          if (d) sb.add(Formula::rel(*d, RelOp::Eq, Expr::number(1)));
          break;
        case ActKind::ReLU:
          sb.add(Formula::rel(a, RelOp::Eq, Expr::binary(ExprKind::Max, Expr::number(0), z)));
          if (d) {
            sb.add(Formula::imply(Formula::rel(z, RelOp::Ge, Expr::number(0)),
                                  Formula::rel(*d, RelOp::Eq, Expr::number(1))));
            sb.add(Formula::imply(Formula::rel(z, RelOp::Lt, Expr::number(0)),
                                  Formula::rel(*d, RelOp::Eq, Expr::number(0))));
          }
          break;
        case ActKind::Hardtanh: {
          const Expr clip = Expr::binary(ExprKind::Max, Expr::number(-1),
                                         Expr::binary(ExprKind::Min, Expr::number(1), z));
          sb.add(Formula::rel(a, RelOp::Eq, act.c == 1 ? clip : Expr::number(act.c) * clip));
          if (d) {
            sb.add(Formula::imply(Formula::group(Formula::Kind::And,
                                                 {Formula::rel(z, RelOp::Ge, Expr::number(-1)),
                                                  Formula::rel(z, RelOp::Le, Expr::number(1))}),
                                  Formula::rel(*d, RelOp::Eq, Expr::number(act.c))));
            sb.add(Formula::imply(Formula::group(Formula::Kind::Or,
                                                 {Formula::rel(z, RelOp::Lt, Expr::number(-1)),
                                                  Formula::rel(z, RelOp::Gt, Expr::number(1))}),
                                  Formula::rel(*d, RelOp::Eq, Expr::number(0))));
          }
          break;
        }
        case ActKind::BentReLU: {
          const PwlBentRelu pwl = pwl_bent_relu(widen(zr), segments);
          for (const auto& s : pwl.segments) {
            std::vector<Formula> then{
                Formula::rel(a, RelOp::Le, Expr::number(s.up_slope) * z + Expr::number(s.up_icpt)),
                Formula::rel(a, RelOp::Ge, Expr::number(s.lo_slope) * z + Expr::number(s.lo_icpt))};
            if (d) {
              then.push_back(Formula::rel(*d, RelOp::Ge, Expr::number(s.d_lo)));
              then.push_back(Formula::rel(*d, RelOp::Le, Expr::number(s.d_hi)));
            }
            sb.add(Formula::imply(Formula::group(Formula::Kind::And,
                                                 {Formula::rel(z, RelOp::Ge, Expr::number(s.x0)),
                                                  Formula::rel(z, RelOp::Le, Expr::number(s.x1))}),
                                  Formula::group(Formula::Kind::And, std::move(then))));
          }
          break;
        }
      }
      nxt.push_back(a);
      nxt_range.push_back(ar);
    }
    cur = std::move(nxt);
    in_range = std::move(nxt_range);
  }
  enc.outputs = std::move(cur);
  return enc;
}

// Input gradient of a single-output network from its derivative variables.
inline std::vector<Expr> encode_grad(const Mlp& net, const EncodedNet& enc) {
  const auto& dims = net.dims();
  const std::size_t L = net.num_layers();
  // delta for the output layer: identity output has derivative 1
  std::vector<std::optional<Expr>> delta(1);
  if (net.output().kind != ActKind::Identity) delta[0] = enc.deriv[L - 1][0];
  auto times = [](const std::optional<Expr>& a, Expr b) { return a ? *a * b : b; };
  for (std::size_t l = L - 1; l-- > 0;) {
    std::vector<std::optional<Expr>> d;
    for (int j = 0; j < dims[l + 1]; ++j) {
      std::optional<Expr> s;
      for (int i = 0; i < dims[l + 2]; ++i) {
        const double w = net.W(l + 1, i, j);
        if (w == 0) continue;
        Expr t = delta[i] ? Expr::number(w) * *delta[i] : Expr::number(w);
        s = s ? *s + t : t;
      }
      if (!s) {
        d.push_back(Expr::number(0));
      } else {
        d.push_back(times(Expr(enc.deriv[l][j]), *s));
      }
    }
    delta = std::move(d);
  }
  std::vector<Expr> g;
  for (int k = 0; k < dims[0]; ++k) {
    std::optional<Expr> s;
    for (int i = 0; i < dims[1]; ++i) {
      const double w = net.W(0, i, k);
      if (w == 0) continue;
      Expr t = delta[i] ? Expr::number(w) * *delta[i] : Expr::number(w);
      s = s ? *s + t : t;
    }
    g.push_back(s ? *s : Expr::number(0));
  }
  return g;
}

inline Formula box_membership(const BoxRegion& b, const std::vector<Expr>& x) {
  std::vector<Formula> xs;
  for (std::size_t i = 0; i < b.size(); ++i) {
    xs.push_back(Formula::rel(x[i], RelOp::Ge, Expr::number(b[i].lo)));
    xs.push_back(Formula::rel(x[i], RelOp::Le, Expr::number(b[i].hi)));
  }
  return Formula::group(Formula::Kind::And, std::move(xs));
}

}  // namespace detail

/// Script asserting one disjunct of the negated barrier conditions; the
/// conditions are certified when every script is unsatisfiable.
inline IsatScript emit_isat(const Ccds& sys, const Mlp& nc, const Mlp& nb, Condition cond, int segments = 64) {
  if (segments < 1) throw std::invalid_argument("segments must be positive");
  detail::ScriptBuilder sb;
  const BoxRegion& dom = sys.domain.bounding_box();
  std::vector<Expr> x;
  for (int i = 0; i < sys.n(); ++i) {
    sb.declare(sys.state_vars[i], dom[i]);
    x.push_back(sb.var(sys.state_vars[i]));
  }

  const detail::EncodedNet bn = detail::encode_net(nb, "nn_b", x, dom.dims, segments, cond == Condition::Lie, sb);
  const Expr B = bn.outputs[0];

  switch (cond) {
    case Condition::Init:
      sb.add(detail::box_membership(sys.init.bounding_box(), x));
      sb.add(Formula::rel(B, RelOp::Gt, Expr::number(0)));
      break;
    case Condition::Unsafe:
      if (sys.unsafe.kind() == Region::Kind::Box) {
        sb.add(detail::box_membership(sys.unsafe.bounding_box(), x));
      } else {
        sb.add(detail::box_membership(sys.unsafe.bounding_box(), x));
        std::vector<Formula> outside;
        const BoxRegion& in = sys.unsafe.inner();
        for (int i = 0; i < sys.n(); ++i) {
          outside.push_back(Formula::rel(x[i], RelOp::Le, Expr::number(in[i].lo)));
          outside.push_back(Formula::rel(x[i], RelOp::Ge, Expr::number(in[i].hi)));
        }
        sb.add(Formula::group(Formula::Kind::Or, std::move(outside)));
      }
      sb.add(Formula::rel(B, RelOp::Le, Expr::number(0)));
      break;
    case Condition::Lie: {
      const std::vector<Interval> u_range = forward<Interval>(nc, dom.dims);
      const detail::EncodedNet cn = detail::encode_net(nc, "nn_c", x, dom.dims, segments, false, sb);
      std::vector<Expr> u;
      for (int j = 0; j < sys.m(); ++j) {
        sb.declare(sys.input_vars[j], detail::widen(u_range[j]));
        u.push_back(sb.var(sys.input_vars[j]));
        sb.add(Formula::rel(u[j], RelOp::Eq, cn.outputs[j]));
      }
      std::vector<Interval> env_range(dom.dims);
      for (const auto& r : u_range) env_range.push_back(detail::widen(r));
      auto bind = [&](int slot) { return slot < sys.n() ? x[slot] : u[slot - sys.n()]; };
      auto range = [&](const Expr& e) { return evaluate<Interval>(e, env_range); };
      int aux = 0;
      const std::vector<Expr> g = detail::encode_grad(nb, bn);
      std::optional<Expr> lie;
      for (int i = 0; i < sys.n(); ++i) {
        const Expr fi = detail::lower_expr(sys.f[i], bind, range, sb, aux);
        const Expr t = g[i] * fi;
        lie = lie ? *lie + t : t;
      }
      sb.add(Formula::rel(B, RelOp::Eq, Expr::number(0)));
      sb.add(Formula::rel(*lie, RelOp::Ge, Expr::number(0)));
      break;
    }
  }
  return sb.take();
}

inline std::string script_file_name(Condition c) { return std::string("condition_") + condition_name(c) + ".hys"; }

}  // namespace nnbc
