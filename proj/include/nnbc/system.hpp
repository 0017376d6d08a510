#pragma once

// Controlled constrained continuous dynamical systems: x' = f(x, u) with
// u = N_c(x), a box domain, an initial region and an unsafe region.

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nnbc/error.hpp"
#include "nnbc/expr.hpp"
#include "nnbc/interval.hpp"
#include "nnbc/nn.hpp"

namespace nnbc {

/// Either a box or the part of an outer box outside the open interior of an
/// inner box.
class Region {
 public:
  enum class Kind { Box, ComplementWithin };

  Region() = default;

  static Region box(BoxRegion b) {
    Region r;
    r.outer_ = std::move(b);
    return r;
  }

  static Region complement_within(BoxRegion outer, BoxRegion inner) {
    if (outer.size() != inner.size()) throw ShapeError("complement region dimension mismatch");
    for (std::size_t i = 0; i < outer.size(); ++i) {
      if (!(outer[i].lo < inner[i].lo && inner[i].hi < outer[i].hi)) {
        throw std::invalid_argument("inner box must lie strictly inside the outer box");
      }
    }
    Region r;
    r.kind_ = Kind::ComplementWithin;
    r.outer_ = std::move(outer);
    r.inner_ = std::move(inner);
    return r;
  }

  Kind kind() const { return kind_; }
  std::size_t dim() const { return outer_.size(); }
  const BoxRegion& bounding_box() const { return outer_; }
  const BoxRegion& inner() const { return inner_; }

  bool contains(std::span<const double> x) const {
    if (!outer_.contains(x)) return false;
    if (kind_ == Kind::Box) return true;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!(inner_[i].lo < x[i] && x[i] < inner_[i].hi)) return true;
    }
    return false;
  }

  /// Closed boxes whose union is the region: the box itself, or the 2n face
  /// slabs of outer minus the inner interior (slabs overlap at the corners).
  std::vector<BoxRegion> cover() const {
    if (kind_ == Kind::Box) return {outer_};
    std::vector<BoxRegion> out;
    for (std::size_t i = 0; i < dim(); ++i) {
      BoxRegion low = outer_, high = outer_;
      low[i] = Interval(outer_[i].lo, inner_[i].lo);
      high[i] = Interval(inner_[i].hi, outer_[i].hi);
      out.push_back(std::move(low));
      out.push_back(std::move(high));
    }
    return out;
  }

 private:
  Kind kind_ = Kind::Box;
  BoxRegion outer_;
  BoxRegion inner_;
};

struct Ccds {
  std::string name;
  std::vector<std::string> state_vars;
  std::vector<std::string> input_vars;
  std::vector<Expr> f;  // over state_vars ++ input_vars (slots 0..n-1, n..n+m-1)
  Region domain;
  Region init;
  Region unsafe;
  std::optional<std::vector<double>> equilibrium;
  std::string source;  // system file text

  int n() const { return static_cast<int>(state_vars.size()); }
  int m() const { return static_cast<int>(input_vars.size()); }

  /// Open-loop field at (x, u).
  template <class S>
  std::vector<S> field(std::span<const S> x, std::span<const S> u) const {
    if (x.size() != state_vars.size() || u.size() != input_vars.size()) {
      throw ShapeError("field argument dimension mismatch");
    }
    std::vector<S> env(x.begin(), x.end());
    env.insert(env.end(), u.begin(), u.end());
    std::vector<S> out;
    out.reserve(f.size());
    for (const Expr& e : f) out.push_back(evaluate<S>(e, env));
    return out;
  }
};

/// The closed loop x' = f(x, N_c(x)).
class ClosedLoop {
 public:
  ClosedLoop(const Ccds& sys, const Mlp& controller) : sys_(&sys), nc_(&controller) {
    if (controller.input_dim() != sys.n() || controller.output_dim() != sys.m()) {
      throw ShapeError("controller dimensions do not match the system");
    }
  }

  template <class S>
  std::vector<S> operator()(std::span<const S> x) const {
    const std::vector<S> u = forward<S>(*nc_, x);
    return sys_->field<S>(x, u);
  }

  std::vector<double> operator()(std::span<const double> x) const { return operator()<double>(x); }

  /// Tape evaluation with controller parameters as leaves.
  std::vector<Var> record(std::span<const Var> x, std::span<const Var> theta) const {
    const std::vector<Var> u = forward_with<Var, Var>(*nc_, x, theta);
    return sys_->field<Var>(x, u);
  }

  const Ccds& system() const { return *sys_; }
  const Mlp& controller() const { return *nc_; }

 private:
  const Ccds* sys_;
  const Mlp* nc_;
};

inline ClosedLoop closed_loop_field(const Ccds& sys, const Mlp& controller) { return {sys, controller}; }

// ---------------------------------------------------------------------------
// System files

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Parses "v1 in [lo, hi] v2 in [lo, hi] ..." covering each state variable once.
inline BoxRegion parse_bounds(ExprParser& p, const std::vector<std::string>& state, int line) {
  std::vector<std::optional<Interval>> dims(state.size());
  while (!p.at_end()) {
    const Token name = p.expect(Tok::Ident, "a state variable");
    std::size_t slot = state.size();
    for (std::size_t i = 0; i < state.size(); ++i) {
      if (state[i] == name.text) slot = i;
    }
    if (slot == state.size()) throw UnboundIdentifier(name.text, name.line, name.column);
    if (dims[slot]) throw ParseError("duplicate bound for '" + name.text + "'", name.line, name.column);
    const Token kw = p.expect(Tok::Ident, "'in'");
    if (kw.text != "in") throw ParseError("expected 'in'", kw.line, kw.column);
    p.expect(Tok::LBracket, "'['");
    const Token& lo_tok = p.peek();
    const double lo = eval(p.parse_expression(), {});
    p.expect(Tok::Comma, "','");
    const double hi = eval(p.parse_expression(), {});
    p.expect(Tok::RBracket, "']'");
    if (!(lo <= hi)) throw ParseError("empty bound for '" + name.text + "'", lo_tok.line, lo_tok.column);
    dims[slot] = Interval(lo, hi);
  }
  std::vector<Interval> out;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (!dims[i]) throw ParseError("missing bound for '" + state[i] + "'", line, 1);
    out.push_back(*dims[i]);
  }
  return BoxRegion(std::move(out));
}

}  // namespace detail

inline Ccds parse_system(const std::string& text) {
  Ccds sys;
  sys.source = text;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  bool in_dynamics = false;
  std::map<std::string, Expr> dyn;
  std::optional<BoxRegion> domain, init_box, unsafe_box;
  bool unsafe_complement = false;
  int unsafe_line = 0;

  auto words_of = [](const std::string& s) {
    std::istringstream ls(s);
    std::vector<std::string> w;
    for (std::string x; ls >> x;) w.push_back(x);
    return w;
  };

  while (std::getline(in, raw)) {
    ++line;
    if (auto h = raw.find('#'); h != std::string::npos) raw.resize(h);
    const std::string body = detail::trim(raw);
    if (body.empty()) continue;
    const auto words = words_of(body);
    const std::string& key = words[0];
    const int col = static_cast<int>(raw.find(key)) + 1;
    const std::size_t rest_at = raw.find(key) + key.size();
    const std::string rest = raw.substr(rest_at);

    if (in_dynamics && key.find('\'') != std::string::npos) {
      const auto eq = raw.find('=');
      if (eq == std::string::npos) throw ParseError("expected '=' in dynamics equation", line, col);
      const std::string lhs = detail::trim(raw.substr(0, eq));
      if (lhs.size() < 2 || lhs.back() != '\'') throw ParseError("expected \"name' = expr\"", line, col);
      const std::string var = detail::trim(lhs.substr(0, lhs.size() - 1));
      if (std::find(sys.state_vars.begin(), sys.state_vars.end(), var) == sys.state_vars.end()) {
        throw UnboundIdentifier(var, line, col);
      }
      if (dyn.count(var)) throw ParseError("duplicate equation for '" + var + "'", line, col);
      std::vector<std::string> vars = sys.state_vars;
      vars.insert(vars.end(), sys.input_vars.begin(), sys.input_vars.end());
      dyn.emplace(var, parse_expr(raw.substr(eq + 1), vars, line, static_cast<int>(eq) + 2));
      continue;
    }
    in_dynamics = false;

    auto bounds = [&](const std::string& s, int at) {
      ExprParser p(tokenize(s, line, at), {});
      return detail::parse_bounds(p, sys.state_vars, line);
    };

    if (key == "system") {
      if (words.size() != 2) throw ParseError("expected 'system <name>'", line, col);
      sys.name = words[1];
    } else if (key == "state" || key == "input") {
      if (words.size() < 2) throw ParseError("expected at least one variable", line, col);
      auto& dst = key == "state" ? sys.state_vars : sys.input_vars;
      if (!dst.empty()) throw ParseError("duplicate '" + key + "' line", line, col);
      for (std::size_t i = 1; i < words.size(); ++i) {
        const auto toks = tokenize(words[i], line, col);
        if (toks.size() != 2 || toks[0].kind != Tok::Ident || words[i] == "pi") {
          throw ParseError("invalid variable name '" + words[i] + "'", line, col);
        }
        dst.push_back(words[i]);
      }
    } else if (key == "dynamics") {
      if (sys.state_vars.empty()) throw ParseError("'dynamics' before 'state'", line, col);
      in_dynamics = true;
    } else if (key == "domain" || key == "init") {
      if (words.size() < 2 || words[1] != "box") throw ParseError("expected 'box'", line, col);
      const std::size_t at = rest.find("box") + 3;
      (key == "domain" ? domain : init_box) = bounds(rest.substr(at), static_cast<int>(rest_at + at) + 1);
    } else if (key == "unsafe") {
      std::size_t at = 0;
      if (words.size() >= 3 && words[1] == "complement" && words[2] == "box") {
        unsafe_complement = true;
        at = rest.find("box") + 3;
      } else if (words.size() >= 2 && words[1] == "box") {
        at = rest.find("box") + 3;
      } else {
        throw ParseError("expected 'box' or 'complement box'", line, col);
      }
      unsafe_box = bounds(rest.substr(at), static_cast<int>(rest_at + at) + 1);
      unsafe_line = line;
    } else if (key == "equilibrium") {
      std::vector<double> eq;
      ExprParser p(tokenize(rest, line, static_cast<int>(rest_at) + 1), {});
      while (!p.at_end()) eq.push_back(eval(p.parse_expression(), {}));
      if (eq.size() != sys.state_vars.size()) throw ParseError("equilibrium dimension mismatch", line, col);
      sys.equilibrium = eq;
    } else {
      throw ParseError("unknown keyword '" + key + "'", line, col);
    }
  }

  const int end = line + 1;
  if (sys.state_vars.empty()) throw ParseError("missing section 'state'", end, 1);
  if (dyn.size() != sys.state_vars.size()) throw ParseError("missing section 'dynamics' equations", end, 1);
  if (!domain) throw ParseError("missing section 'domain'", end, 1);
  if (!init_box) throw ParseError("missing section 'init'", end, 1);
  if (!unsafe_box) throw ParseError("missing section 'unsafe'", end, 1);
  for (const auto& v : sys.state_vars) sys.f.push_back(dyn.at(v));

  sys.domain = Region::box(*domain);
  sys.init = Region::box(*init_box);
  if (unsafe_complement) {
    try {
      sys.unsafe = Region::complement_within(*domain, *unsafe_box);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), unsafe_line, 1);
    }
  } else {
    sys.unsafe = Region::box(*unsafe_box);
  }
  if (!domain->contains(*init_box)) throw ParseError("init region is not inside the domain", end, 1);
  if (!domain->contains(sys.unsafe.bounding_box())) throw ParseError("unsafe region is not inside the domain", end, 1);
  if (sys.equilibrium && !domain->contains(*sys.equilibrium)) {
    throw ParseError("equilibrium is not inside the domain", end, 1);
  }
  return sys;
}

inline Ccds load_system(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open system file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_system(ss.str());
}

// ---------------------------------------------------------------------------
// Benchmarks

inline const std::map<std::string, std::string>& builtin_sources() {
  static const std::map<std::string, std::string> kSources = {
      {"dubins", R"(system dubins
# car with unit speed tracking a straight line
state d_e theta_e
input u
dynamics
  d_e'     = sin(theta_e)
  theta_e' = -u
domain  box d_e in [-6, 6]  theta_e in [-0.7*pi, 0.7*pi]
init    box d_e in [-1, 1]  theta_e in [-pi/16, pi/16]
unsafe  complement box d_e in [-5, 5]  theta_e in [-pi/2, pi/2]
equilibrium 0 0
)"},
      {"pendulum", R"(system pendulum
# inverted pendulum, m = l = 1, g = 9.8, cubic Taylor model of sin
state theta omega
input u
dynamics
  theta' = omega
  omega' = 9.8*(theta - theta^3/6) + u
domain  box theta in [-pi/2, pi/2]  omega in [-pi/2, pi/2]
init    box theta in [-pi/9, pi/9]  omega in [-pi/9, pi/9]
unsafe  complement box theta in [-pi/6, pi/6]  omega in [-pi/6, pi/6]
equilibrium 0 0
)"},
      {"duffing", R"(system duffing
state x y
input u
dynamics
  x' = y
  y' = -0.6*y - x - x^3 + u
domain  box x in [-6, 6]  y in [-6, 6]
init    box x in [-2.5, 2.5]  y in [-2, 2]
unsafe  complement box x in [-5, 5]  y in [-5, 5]
equilibrium 0 0
)"},
      {"bicycle", R"(system bicycle
# transformed steering model; u is the transformed input
state x1 x2 x3
input u
dynamics
  x1' = x2
  x2' = 30*sin(x1) + 15*u*cos(x1)
  x3' = u*cos(x3)^2 - 20*cos(x3)*sin(x3)
domain  box x1 in [-2.2, 2.2]  x2 in [-2.2, 2.2]  x3 in [-2.2, 2.2]
init    box x1 in [-0.2, 0.2]  x2 in [-0.2, 0.2]  x3 in [-0.2, 0.2]
unsafe  complement box x1 in [-2, 2]  x2 in [-2, 2]  x3 in [-2, 2]
equilibrium 0 0 0
)"},
      {"academic3d", R"(system academic3d
state x1 x2 x3
input u
dynamics
  x1' = x3 + 8*x2
  x2' = -x2 + x3
  x3' = -x3 - x1^2 + u
domain  box x1 in [-2.2, 2.2]  x2 in [-2.2, 2.2]  x3 in [-2.2, 2.2]
init    box x1 in [-0.2, 0.2]  x2 in [-0.2, 0.2]  x3 in [-0.2, 0.2]
unsafe  complement box x1 in [-2, 2]  x2 in [-2, 2]  x3 in [-2, 2]
equilibrium 0 0 0
)"},
  };
  return kSources;
}

inline std::vector<std::string> builtin_names() {
  return {"dubins", "pendulum", "duffing", "bicycle", "academic3d"};
}

inline Ccds builtin(const std::string& name) {
  const auto& src = builtin_sources();
  const auto it = src.find(name);
  if (it == src.end()) throw std::invalid_argument("unknown builtin system '" + name + "'");
  return parse_system(it->second);
}

}  // namespace nnbc
