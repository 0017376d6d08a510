#pragma once

// Reverse-mode automatic differentiation over an append-only scalar tape.
//
// Two reverse sweeps are provided:
//   * Tape::grad       numeric adjoints of one seed w.r.t. every node;
//   * Tape::grad_nodes records the adjoints themselves as new tape nodes, so
//                      input gradients (e.g. grad_x N_b) stay differentiable
//                      w.r.t. the parameters for a later numeric sweep.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nnbc/error.hpp"
#include "nnbc/expr.hpp"
#include "nnbc/scalar.hpp"

namespace nnbc {

enum class Op : std::uint8_t {
  Const, Param, Input, Add, Sub, Mul, Div, Neg, Sin, Cos, Tan, Sqrt, Max, Min, Abs, Square,
};

struct TapeNode {
  Op op = Op::Const;
  int a = -1;
  int b = -1;
  double value = 0;
};

/// Smallest denominator magnitude a recorded division accepts.
inline constexpr double kDivGuard = 1e-12;

class Tape;

/// Handle to a tape node.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  double value() const;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  void reserve(std::size_t n) { nodes_.reserve(n); }
  std::size_t size() const { return nodes_.size(); }
  const TapeNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  double value(int i) const { return nodes_[static_cast<std::size_t>(i)].value; }

  Var constant(double v) { return push(Op::Const, -1, -1, v); }
  Var param(double v) { return push(Op::Param, -1, -1, v); }
  Var input(double v) { return push(Op::Input, -1, -1, v); }

  Var push(Op op, int a, int b, double v) {
    if (!std::isfinite(v)) throw NonFiniteError("non-finite value recorded on tape");
    nodes_.push_back(TapeNode{op, a, b, v});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
  }

  Var unary(Op op, Var x) {
    const double v = x.value();
    double r = 0;
    switch (op) {
      case Op::Neg: r = -v; break;
      case Op::Sin: r = std::sin(v); break;
      case Op::Cos: r = std::cos(v); break;
      case Op::Tan:
        if (near_tan_pole(v)) throw DomainError("tan evaluated at a pole");
        r = std::tan(v);
        break;
      case Op::Sqrt:
        if (v < 0) throw DomainError("sqrt of negative value");
        r = std::sqrt(v);
        break;
      case Op::Abs: r = std::fabs(v); break;
      case Op::Square: r = v * v; break;
      default: throw std::logic_error("not a unary tape op");
    }
    return push(op, x.id, -1, r);
  }

  Var binary(Op op, Var x, Var y) {
    const double a = x.value(), b = y.value();
    double r = 0;
    switch (op) {
      case Op::Add: r = a + b; break;
      case Op::Sub: r = a - b; break;
      case Op::Mul: r = a * b; break;
      case Op::Div:
        if (std::fabs(b) < kDivGuard) throw DomainError("division by a value below the 1e-12 guard");
        r = a / b;
        break;
      case Op::Max: r = a > b ? a : b; break;
      case Op::Min: r = a < b ? a : b; break;
      default: throw std::logic_error("not a binary tape op");
    }
    return push(op, x.id, y.id, r);
  }

  /// Numeric reverse sweep: adj[i] = d(seed)/d(node i) for i <= seed.
  std::vector<double> grad(int seed) const {
    std::vector<double> adj(static_cast<std::size_t>(seed) + 1, 0.0);
    adj[seed] = 1.0;
    for (int i = seed; i >= 0; --i) {
      const double g = adj[i];
      if (g == 0) continue;
      const TapeNode& n = nodes_[i];
      switch (n.op) {
        case Op::Const:
        case Op::Param:
        case Op::Input: break;
        case Op::Add:
          adj[n.a] += g;
          adj[n.b] += g;
          break;
        case Op::Sub:
          adj[n.a] += g;
          adj[n.b] -= g;
          break;
        case Op::Mul:
          adj[n.a] += g * value(n.b);
          adj[n.b] += g * value(n.a);
          break;
        case Op::Div:
          adj[n.a] += g / value(n.b);
          adj[n.b] -= g * n.value / value(n.b);
          break;
        case Op::Neg: adj[n.a] -= g; break;
        case Op::Sin: adj[n.a] += g * std::cos(value(n.a)); break;
        case Op::Cos: adj[n.a] -= g * std::sin(value(n.a)); break;
        case Op::Tan: adj[n.a] += g * (1 + n.value * n.value); break;
        case Op::Sqrt:
          // sqrt'(0) is taken as 0, matching Abs'(0) = 0.
          if (n.value > 0) adj[n.a] += g / (2 * n.value);
          break;
        case Op::Max: adj[value(n.a) > value(n.b) ? n.a : n.b] += g; break;
        case Op::Min: adj[value(n.a) < value(n.b) ? n.a : n.b] += g; break;
        case Op::Abs:
          if (value(n.a) > 0) adj[n.a] += g;
          else if (value(n.a) < 0) adj[n.a] -= g;
          break;
        case Op::Square: adj[n.a] += 2 * g * value(n.a); break;
      }
    }
    return adj;
  }

  /// Symbolic reverse sweep restricted to nodes in [lo, seed]: records the
  /// adjoint d(seed)/d(w) of every w in `wrt` as tape nodes. Nodes below `lo`
  /// (typically parameter leaves) are treated as constants of the sweep.
  std::vector<Var> grad_nodes(Var seed, int lo, std::span<const Var> wrt);

 private:
  std::vector<TapeNode> nodes_;
};

inline double Var::value() const { return tape->value(id); }
inline double value(const Var& v) { return v.value(); }

namespace detail {
inline Tape* common_tape(const Var& a, const Var& b) {
  if (a.tape != b.tape) throw std::logic_error("operands recorded on different tapes");
  return a.tape;
}
}  // namespace detail

inline Var operator+(Var a, Var b) { return detail::common_tape(a, b)->binary(Op::Add, a, b); }
inline Var operator-(Var a, Var b) { return detail::common_tape(a, b)->binary(Op::Sub, a, b); }
inline Var operator*(Var a, Var b) { return detail::common_tape(a, b)->binary(Op::Mul, a, b); }
inline Var operator/(Var a, Var b) { return detail::common_tape(a, b)->binary(Op::Div, a, b); }
inline Var operator-(Var a) { return a.tape->unary(Op::Neg, a); }

inline Var operator+(double a, Var b) { return b.tape->constant(a) + b; }
inline Var operator+(Var a, double b) { return a + a.tape->constant(b); }
inline Var operator-(double a, Var b) { return b.tape->constant(a) - b; }
inline Var operator-(Var a, double b) { return a - a.tape->constant(b); }
inline Var operator*(double a, Var b) { return b.tape->constant(a) * b; }
inline Var operator*(Var a, double b) { return a * a.tape->constant(b); }
inline Var operator/(double a, Var b) { return b.tape->constant(a) / b; }
inline Var operator/(Var a, double b) { return a / a.tape->constant(b); }

inline Var& operator+=(Var& a, Var b) { return a = a + b; }

inline Var checked_div(Var a, Var b) { return a / b; }
inline Var sin(Var x) { return x.tape->unary(Op::Sin, x); }
inline Var cos(Var x) { return x.tape->unary(Op::Cos, x); }
inline Var tan(Var x) { return x.tape->unary(Op::Tan, x); }
inline Var sqrt(Var x) { return x.tape->unary(Op::Sqrt, x); }
inline Var abs(Var x) { return x.tape->unary(Op::Abs, x); }
inline Var square(Var x) { return x.tape->unary(Op::Square, x); }
inline Var max(Var a, Var b) { return detail::common_tape(a, b)->binary(Op::Max, a, b); }
inline Var min(Var a, Var b) { return detail::common_tape(a, b)->binary(Op::Min, a, b); }
inline Var max(double a, Var b) { return max(b.tape->constant(a), b); }
inline Var min(double a, Var b) { return min(b.tape->constant(a), b); }
inline Var step(Var u) { return u.tape->constant(u.value() > 0 ? 1.0 : 0.0); }

template <>
struct ScalarTraits<Var> {
  static Var constant(double v, std::span<const Var> anchor) {
    if (anchor.empty()) throw std::logic_error("cannot record a constant without a tape operand");
    return anchor[0].tape->constant(v);
  }
};

inline std::vector<Var> Tape::grad_nodes(Var seed, int lo, std::span<const Var> wrt) {
  const int hi = seed.id;
  std::vector<int> adj(static_cast<std::size_t>(hi - lo + 1), -1);
  const Var one = constant(1.0);
  adj[hi - lo] = one.id;
  auto acc = [&](int target, Var contrib) {
    if (target < lo) return;
    int& slot = adj[target - lo];
    slot = slot < 0 ? contrib.id : (Var{this, slot} + contrib).id;
  };
  for (int i = hi; i >= lo; --i) {
    const int gi = adj[i - lo];
    if (gi < 0) continue;
    const TapeNode n = nodes_[i];
    const Var g{this, gi};
    const Var self{this, i};
    const Var a{this, n.a};
    const Var b{this, n.b};
    auto times = [&](Var x) { return gi == one.id ? x : g * x; };
    switch (n.op) {
      case Op::Const:
      case Op::Param:
      case Op::Input: break;
      case Op::Add:
        acc(n.a, g);
        acc(n.b, g);
        break;
      case Op::Sub:
        acc(n.a, g);
        acc(n.b, -g);
        break;
      case Op::Mul:
        acc(n.a, times(b));
        acc(n.b, times(a));
        break;
      case Op::Div:
        acc(n.a, g / b);
        acc(n.b, -(times(self) / b));
        break;
      case Op::Neg: acc(n.a, -g); break;
      case Op::Sin: acc(n.a, times(cos(a))); break;
      case Op::Cos: acc(n.a, -times(sin(a))); break;
      case Op::Tan: acc(n.a, times(1.0 + square(self))); break;
      case Op::Sqrt: acc(n.a, g / (2.0 * self)); break;
      case Op::Max: acc(value(n.a) > value(n.b) ? n.a : n.b, g); break;
      case Op::Min: acc(value(n.a) < value(n.b) ? n.a : n.b, g); break;
      case Op::Abs:
        if (value(n.a) > 0) acc(n.a, g);
        else if (value(n.a) < 0) acc(n.a, -g);
        break;
      case Op::Square: acc(n.a, times(2.0 * a)); break;
    }
  }
  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    const int slot = (w.id >= lo && w.id <= hi) ? adj[w.id - lo] : -1;
    out.push_back(slot < 0 ? constant(0.0) : Var{this, slot});
  }
  return out;
}

/// A vector of expressions recorded at one point.
struct Recording {
  Tape tape;
  std::vector<Var> inputs;
  std::vector<Var> outputs;
};

/// Records `f` with input leaves bound to `point` (slot i <- point[i]).
inline Recording record(std::span<const Expr> f, std::span<const double> point) {
  Recording r;
  r.tape.reserve(64);
  for (double v : point) r.inputs.push_back(r.tape.input(v));
  for (const Expr& e : f) r.outputs.push_back(evaluate<Var>(e, r.inputs));
  return r;
}

}  // namespace nnbc
