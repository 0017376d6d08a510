#pragma once

// Fully connected feed-forward networks for the controller and the barrier.
//
// Forward evaluation is written once over the scalar type so the same code
// runs on doubles, on the autodiff tape (with parameters as tape leaves) and
// on intervals.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "nnbc/autodiff.hpp"
#include "nnbc/error.hpp"
#include "nnbc/interval.hpp"
#include "nnbc/scalar.hpp"

namespace nnbc {

enum class ActKind { Identity, ReLU, BentReLU, Hardtanh };

struct Activation {
  ActKind kind = ActKind::Identity;
  double c = 1;  // Hardtanh scale

  static Activation identity() { return {}; }
  static Activation relu() { return {ActKind::ReLU, 1}; }
  static Activation bent_relu() { return {ActKind::BentReLU, 1}; }
  static Activation hardtanh(double c) {
    if (!(c > 0)) throw std::invalid_argument("hardtanh scale must be positive");
    return {ActKind::Hardtanh, c};
  }

  friend bool operator==(const Activation&, const Activation&) = default;
};

inline constexpr double kBentEps = 1e-4;

template <class S>
S activate(const Activation& a, const S& x) {
  switch (a.kind) {
    case ActKind::Identity: return x;
    case ActKind::ReLU: return max(0.0, x);
    case ActKind::BentReLU:
      if constexpr (std::is_same_v<S, Interval>) {
        return iv_bent_relu(x);
      } else {
        return 0.5 * x + sqrt(0.25 * square(x) + kBentEps);
      }
    case ActKind::Hardtanh: return a.c * max(-1.0, min(1.0, x));
  }
  throw std::logic_error("unknown activation");
}

/// Derivative under the tie-to-second-operand convention: ReLU'(0) = 1 and
/// Hardtanh' = c on the closed interval [-1, 1].
inline double activate_deriv(const Activation& a, double x) {
  switch (a.kind) {
    case ActKind::Identity: return 1;
    case ActKind::ReLU: return x >= 0 ? 1 : 0;
    case ActKind::BentReLU: return 0.5 + 0.25 * x / std::sqrt(0.25 * x * x + kBentEps);
    case ActKind::Hardtanh: return (x >= -1 && x <= 1) ? a.c : 0;
  }
  throw std::logic_error("unknown activation");
}

inline Interval activate_deriv(const Activation& a, const Interval& x) {
  switch (a.kind) {
    case ActKind::Identity: return Interval(1.0);
    case ActKind::ReLU:
      if (x.lo >= 0) return Interval(1.0);
      if (x.hi < 0) return Interval(0.0);
      return {0.0, 1.0};
    case ActKind::BentReLU: return iv_bent_relu_deriv(x);
    case ActKind::Hardtanh:
      if (x.lo >= -1 && x.hi <= 1) return Interval(a.c);
      if (x.hi < -1 || x.lo > 1) return Interval(0.0);
      return {0.0, a.c};
  }
  throw std::logic_error("unknown activation");
}

inline std::string activation_name(const Activation& a) {
  switch (a.kind) {
    case ActKind::Identity: return "identity";
    case ActKind::ReLU: return "relu";
    case ActKind::BentReLU: return "bentrelu";
    case ActKind::Hardtanh: {
      std::ostringstream os;
      os << "hardtanh " << std::setprecision(17) << a.c;
      return os.str();
    }
  }
  return "?";
}

class Mlp {
 public:
  enum class Role { Controller, Barrier };

  Mlp() = default;
  Mlp(Role role, std::vector<int> dims, Activation hidden, Activation output)
      : role_(role), dims_(std::move(dims)), hidden_(hidden), output_(output) {
    if (dims_.size() < 2) throw ShapeError("network needs at least an input and an output layer");
    for (int d : dims_) {
      if (d < 1) throw ShapeError("layer widths must be positive");
    }
    std::size_t n = 0;
    for (std::size_t l = 1; l < dims_.size(); ++l) n += static_cast<std::size_t>(dims_[l]) * (dims_[l - 1] + 1);
    theta_.assign(n, 0.0);
  }

  Role role() const { return role_; }
  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::size_t num_layers() const { return dims_.size() - 1; }
  const Activation& hidden() const { return hidden_; }
  const Activation& output() const { return output_; }
  const Activation& activation(std::size_t layer) const {
    return layer + 1 == num_layers() ? output_ : hidden_;
  }

  /// Flat parameter vector: per layer, W row-major (d_l x d_{l-1}) then b.
  std::span<const double> params() const { return theta_; }
  std::span<double> params() { return theta_; }
  std::size_t num_params() const { return theta_.size(); }

  void set_params(std::span<const double> p) {
    if (p.size() != theta_.size()) throw ShapeError("parameter count mismatch");
    theta_.assign(p.begin(), p.end());
  }

  /// Offset of layer l's weight block (l is 0-based over weight layers).
  std::size_t weight_offset(std::size_t l) const {
    std::size_t off = 0;
    for (std::size_t k = 0; k < l; ++k) off += static_cast<std::size_t>(dims_[k + 1]) * (dims_[k] + 1);
    return off;
  }
  std::size_t bias_offset(std::size_t l) const {
    return weight_offset(l) + static_cast<std::size_t>(dims_[l + 1]) * dims_[l];
  }

  double& W(std::size_t l, int row, int col) { return theta_[weight_offset(l) + row * dims_[l] + col]; }
  double W(std::size_t l, int row, int col) const { return theta_[weight_offset(l) + row * dims_[l] + col]; }
  double& b(std::size_t l, int row) { return theta_[bias_offset(l) + row]; }
  double b(std::size_t l, int row) const { return theta_[bias_offset(l) + row]; }

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  Role role_ = Role::Controller;
  std::vector<int> dims_;
  Activation hidden_;
  Activation output_;
  std::vector<double> theta_;
};

inline Mlp default_controller(int n, int m, int hidden = 5, double bound = 0) {
  return Mlp(Mlp::Role::Controller, {n, hidden, m}, Activation::relu(),
             bound > 0 ? Activation::hardtanh(bound) : Activation::identity());
}

inline Mlp default_barrier(int n, int hidden = 10) {
  return Mlp(Mlp::Role::Barrier, {n, hidden, 1}, Activation::bent_relu(), Activation::identity());
}

/// Forward pass with an explicit flat parameter vector; T is double or the
/// scalar type itself (tape leaves).
template <class S, class T>
std::vector<S> forward_with(const Mlp& net, std::span<const S> x, std::span<const T> theta) {
  if (x.size() != static_cast<std::size_t>(net.input_dim())) throw ShapeError("network input dimension mismatch");
  if (theta.size() != net.num_params()) throw ShapeError("parameter count mismatch");
  const auto& dims = net.dims();
  std::vector<S> cur(x.begin(), x.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l], out = dims[l + 1];
    const std::size_t boff = off + static_cast<std::size_t>(out) * in;
    std::vector<S> nxt;
    nxt.reserve(out);
    for (int i = 0; i < out; ++i) {
      S z = S(theta[boff + i]);
      for (int j = 0; j < in; ++j) z = z + theta[off + static_cast<std::size_t>(i) * in + j] * cur[j];
      nxt.push_back(activate(net.activation(l), z));
    }
    cur = std::move(nxt);
    off = boff + out;
  }
  return cur;
}

template <class S>
std::vector<S> forward(const Mlp& net, std::span<const S> x) {
  return forward_with<S, double>(net, x, net.params());
}

inline std::vector<double> forward(const Mlp& net, std::span<const double> x) {
  return forward_with<double, double>(net, x, net.params());
}

/// Scalar output of a single-output network.
template <class S>
S forward1(const Mlp& net, std::span<const S> x) {
  if (net.output_dim() != 1) throw ShapeError("network must have a single output");
  return forward<S>(net, x)[0];
}

/// Chain-rule gradient of a single-output network w.r.t. its inputs, over
/// double or Interval.
template <class S>
std::vector<S> input_grad(const Mlp& net, std::span<const S> x) {
  if (net.output_dim() != 1) throw ShapeError("input gradient needs a single-output network");
  if (x.size() != static_cast<std::size_t>(net.input_dim())) throw ShapeError("network input dimension mismatch");
  const auto& dims = net.dims();
  const std::size_t L = net.num_layers();
  std::vector<std::vector<S>> pre(L);  // pre-activations per layer
  std::vector<S> cur(x.begin(), x.end());
  for (std::size_t l = 0; l < L; ++l) {
    const int in = dims[l], out = dims[l + 1];
    std::vector<S> nxt;
    for (int i = 0; i < out; ++i) {
      S z = S(net.b(l, i));
      for (int j = 0; j < in; ++j) z = z + net.W(l, i, j) * cur[j];
      pre[l].push_back(z);
      nxt.push_back(activate(net.activation(l), z));
    }
    cur = std::move(nxt);
  }
  // delta[i] = d out / d pre[l][i]
  std::vector<S> delta{S(activate_deriv(net.activation(L - 1), pre[L - 1][0]))};
  for (std::size_t l = L - 1; l-- > 0;) {
    std::vector<S> d;
    for (int j = 0; j < dims[l + 1]; ++j) {
      S s = S(0.0);
      for (int i = 0; i < dims[l + 2]; ++i) s = s + net.W(l + 1, i, j) * delta[i];
      d.push_back(activate_deriv(net.activation(l), pre[l][j]) * s);
    }
    delta = std::move(d);
  }
  std::vector<S> g;
  for (int k = 0; k < dims[0]; ++k) {
    S s = S(0.0);
    for (int i = 0; i < dims[1]; ++i) s = s + net.W(0, i, k) * delta[i];
    g.push_back(s);
  }
  return g;
}

inline Interval iv_net(const Mlp& net, const BoxRegion& box) { return forward1<Interval>(net, box.dims); }
inline std::vector<Interval> iv_net_grad(const Mlp& net, const BoxRegion& box) {
  return input_grad<Interval>(net, box.dims);
}

/// Parameters of a network recorded as tape leaves.
inline std::vector<Var> record_params(Tape& tape, const Mlp& net) {
  std::vector<Var> p;
  p.reserve(net.num_params());
  for (double v : net.params()) p.push_back(tape.param(v));
  return p;
}

/// Barrier output and its input gradient as differentiable tape nodes. The
/// gradient nodes are produced by a symbolic reverse sweep over the forward
/// subgraph, so a later numeric sweep through them carries the mixed second
/// derivatives d(grad_x N)/d(theta).
struct NetWithGrad {
  Var out;
  std::vector<Var> grad;
};

inline NetWithGrad input_gradient_subgraph(const Mlp& net, std::span<const Var> x,
                                           std::span<const Var> theta) {
  if (x.empty()) throw ShapeError("empty input");
  Tape& tape = *x[0].tape;
  const int lo = static_cast<int>(tape.size());
  // Fresh input aliases give the sweep a lower bound that excludes the
  // parameter leaves and the caller's input nodes.
  std::vector<Var> xin;
  for (const Var& xi : x) xin.push_back(xi + 0.0);
  const Var out = forward_with<Var, Var>(net, xin, theta)[0];
  auto grad = tape.grad_nodes(out, lo, xin);
  return {out, std::move(grad)};
}

/// Weights ~ N(0, 1/fan_in), biases ~ N(0, 0.01^2).
inline void init_gaussian(Mlp& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const auto& dims = net.dims();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    for (int i = 0; i < dims[l + 1]; ++i) {
      for (int j = 0; j < dims[l]; ++j) net.W(l, i, j) = sd * unit(rng);
    }
    for (int i = 0; i < dims[l + 1]; ++i) net.b(l, i) = 0.01 * unit(rng);
  }
}

// ---------------------------------------------------------------------------
// Model files

inline std::string save_string(const Mlp& net) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "network " << (net.role() == Mlp::Role::Controller ? "controller" : "barrier") << '\n';
  os << "dims";
  for (int d : net.dims()) os << ' ' << d;
  os << '\n';
  os << "activation hidden " << activation_name(net.hidden()) << '\n';
  os << "activation output " << activation_name(net.output()) << '\n';
  const auto& dims = net.dims();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    os << "W " << l + 1 << '\n';
    for (int i = 0; i < dims[l + 1]; ++i) {
      for (int j = 0; j < dims[l]; ++j) os << (j ? " " : "") << net.W(l, i, j);
      os << '\n';
    }
    os << "b " << l + 1 << '\n';
    for (int i = 0; i < dims[l + 1]; ++i) os << net.b(l, i) << '\n';
  }
  return os.str();
}

namespace detail {

struct LineReader {
  std::vector<std::vector<std::string>> lines;
  std::vector<int> numbers;
  std::size_t pos = 0;

  explicit LineReader(std::istream& in) {
    std::string raw;
    int no = 0;
    while (std::getline(in, raw)) {
      ++no;
      if (auto h = raw.find('#'); h != std::string::npos) raw.resize(h);
      std::istringstream ls(raw);
      std::vector<std::string> words;
      for (std::string w; ls >> w;) words.push_back(w);
      if (words.empty()) continue;
      lines.push_back(std::move(words));
      numbers.push_back(no);
    }
  }

  int line_no() const { return pos < numbers.size() ? numbers[pos] : (numbers.empty() ? 0 : numbers.back() + 1); }

  const std::vector<std::string>& need(const std::string& section) {
    if (pos >= lines.size()) throw ParseError("missing section '" + section + "'", line_no(), 1);
    return lines[pos++];
  }
};

inline double parse_double(const std::string& s, int line) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError("invalid number '" + s + "'", line, 1);
  }
  return v;
}

inline Activation parse_activation(const std::vector<std::string>& w, int line) {
  if (w.size() < 3) throw ParseError("incomplete activation line", line, 1);
  const std::string& k = w[2];
  if (k == "identity" && w.size() == 3) return Activation::identity();
  if (k == "relu" && w.size() == 3) return Activation::relu();
  if (k == "bentrelu" && w.size() == 3) return Activation::bent_relu();
  if (k == "hardtanh" && w.size() == 4) {
    const double c = parse_double(w[3], line);
    if (!(c > 0)) throw ParseError("hardtanh scale must be positive", line, 1);
    return Activation::hardtanh(c);
  }
  throw ParseError("unknown activation '" + k + "'", line, 1);
}

}  // namespace detail

inline Mlp load_mlp(std::istream& in) {
  detail::LineReader r(in);
  const auto& head = r.need("network");
  if (head.size() != 2 || head[0] != "network" || (head[1] != "controller" && head[1] != "barrier")) {
    throw ParseError("expected 'network controller|barrier'", r.numbers[r.pos - 1], 1);
  }
  const auto role = head[1] == "controller" ? Mlp::Role::Controller : Mlp::Role::Barrier;

  const auto& dl = r.need("dims");
  const int dline = r.numbers[r.pos - 1];
  if (dl[0] != "dims" || dl.size() < 3) throw ParseError("expected 'dims d0 d1 ...'", dline, 1);
  std::vector<int> dims;
  for (std::size_t i = 1; i < dl.size(); ++i) {
    const double d = detail::parse_double(dl[i], dline);
    if (d < 1 || d != std::floor(d) || d > 1e6) throw ParseError("invalid layer width '" + dl[i] + "'", dline, 1);
    dims.push_back(static_cast<int>(d));
  }

  Activation hidden, output;
  for (const char* which : {"hidden", "output"}) {
    const auto& al = r.need(std::string("activation ") + which);
    const int aline = r.numbers[r.pos - 1];
    if (al.size() < 2 || al[0] != "activation" || al[1] != which) {
      throw ParseError(std::string("expected 'activation ") + which + "'", aline, 1);
    }
    (std::string(which) == "hidden" ? hidden : output) = detail::parse_activation(al, aline);
  }

  Mlp net(role, dims, hidden, output);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::string idx = std::to_string(l + 1);
    for (const char* block : {"W", "b"}) {
      const std::string section = std::string(block) + " " + idx;
      const auto& hl = r.need(section);
      const int hline = r.numbers[r.pos - 1];
      if (hl.size() != 2 || hl[0] != block || hl[1] != idx) throw ParseError("expected '" + section + "'", hline, 1);
      const bool weights = std::string(block) == "W";
      const int cols = weights ? dims[l] : 1;
      for (int i = 0; i < dims[l + 1]; ++i) {
        const auto& row = r.need(section + " row " + std::to_string(i + 1));
        const int rline = r.numbers[r.pos - 1];
        if (static_cast<int>(row.size()) != cols) {
          throw ParseError(section + " row has " + std::to_string(row.size()) + " entries, expected " +
                               std::to_string(cols),
                           rline, 1);
        }
        for (int j = 0; j < cols; ++j) {
          const double v = detail::parse_double(row[j], rline);
          if (weights) {
            net.W(l, i, j) = v;
          } else {
            net.b(l, i) = v;
          }
        }
      }
    }
  }
  if (r.pos != r.lines.size()) throw ParseError("unexpected trailing content", r.line_no(), 1);
  return net;
}

inline Mlp load_mlp_string(const std::string& text) {
  std::istringstream in(text);
  return load_mlp(in);
}

inline void save_mlp(const Mlp& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file " + path);
  out << save_string(net);
  if (!out) throw std::runtime_error("failed writing model file " + path);
}

inline Mlp load_mlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path);
  return load_mlp(in);
}

}  // namespace nnbc
