#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "nnbc/nnbc.hpp"

namespace nnbc::fixtures {

inline std::vector<double> uniform_point(const BoxRegion& b, std::mt19937_64& rng) {
  std::vector<double> x;
  for (const auto& iv : b.dims) x.push_back(std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng));
  return x;
}

inline std::vector<double> uniform_point(const Region& r, std::mt19937_64& rng) {
  for (;;) {
    auto x = uniform_point(r.bounding_box(), rng);
    if (r.contains(x)) return x;
  }
}

inline std::vector<double> uniform_point_in(const Interval& iv, std::size_t n, std::mt19937_64& rng) {
  std::vector<double> x(n);
  for (auto& v : x) v = std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
  return x;
}

/// Random points held in a PointSet so PointBatch spans stay valid.
inline PointSet random_points(const Region& r, std::size_t count, std::mt19937_64& rng) {
  PointSet s(static_cast<std::size_t>(r.dim()));
  for (std::size_t i = 0; i < count; ++i) s.push_back(uniform_point(r, rng));
  return s;
}

inline std::vector<std::span<const double>> spans(const PointSet& s) {
  std::vector<std::span<const double>> out;
  for (std::size_t i = 0; i < s.size(); ++i) out.push_back(s[i]);
  return out;
}

/// Pre-activations of every layer; used to locate ReLU/Hardtanh kinks.
inline std::vector<double> preactivations(const Mlp& net, std::span<const double> x) {
  std::vector<double> out;
  std::vector<double> cur(x.begin(), x.end());
  const auto& d = net.dims();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    std::vector<double> nxt(d[l + 1]);
    for (int i = 0; i < d[l + 1]; ++i) {
      double z = net.b(l, i);
      for (int j = 0; j < d[l]; ++j) z += net.W(l, i, j) * cur[j];
      out.push_back(z);
      nxt[i] = activate(net.activation(l), z);
    }
    cur = std::move(nxt);
  }
  return out;
}

/// Discrete branch choices of the loss at the current parameters: ReLU and
/// Hardtanh regions, belt and L5 masks, and hinge activity. A parameter
/// whose perturbation changes the signature sits next to a kink.
inline std::vector<int> kink_signature(const Ccds& sys, const Mlp& nc, const Mlp& nb, const LossConfig& cfg,
                                       const PointBatch& b, bool with_l6) {
  std::vector<int> sig;
  const auto& c = cfg.c;
  const auto& e = cfg.eps;
  const ClosedLoop loop(sys, nc);
  auto controller_regions = [&](std::span<const double> x) {
    const auto z = preactivations(nc, x);
    std::size_t k = 0;
    for (std::size_t l = 0; l < nc.num_layers(); ++l) {
      const auto& act = nc.activation(l);
      for (int i = 0; i < nc.dims()[l + 1]; ++i, ++k) {
        if (act.kind == ActKind::ReLU) sig.push_back(z[k] >= 0);
        if (act.kind == ActKind::Hardtanh) sig.push_back(z[k] < -1 ? 0 : z[k] > 1 ? 2 : 1);
      }
    }
  };
  if (c[0] > 0) {
    for (auto x : b.init) sig.push_back(forward1<double>(nb, x) + e[0] >= 0);
  }
  if (c[1] > 0) {
    for (auto x : b.unsafe) sig.push_back(-forward1<double>(nb, x) + e[1] >= 0);
  }
  for (auto x : b.domain) {
    const double v = forward1<double>(nb, x);
    const bool belt = std::fabs(v) <= e[3];
    sig.push_back(belt);
    const auto f = loop(x);
    if (belt) {
      const auto g = input_grad<double>(nb, x);
      const double lie = dot(g, f);
      sig.push_back(lie + e[2] >= 0);
      sig.push_back(lie / (norm2(g) * norm2(f) + kLieNormGuard) + e[4] >= 0);
    }
    if (c[4] > 0) sig.push_back(-norm2(f) + e[5] >= 0);
    controller_regions(x);
  }
  if (with_l6 && sys.equilibrium) {
    const std::vector<double> xo = *sys.equilibrium;
    sig.push_back(norm2(loop(std::span<const double>(xo))) - e[7] >= 0);
    controller_regions(xo);
  }
  return sig;
}

/// x' = -x, y' = -y + u on the Duffing-like boxes; stable under u = 0.
inline Ccds decay_system(const std::string& sign = "-") {
  return parse_system("system decay\nstate x y\ninput u\ndynamics\n  x' = " + sign + "x\n  y' = " + sign +
                      "y + u\ndomain box x in [-6, 6] y in [-6, 6]\ninit box x in [-1, 1] y in [-1, 1]\n"
                      "unsafe complement box x in [-5, 5] y in [-5, 5]\nequilibrium 0 0\n");
}

/// B(x) = sum_i a(x_i) + a(-x_i) - level with Bent-ReLU a, roughly
/// |x|_1 - level: a diamond-shaped barrier written as a 2n-hidden-unit net.
inline Mlp diamond_barrier(int n, double level) {
  Mlp nb(Mlp::Role::Barrier, {n, 2 * n, 1}, Activation::bent_relu(), Activation::identity());
  for (int i = 0; i < n; ++i) {
    nb.W(0, 2 * i, i) = 1;
    nb.W(0, 2 * i + 1, i) = -1;
    nb.W(1, 0, 2 * i) = 1;
    nb.W(1, 0, 2 * i + 1) = 1;
  }
  nb.b(1, 0) = -level;
  return nb;
}

/// Random expression over variables x0..x{nvars-1} (slots 0..nvars-1).
inline Expr random_expr(std::mt19937_64& rng, int depth, int nvars, bool kinks = true) {
  std::uniform_int_distribution<int> pick(0, 99);
  auto leaf = [&]() {
    if (pick(rng) < 60) {
      const int i = std::uniform_int_distribution<int>(0, nvars - 1)(rng);
      return Expr::var("x" + std::to_string(i), i);
    }
    return Expr::number(std::round(std::uniform_real_distribution<double>(-3, 3)(rng) * 100) / 100);
  };
  if (depth <= 0 || pick(rng) < 15) return leaf();
  auto sub = [&] { return random_expr(rng, depth - 1, nvars, kinks); };
  const int k = std::uniform_int_distribution<int>(0, kinks ? 14 : 11)(rng);
  switch (k) {
    case 0: return sub() + sub();
    case 1: return sub() - sub();
    case 2: return sub() * sub();
    case 3: return sub() / sub();
    case 4: return -sub();
    case 5: return Expr::pow(sub(), std::uniform_int_distribution<int>(1, 4)(rng));
    case 6: return Expr::unary(ExprKind::Sin, sub());
    case 7: return Expr::unary(ExprKind::Cos, sub());
    case 8: return Expr::unary(ExprKind::Tan, sub());
    case 9: return Expr::unary(ExprKind::Sqrt, sub());
    case 10: return sub() * sub() + sub();
    case 11: return Expr::pow(sub(), 2);
    case 12: return Expr::binary(ExprKind::Min, sub(), sub());
    case 13: return Expr::binary(ExprKind::Max, sub(), sub());
    default: return Expr::unary(ExprKind::Abs, sub());
  }
}

inline std::vector<std::string> var_names(int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back("x" + std::to_string(i));
  return v;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("nnbc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace nnbc::fixtures
