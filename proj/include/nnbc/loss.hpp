#pragma once

// Training loss for the controller/barrier pair.
//
//   L1 = ReLU(N_b + eps1)                       on S_I
//   L2 = ReLU(-N_b + eps2)                      on S_U
//   L3 = ReLU(L_f N_b + eps3)                   on the belt |N_b| <= eps4 of S_D
//   L4 = ReLU(L_f N_b / (|grad N_b| |f| + d) + eps5)   same belt, d = 1e-12
//   L5 = ReLU(-|f| + eps6)                      on S_D where |x - x_o| > eps7
//   L6 = ReLU(|f(x_o)| - eps8)                  once
//
// total = c1 sum L1 + c2 sum L2 + sum (c3 L3 + c4 L4 + c5 L5) + c6 L6.
//
// Loss values come from a plain double pass. Gradients are taken on a tape
// that only records points whose hinge argument is >= 0 (a hinge at exactly
// zero has slope 1 under the max tie rule); masks are decided in the double
// pass and carry no gradient.

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "nnbc/autodiff.hpp"
#include "nnbc/nn.hpp"
#include "nnbc/sampling.hpp"
#include "nnbc/system.hpp"

namespace nnbc {

inline constexpr double kLieNormGuard = 1e-12;

struct LossConfig {
  std::array<double, 6> c{1, 1, 1, 0, 0, 0};
  std::array<double, 8> eps{0, 0, 0, 0.01, 0, 0, 0, 0};
  bool l6_per_batch = true;  // otherwise L6 enters once per epoch (first batch)

  void validate() const {
    for (double v : c) {
      if (!(v >= 0) || !std::isfinite(v)) throw std::invalid_argument("loss weights must be finite and >= 0");
    }
    for (double v : eps) {
      if (!(v >= 0) || !std::isfinite(v)) throw std::invalid_argument("tolerances must be finite and >= 0");
    }
    if (!(eps[3] > 0)) throw std::invalid_argument("eps4 (belt width) must be positive");
  }
};

// NaN passes through so that an overflowing field can never look like zero loss.
inline double relu(double x) { return x > 0 || std::isnan(x) ? x : 0; }

inline double l1(double nb, double eps1) { return relu(nb + eps1); }
inline double l2(double nb, double eps2) { return relu(-nb + eps2); }
inline double l3(double nb, double lie, double eps3, double eps4) {
  return std::fabs(nb) <= eps4 ? relu(lie + eps3) : 0.0;
}
inline double l4(double nb, double lie, double grad_norm, double f_norm, double eps4, double eps5) {
  return std::fabs(nb) <= eps4 ? relu(lie / (grad_norm * f_norm + kLieNormGuard) + eps5) : 0.0;
}
inline double l5(double dist_to_eq, double f_norm, double eps6, double eps7) {
  return dist_to_eq > eps7 ? relu(-f_norm + eps6) : 0.0;
}
inline double l6(double f_norm_at_eq, double eps8) { return relu(f_norm_at_eq - eps8); }

inline double norm2(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Points making up one loss evaluation.
struct PointBatch {
  std::vector<std::span<const double>> init, unsafe, domain;
};

inline PointBatch view(const Dataset& ds, const Batch& b) {
  PointBatch pb;
  for (auto i : b.i) pb.init.push_back(ds.s_i[i]);
  for (auto i : b.u) pb.unsafe.push_back(ds.s_u[i]);
  for (auto i : b.d) pb.domain.push_back(ds.s_d[i]);
  return pb;
}

inline PointBatch view_all(const Dataset& ds) {
  PointBatch pb;
  for (std::size_t i = 0; i < ds.s_i.size(); ++i) pb.init.push_back(ds.s_i[i]);
  for (std::size_t i = 0; i < ds.s_u.size(); ++i) pb.unsafe.push_back(ds.s_u[i]);
  for (std::size_t i = 0; i < ds.s_d.size(); ++i) pb.domain.push_back(ds.s_d[i]);
  return pb;
}

struct LossGrad {
  double value = 0;
  std::vector<double> grad_c;  // w.r.t. controller parameters
  std::vector<double> grad_b;  // w.r.t. barrier parameters
};

class LossModel {
 public:
  LossModel(const Ccds& sys, LossConfig cfg) : sys_(&sys), cfg_(cfg) { cfg_.validate(); }

  const LossConfig& config() const { return cfg_; }

  /// Loss of a batch; `with_l6` adds the equilibrium term.
  double value(const Mlp& nc, const Mlp& nb, const PointBatch& b, bool with_l6 = true) const {
    return evaluate(nc, nb, b, with_l6, nullptr);
  }

  LossGrad value_and_grad(const Mlp& nc, const Mlp& nb, const PointBatch& b, bool with_l6 = true) const {
    LossGrad out;
    out.value = evaluate(nc, nb, b, with_l6, &out);
    return out;
  }

  /// Loss over the whole dataset with L6 counted once.
  double full_pass(const Mlp& nc, const Mlp& nb, const Dataset& ds) const {
    return value(nc, nb, view_all(ds), true);
  }

 private:
  bool want_l5() const { return cfg_.c[4] > 0 && sys_->equilibrium.has_value(); }
  bool want_l6() const { return cfg_.c[5] > 0 && sys_->equilibrium.has_value(); }

  double evaluate(const Mlp& nc, const Mlp& nb, const PointBatch& b, bool with_l6, LossGrad* g) const {
    const auto& c = cfg_.c;
    const auto& e = cfg_.eps;
    const ClosedLoop loop(*sys_, nc);

    // Tape state, created lazily on the first active point.
    Tape tape;
    std::vector<Var> tc, tb, terms;
    auto ensure_tape = [&] {
      if (!tc.empty() || !tb.empty()) return;
      tape.reserve(4096);
      tc = record_params(tape, nc);
      tb = record_params(tape, nb);
    };
    auto inputs = [&](std::span<const double> x) {
      std::vector<Var> v;
      for (double xi : x) v.push_back(tape.constant(xi));
      return v;
    };
    auto vnorm = [](std::span<const Var> v) {
      Var s = square(v[0]);
      for (std::size_t i = 1; i < v.size(); ++i) s = s + square(v[i]);
      return sqrt(s);
    };

    double total = 0;
    if (c[0] > 0) {
      double part = 0;
      for (const auto& x : b.init) {
        const double v = forward1<double>(nb, x);
        part += l1(v, e[0]);
        if (g && v + e[0] >= 0) {
          ensure_tape();
          const auto xin = inputs(x);
          const Var out = forward_with<Var, Var>(nb, xin, tb)[0];
          terms.push_back(c[0] * max(0.0, out + e[0]));
        }
      }
      total += c[0] * part;
    }
    if (c[1] > 0) {
      double part = 0;
      for (const auto& x : b.unsafe) {
        const double v = forward1<double>(nb, x);
        part += l2(v, e[1]);
        if (g && -v + e[1] >= 0) {
          ensure_tape();
          const auto xin = inputs(x);
          const Var out = forward_with<Var, Var>(nb, xin, tb)[0];
          terms.push_back(c[1] * max(0.0, -out + e[1]));
        }
      }
      total += c[1] * part;
    }

    const bool belt_terms = c[2] > 0 || c[3] > 0;
    const bool stab = want_l5();
    if (belt_terms || stab) {
      double part = 0;
      for (const auto& x : b.domain) {
        bool rec3 = false, rec4 = false, rec5 = false;
        double point = 0;
        const bool far = stab && distance_to_eq(x) > e[6];
        std::vector<double> f;
        if (belt_terms) {
          const double v = forward1<double>(nb, x);
          if (std::fabs(v) <= e[3]) {
            const auto gx = input_grad<double>(nb, x);
            f = loop(x);
            const double lie = dot(gx, f);
            if (c[2] > 0) {
              point += c[2] * relu(lie + e[2]);
              rec3 = lie + e[2] >= 0;
            }
            if (c[3] > 0) {
              const double arg = lie / (norm2(gx) * norm2(f) + kLieNormGuard) + e[4];
              point += c[3] * relu(arg);
              rec4 = arg >= 0;
            }
          }
        }
        if (far) {
          if (f.empty()) f = loop(x);
          const double arg = -norm2(f) + e[5];
          point += c[4] * relu(arg);
          rec5 = arg >= 0;
        }
        part += point;
        if (g && (rec3 || rec4 || rec5)) {
          ensure_tape();
          const auto xin = inputs(x);
          const auto fv = loop.record(xin, tc);
          if (rec3 || rec4) {
            const NetWithGrad ng = input_gradient_subgraph(nb, xin, tb);
            Var lie = ng.grad[0] * fv[0];
            for (std::size_t i = 1; i < fv.size(); ++i) lie = lie + ng.grad[i] * fv[i];
            if (rec3) terms.push_back(c[2] * max(0.0, lie + e[2]));
            if (rec4) {
              const Var ratio = lie / (vnorm(ng.grad) * vnorm(fv) + kLieNormGuard);
              terms.push_back(c[3] * max(0.0, ratio + e[4]));
            }
          }
          if (rec5) terms.push_back(c[4] * max(0.0, -vnorm(fv) + e[5]));
        }
      }
      total += part;
    }

    if (with_l6 && want_l6()) {
      const auto& xo = *sys_->equilibrium;
      const double arg = norm2(loop(std::span<const double>(xo))) - e[7];
      total += c[5] * relu(arg);
      if (g && arg >= 0) {
        ensure_tape();
        const auto xin = inputs(xo);
        const auto fv = loop.record(xin, tc);
        terms.push_back(c[5] * max(0.0, vnorm(fv) - e[7]));
      }
    }

    if (g) {
      g->grad_c.assign(nc.num_params(), 0.0);
      g->grad_b.assign(nb.num_params(), 0.0);
      if (!terms.empty()) {
        Var sum = terms[0];
        for (std::size_t i = 1; i < terms.size(); ++i) sum = sum + terms[i];
        const auto adj = tape.grad(sum.id);
        for (std::size_t i = 0; i < tc.size(); ++i) g->grad_c[i] = adj[tc[i].id];
        for (std::size_t i = 0; i < tb.size(); ++i) g->grad_b[i] = adj[tb[i].id];
      }
    }
    return total;
  }

  double distance_to_eq(std::span<const double> x) const {
    const auto& xo = *sys_->equilibrium;
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - xo[i]) * (x[i] - xo[i]);
    return std::sqrt(s);
  }

  const Ccds* sys_;
  LossConfig cfg_;
};

}  // namespace nnbc
