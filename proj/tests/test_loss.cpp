#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nnbc/nnbc.hpp"
#include "support.hpp"

using namespace nnbc;

namespace {

// Straight-line recomputation of the loss, point by point.
double brute_loss(const Ccds& sys, const Mlp& nc, const Mlp& nb, const LossConfig& cfg, const PointBatch& b) {
  const auto& c = cfg.c;
  const auto& e = cfg.eps;
  auto hinge = [](double v) { return v > 0 ? v : 0.0; };
  auto closed = [&](std::span<const double> x) {
    const auto u = forward(nc, x);
    return sys.field<double>(x, u);
  };
  auto len = [](const std::vector<double>& v) {
    double s = 0;
    for (double a : v) s += a * a;
    return std::sqrt(s);
  };
  double total = 0;
  for (auto x : b.init) total += c[0] * hinge(forward1<double>(nb, x) + e[0]);
  for (auto x : b.unsafe) total += c[1] * hinge(-forward1<double>(nb, x) + e[1]);
  for (auto x : b.domain) {
    const double v = forward1<double>(nb, x);
    const auto f = closed(x);
    if (std::fabs(v) <= e[3]) {
      const auto g = input_grad<double>(nb, x);
      double lie = 0;
      for (std::size_t i = 0; i < f.size(); ++i) lie += g[i] * f[i];
      total += c[2] * hinge(lie + e[2]);
      total += c[3] * hinge(lie / (len(g) * len(f) + 1e-12) + e[4]);
    }
    if (sys.equilibrium) {
      std::vector<double> d(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - (*sys.equilibrium)[i];
      if (len(d) > e[6]) total += c[4] * hinge(-len(f) + e[5]);
    }
  }
  if (sys.equilibrium) total += c[5] * hinge(len(closed(*sys.equilibrium)) - e[7]);
  return total;
}

struct Pair {
  Mlp nc, nb;
};

Pair random_pair(const Ccds& sys, std::uint64_t seed) {
  Pair p{default_controller(sys.n(), sys.m()), default_barrier(sys.n())};
  init_gaussian(p.nc, seed);
  init_gaussian(p.nb, seed + 1000);
  return p;
}

LossConfig wide_config() {
  LossConfig cfg;
  cfg.c = {1, 1, 1, 0.5, 0.3, 0.2};
  cfg.eps = {0.05, 0.05, 0.02, 0.6, 0.1, 0.3, 0.5, 0.01};
  return cfg;
}

}  // namespace

TEST(SubLosses, Examples) {
  EXPECT_EQ(l1(-0.5, 0), 0);
  EXPECT_DOUBLE_EQ(l1(0.3, 0.02), 0.32);
  EXPECT_DOUBLE_EQ(l2(0.5, 0.8), 0.3);
  EXPECT_EQ(l3(0.5, -3, 0, 0.01), 0);
  EXPECT_EQ(l3(0.001, 0.0, 0, 0.01), 0);
  EXPECT_DOUBLE_EQ(l3(0.001, -0.005, 0.01, 0.01), 0.005);
  EXPECT_EQ(l4(0, -2, 1, 2, 0.01, 0.5), 0);  // antiparallel: ratio -1
  EXPECT_NEAR(l4(0, -0.2, 1, 1, 0.01, 0.35), 0.15, 1e-12);
  EXPECT_DOUBLE_EQ(l4(0, 0, 1, 0, 0.01, 0.35), 0.35);
  EXPECT_EQ(l5(0.05, 0, 0.05, 0.1), 0);
  EXPECT_DOUBLE_EQ(l5(1, 0.03, 0.05, 0.1), 0.02);
  EXPECT_EQ(l6(0, 0), 0);
  EXPECT_EQ(l6(0, 0.5), 0);
}

TEST(Config, Validation) {
  LossConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.eps[3] = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.eps[3] = 0.01;
  cfg.c[2] = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(TotalLoss, SingleInitPoint) {
  const Ccds sys = builtin("dubins");
  Mlp nb(Mlp::Role::Barrier, {2, 1, 1}, Activation::bent_relu(), Activation::identity());
  nb.b(1, 0) = 0.3;  // N_b = 0.3 everywhere
  const Mlp nc = default_controller(2, 1);
  LossConfig cfg;
  cfg.eps[0] = 0.02;
  const std::vector<double> x{0.1, 0.0};
  PointBatch b;
  b.init.push_back(x);
  const LossModel model(sys, cfg);
  EXPECT_DOUBLE_EQ(model.value(nc, nb, b), 0.32);
  EXPECT_EQ(model.value(nc, nb, PointBatch{}), 0.0);
}

TEST(TotalLoss, MatchesBruteForce) {
  std::mt19937_64 rng(1);
  for (const auto& name : builtin_names()) {
    const Ccds sys = builtin(name);
    for (int k = 0; k < 10; ++k) {
      const Pair p = random_pair(sys, rng());
      const PointSet si = fixtures::random_points(sys.init, 8, rng), su = fixtures::random_points(sys.unsafe, 8, rng),
                     sd = fixtures::random_points(sys.domain, 64, rng);
      const PointBatch b{fixtures::spans(si), fixtures::spans(su), fixtures::spans(sd)};
      const LossConfig cfg = wide_config();
      const double want = brute_loss(sys, p.nc, p.nb, cfg, b);
      const double got = LossModel(sys, cfg).value(p.nc, p.nb, b);
      ASSERT_NEAR(got, want, 1e-10 * (1 + want)) << name;
      ASSERT_GE(got, 0.0);
      const LossGrad lg = LossModel(sys, cfg).value_and_grad(p.nc, p.nb, b);
      ASSERT_EQ(lg.value, got);
    }
  }
}

TEST(TotalLoss, MonotoneInTolerances) {
  std::mt19937_64 rng(2);
  const Ccds sys = builtin("duffing");
  for (int k = 0; k < 20; ++k) {
    const Pair p = random_pair(sys, rng());
    const PointSet si = fixtures::random_points(sys.init, 16, rng), su = fixtures::random_points(sys.unsafe, 16, rng),
                   sd = fixtures::random_points(sys.domain, 128, rng);
    const PointBatch b{fixtures::spans(si), fixtures::spans(su), fixtures::spans(sd)};
    LossConfig cfg = wide_config();
    double prev = LossModel(sys, cfg).value(p.nc, p.nb, b);
    for (int step = 0; step < 6; ++step) {
      for (int i : {0, 1, 2, 4, 5}) cfg.eps[i] += std::uniform_real_distribution<double>(0, 0.05)(rng);
      const double cur = LossModel(sys, cfg).value(p.nc, p.nb, b);
      ASSERT_GE(cur, prev);
      prev = cur;
    }
  }
}

TEST(TotalLoss, NormalizedLieIsScaleFree) {
  const Ccds sys = builtin("dubins");
  std::mt19937_64 rng(3);
  LossConfig cfg;
  cfg.c = {0, 0, 0, 1, 0, 0};
  cfg.eps = {0, 0, 0, 1.0, 0.2, 0, 0, 0};
  for (double lambda : {0.1, 10.0}) {
    Ccds scaled = sys;
    for (auto& e : scaled.f) e = Expr::number(lambda) * e;
    for (int k = 0; k < 10; ++k) {
      const Pair p = random_pair(sys, rng());
      const PointSet sd = fixtures::random_points(sys.domain, 64, rng);
      const PointBatch b{{}, {}, fixtures::spans(sd)};
      const double a = LossModel(sys, cfg).value(p.nc, p.nb, b), s = LossModel(scaled, cfg).value(p.nc, p.nb, b);
      EXPECT_NEAR(a, s, 1e-8 * (1 + a));
    }
  }
}

TEST(TotalLoss, ZeroLossImpliesSampledConditions) {
  const Ccds sys = fixtures::decay_system();
  const Mlp nc = default_controller(2, 1);
  const Mlp nb = fixtures::diamond_barrier(2, 3.5);
  LossConfig cfg;
  cfg.c = {1, 1, 1, 1, 0, 1};
  cfg.eps = {0.1, 0.1, 0.1, 0.2, 0.1, 0, 0, 0};
  const Dataset ds = make_dataset(sys, {64, 0, 0});
  const LossModel model(sys, cfg);
  ASSERT_EQ(model.full_pass(nc, nb, ds), 0.0);
  for (std::size_t i = 0; i < ds.s_i.size(); ++i) EXPECT_LE(forward1<double>(nb, ds.s_i[i]), -0.1);
  for (std::size_t i = 0; i < ds.s_u.size(); ++i) EXPECT_GE(forward1<double>(nb, ds.s_u[i]), 0.1);
  int belt = 0;
  for (std::size_t i = 0; i < ds.s_d.size(); ++i) {
    const auto x = ds.s_d[i];
    if (std::fabs(forward1<double>(nb, x)) > 0.2) continue;
    ++belt;
    EXPECT_LE(dot(input_grad<double>(nb, x), ClosedLoop(sys, nc)(x)), -0.1);
  }
  EXPECT_GT(belt, 0);
  // the zero-loss batches also give zero gradients
  const LossGrad g = model.value_and_grad(nc, nb, view_all(ds));
  for (double v : g.grad_b) EXPECT_EQ(v, 0.0);
}

TEST(TotalLoss, L6OncePerBatch) {
  const Ccds sys = builtin("dubins");
  Mlp nc = default_controller(2, 1);
  nc.b(1, 0) = 0.7;  // u = 0.7 everywhere, |f(x_o)| = 0.7
  const Mlp nb = default_barrier(2);
  LossConfig cfg;
  cfg.c = {0, 0, 0, 0, 0, 2};
  const LossModel model(sys, cfg);
  EXPECT_DOUBLE_EQ(model.value(nc, nb, PointBatch{}), 1.4);
  EXPECT_EQ(model.value(nc, nb, PointBatch{}, false), 0.0);
  const LossGrad g = model.value_and_grad(nc, nb, PointBatch{});
  EXPECT_DOUBLE_EQ(g.grad_c[nc.bias_offset(1)], 2.0);
}

TEST(Gradient, MatchesFiniteDifferencesAwayFromKinks) {
  std::mt19937_64 rng(4);
  int compared = 0, skipped = 0;
  for (const auto& name : builtin_names()) {
    const Ccds sys = builtin(name);
    const LossConfig cfg = wide_config();
    const LossModel model(sys, cfg);
    for (int k = 0; k < 3; ++k) {
      const Pair p = random_pair(sys, rng());
      const PointSet si = fixtures::random_points(sys.init, 16, rng), su = fixtures::random_points(sys.unsafe, 16, rng),
                     sd = fixtures::random_points(sys.domain, 64, rng);
      const PointBatch b{fixtures::spans(si), fixtures::spans(su), fixtures::spans(sd)};
      const LossGrad lg = model.value_and_grad(p.nc, p.nb, b);
      const auto sig = fixtures::kink_signature(sys, p.nc, p.nb, cfg, b, true);
      for (int net = 0; net < 2; ++net) {
        const Mlp& base = net ? p.nb : p.nc;
        const auto& grad = net ? lg.grad_b : lg.grad_c;
        for (std::size_t i = 0; i < base.num_params(); ++i) {
          const double h = 1e-5;
          Mlp plus = base, minus = base;
          plus.params()[i] += h;
          minus.params()[i] -= h;
          const Mlp& cp = net ? p.nc : plus;
          const Mlp& bp = net ? plus : p.nb;
          const Mlp& cm = net ? p.nc : minus;
          const Mlp& bm = net ? minus : p.nb;
          if (fixtures::kink_signature(sys, cp, bp, cfg, b, true) != sig ||
              fixtures::kink_signature(sys, cm, bm, cfg, b, true) != sig) {
            ++skipped;
            continue;
          }
          const double fd = (model.value(cp, bp, b) - model.value(cm, bm, b)) / (2 * h);
          ++compared;
          ASSERT_NEAR(grad[i], fd, std::max(1e-4 * std::fabs(fd), 1e-7))
              << name << (net ? " barrier" : " controller") << " parameter " << i;
        }
      }
    }
  }
  EXPECT_GT(compared, 10 * skipped);
}
