#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nnbc/nnbc.hpp"
#include "support.hpp"

using namespace nnbc;

namespace {

Mlp one_one_one(Activation hidden, double w1, double b1, double w2, double b2) {
  Mlp net(Mlp::Role::Controller, {1, 1, 1}, hidden, Activation::identity());
  net.W(0, 0, 0) = w1;
  net.b(0, 0) = b1;
  net.W(1, 0, 0) = w2;
  net.b(1, 0) = b2;
  return net;
}

// largest singular value by power iteration on W^T W
double operator_norm(const Mlp& net, std::size_t l) {
  const int rows = net.dims()[l + 1], cols = net.dims()[l];
  std::vector<double> v(cols, 1.0);
  double s = 0;
  for (int it = 0; it < 500; ++it) {
    std::vector<double> wv(rows, 0.0), u(cols, 0.0);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) wv[i] += net.W(l, i, j) * v[j];
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) u[j] += net.W(l, i, j) * wv[i];
    s = norm2(u);
    for (int j = 0; j < cols; ++j) v[j] = u[j] / s;
  }
  return std::sqrt(s);
}

}  // namespace

TEST(Forward, Examples) {
  const Mlp zero = default_controller(3, 2);
  for (double v : forward(zero, std::vector<double>{1.5, -2, 7})) EXPECT_EQ(v, 0.0);

  const Mlp bent = one_one_one(Activation::bent_relu(), 1, 0, 1, 0);
  EXPECT_DOUBLE_EQ(forward(bent, std::vector<double>{0})[0], 0.01);

  const Mlp relu = one_one_one(Activation::relu(), 2, 1, 3, -1);
  EXPECT_EQ(forward(relu, std::vector<double>{1})[0], 8.0);
}

TEST(Forward, ShapeMismatch) {
  const Mlp net = default_barrier(2);
  EXPECT_THROW(forward(net, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(input_grad<double>(default_controller(2, 2), std::vector<double>{1, 2}), ShapeError);
  EXPECT_THROW(Mlp(Mlp::Role::Barrier, {2}, Activation::relu(), Activation::identity()), ShapeError);
}

TEST(InputGrad, Examples) {
  Mlp lin(Mlp::Role::Barrier, {3, 1}, Activation::identity(), Activation::identity());
  lin.W(0, 0, 0) = 0.5;
  lin.W(0, 0, 1) = -2;
  lin.W(0, 0, 2) = 3;
  lin.b(0, 0) = 9;
  EXPECT_EQ(input_grad<double>(lin, std::vector<double>{4, 5, 6}), (std::vector<double>{0.5, -2, 3}));

  Mlp bent = one_one_one(Activation::bent_relu(), 1, 0, 1, 0);
  EXPECT_DOUBLE_EQ(input_grad<double>(bent, std::vector<double>{0})[0], 0.5);
}

TEST(InputGrad, MatchesFiniteDifferences) {
  Mlp net = default_barrier(2);
  init_gaussian(net, 3);
  std::mt19937_64 rng(3);
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    const auto x = fixtures::uniform_point_in({-3, 3}, 2, rng);
    const auto g = input_grad<double>(net, x);
    for (int i = 0; i < 2; ++i) {
      const double h = 1e-6;
      auto xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (forward1<double>(net, xp) - forward1<double>(net, xm)) / (2 * h);
      worst = std::max(worst, std::fabs(g[i] - fd) / std::max(std::fabs(fd), 1e-3));
    }
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(Activations, BentReluProperties) {
  std::mt19937_64 rng(4);
  std::cauchy_distribution<double> wide(0, 1);
  const Activation a = Activation::bent_relu();
  for (int k = 0; k < 100000; ++k) {
    const double x = k % 2 ? wide(rng) : std::uniform_real_distribution<double>(-0.1, 0.1)(rng);
    const double d = activate_deriv(a, x);
    ASSERT_GT(d, 0.0) << x;
    ASSERT_LT(d, 1.0) << x;
    // far left the closed form cancels, so value order is only checked nearby
    if (std::fabs(x) <= 1) ASSERT_GT(activate(a, x + 1e-6), activate(a, x)) << x;
    ASSERT_LE(std::fabs(activate(a, x) - std::max(0.0, x)), 0.01 + 1e-15) << x;
  }
  EXPECT_DOUBLE_EQ(activate(a, 0.0), 0.01);
}

TEST(Activations, HardtanhBoundsControl) {
  Mlp nc = default_controller(3, 2, 5, 1.5);
  init_gaussian(nc, 5);
  for (double& p : nc.params()) p *= 20;
  std::mt19937_64 rng(5);
  for (int k = 0; k < 100000; ++k) {
    const auto x = fixtures::uniform_point_in({-100, 100}, 3, rng);
    for (double u : forward(nc, x)) ASSERT_LE(std::fabs(u), 1.5);
  }
  EXPECT_EQ(activate(Activation::hardtanh(2), 5.0), 2.0);
  EXPECT_EQ(activate(Activation::hardtanh(2), -0.25), -0.5);
  EXPECT_THROW(Activation::hardtanh(0), std::invalid_argument);
}

TEST(Activations, ReluKinkDerivative) {
  EXPECT_EQ(activate_deriv(Activation::relu(), 0.0), 1.0);
  EXPECT_EQ(activate_deriv(Activation::relu(), -1e-300), 0.0);
}

TEST(Lipschitz, ReluNetSpotCheck) {
  Mlp nc = default_controller(2, 1, 5, 3.0);
  init_gaussian(nc, 6);
  double k = 1;
  for (std::size_t l = 0; l < nc.num_layers(); ++l) k *= operator_norm(nc, l);
  std::mt19937_64 rng(6);
  for (int t = 0; t < 10000; ++t) {
    const auto x = fixtures::uniform_point_in({-5, 5}, 2, rng);
    const auto y = fixtures::uniform_point_in({-5, 5}, 2, rng);
    const double dx = std::hypot(x[0] - y[0], x[1] - y[1]);
    const double df = std::fabs(forward(nc, x)[0] - forward(nc, y)[0]);
    ASSERT_LE(df, k * dx * (1 + 1e-9) + 1e-12);
  }
}

TEST(Init, GaussianReproducible) {
  Mlp a = default_barrier(2), b = default_barrier(2), c = default_barrier(2);
  init_gaussian(a, 42);
  init_gaussian(b, 42);
  init_gaussian(c, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Init, WeightSpread) {
  Mlp net(Mlp::Role::Controller, {4, 10000, 1}, Activation::relu(), Activation::identity());
  init_gaussian(net, 7);
  double s = 0, s2 = 0, bs = 0;
  const int n = 4 * 10000;
  for (int i = 0; i < 10000; ++i) {
    for (int j = 0; j < 4; ++j) {
      s += net.W(0, i, j);
      s2 += net.W(0, i, j) * net.W(0, i, j);
    }
    bs += net.b(0, i) * net.b(0, i);
  }
  const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
  EXPECT_NEAR(sd, 0.5, 0.02);
  EXPECT_NEAR(std::sqrt(bs / 10000), 0.01, 0.001);
}

TEST(ModelFile, RoundTripBitwise) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 50; ++k) {
    Mlp net = k % 2 ? default_controller(3, 2, 4 + k % 5, k % 3 ? 2.5 : 0) : default_barrier(2 + k % 3, 7);
    init_gaussian(net, rng());
    for (double& p : net.params()) p *= std::exp(std::uniform_real_distribution<double>(-20, 20)(rng));
    const Mlp back = load_mlp_string(save_string(net));
    ASSERT_EQ(back, net);
  }
}

TEST(ModelFile, ParsesFormat) {
  const std::string text =
      "network barrier\n"
      "dims 2 2 1\n"
      "activation hidden bentrelu   # smooth\n"
      "activation output identity\n"
      "W 1\n1 2\n3 4\n"
      "b 1\n0.5\n-0.5\n"
      "W 2\n1 -1\n"
      "b 2\n0\n";
  const Mlp net = load_mlp_string(text);
  EXPECT_EQ(net.role(), Mlp::Role::Barrier);
  EXPECT_EQ(net.hidden().kind, ActKind::BentReLU);
  EXPECT_EQ(net.W(0, 1, 0), 3.0);
  EXPECT_EQ(net.b(0, 1), -0.5);
  EXPECT_EQ(net.W(1, 0, 1), -1.0);
}

TEST(ModelFile, Errors) {
  const std::string head = "network controller\ndims 1 1 1\nactivation hidden relu\nactivation output identity\n";
  try {
    load_mlp_string(head + "W 1\n2\nb 1\n1\n");
    FAIL() << "truncated file parsed";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("W 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_mlp_string("network controller\ndims 1 1 1\nactivation hidden swish\n"), ParseError);
  EXPECT_THROW(load_mlp_string(head + "W 1\n2 3\nb 1\n1\nW 2\n1\nb 2\n0\n"), ParseError);
  EXPECT_THROW(load_mlp_string(head + "W 1\nnan\nb 1\n1\nW 2\n1\nb 2\n0\n"), ParseError);
  EXPECT_THROW(load_mlp_string(head + "W 1\n1\nb 1\n1\nW 2\n1\nb 2\n0\nextra\n"), ParseError);
  EXPECT_THROW(load_mlp_string("network critic\n"), ParseError);
}
