#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "nnbc/nnbc.hpp"
#include "support.hpp"

using namespace nnbc;

namespace {

std::vector<std::vector<double>> rows(const PointSet& s) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < s.size(); ++i) out.emplace_back(s[i].begin(), s[i].end());
  return out;
}

Dataset sized(int nd, int ni, int nu) {
  Dataset ds;
  ds.s_d = PointSet(1);
  ds.s_i = PointSet(1);
  ds.s_u = PointSet(1);
  for (int k = 0; k < nd; ++k) ds.s_d.push_back(std::vector<double>{double(k)});
  for (int k = 0; k < ni; ++k) ds.s_i.push_back(std::vector<double>{double(k)});
  for (int k = 0; k < nu; ++k) ds.s_u.push_back(std::vector<double>{double(k)});
  return ds;
}

void expect_partition(const BatchPlan& plan, std::size_t total, std::vector<std::uint32_t> Batch::*member) {
  const std::size_t k = plan.size();
  std::multiset<std::uint32_t> seen;
  for (const auto& b : plan.batches) {
    const auto& s = b.*member;
    if (total >= k) {
      EXPECT_GE(s.size(), total / k);
      EXPECT_LE(s.size(), (total + k - 1) / k);
    } else {
      EXPECT_EQ(s.size(), 1u);
    }
    seen.insert(s.begin(), s.end());
  }
  for (std::uint32_t i = 0; i < total; ++i) EXPECT_GE(seen.count(i), 1u) << i;
  if (total >= k) EXPECT_EQ(seen.size(), total);
}

}  // namespace

TEST(Grid, UnitSquare) {
  const Region r = Region::box(BoxRegion({Interval(0, 1), Interval(0, 1)}));
  const PointSet s = grid_region(r, std::vector<int>{3, 3});
  ASSERT_EQ(s.size(), 9u);
  const auto p = rows(s);
  const std::set<std::vector<double>> got(p.begin(), p.end());
  for (double a : {0.0, 0.5, 1.0})
    for (double b : {0.0, 0.5, 1.0}) EXPECT_TRUE(got.count({a, b})) << a << "," << b;
}

TEST(Grid, SinglePointIsMidpoint) {
  const Region r = Region::box(BoxRegion({Interval(2, 4)}));
  const PointSet s = grid_region(r, std::vector<int>{1});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0][0], 3.0);
}

TEST(Grid, DubinsDomain) {
  const Ccds sys = builtin("dubins");
  const PointSet s = grid_region(sys.domain, std::vector<int>{256, 256});
  EXPECT_EQ(s.size(), 65536u);
}

TEST(Grid, ComplementKeepsInnerBoundary) {
  const Region r = Region::complement_within(BoxRegion({Interval(0, 3)}), BoxRegion({Interval(1, 2)}));
  const PointSet s = grid_region(r, std::vector<int>{4});
  EXPECT_EQ(rows(s), (std::vector<std::vector<double>>{{0}, {1}, {2}, {3}}));
  // a finer grid drops the interior
  EXPECT_EQ(grid_region(r, std::vector<int>{7}).size(), 6u);  // only 1.5 is interior
}

TEST(Grid, BruteForceCount) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const Region r = Region::complement_within(BoxRegion({Interval(-2, 2), Interval(-1, 3)}),
                                               BoxRegion({Interval(-1, 0.5), Interval(0, 1.5)}));
    const int a = 1 + static_cast<int>(rng() % 12), b = 1 + static_cast<int>(rng() % 12);
    int brute = 0;
    for (int i = 0; i < a; ++i)
      for (int j = 0; j < b; ++j) {
        const std::vector<double> p{grid_coord(Interval(-2, 2), a, i), grid_coord(Interval(-1, 3), b, j)};
        brute += r.contains(p);
      }
    const PointSet s = grid_region(r, std::vector<int>{a, b});
    EXPECT_EQ(static_cast<int>(s.size()), brute);
    const auto p = rows(s);
    EXPECT_EQ(std::set<std::vector<double>>(p.begin(), p.end()).size(), p.size());
  }
}

TEST(Dataset, MembershipOfAllBuiltins) {
  for (const auto& name : builtin_names()) {
    const Ccds sys = builtin(name);
    const Dataset ds = make_dataset(sys, {16, 0, 0});
    for (std::size_t i = 0; i < ds.s_d.size(); ++i) ASSERT_TRUE(sys.domain.contains(ds.s_d[i]));
    for (std::size_t i = 0; i < ds.s_i.size(); ++i) ASSERT_TRUE(sys.init.contains(ds.s_i[i]));
    for (std::size_t i = 0; i < ds.s_u.size(); ++i) ASSERT_TRUE(sys.unsafe.contains(ds.s_u[i]));
    EXPECT_GT(ds.s_i.size(), 0u) << name;
    EXPECT_GT(ds.s_u.size(), 0u) << name;
  }
}

TEST(Dataset, DefaultDensities) {
  const Dataset d = make_dataset(builtin("dubins"));
  EXPECT_EQ(d.s_d.size(), 65536u);
  // init spacing matches the domain grid: [-1,1] at 12/255 spacing
  EXPECT_EQ(d.init_counts[0], static_cast<int>(std::ceil(2.0 / (12.0 / 255) - 1e-9)) + 1);
  const Dataset b = make_dataset(builtin("bicycle"));
  EXPECT_EQ(b.domain_counts, (std::vector<int>{64, 64, 64}));
}

TEST(Dataset, CsvDump) {
  PointSet s(2);
  s.push_back(std::vector<double>{0.1, -2});
  std::ostringstream os;
  write_csv(os, s);
  EXPECT_EQ(os.str(), "0.10000000000000001,-2\n");
}

TEST(Batches, DubinsCounts) {
  const Dataset ds = make_dataset(builtin("dubins"));
  const BatchPlan plan = make_batches(ds, 4096, BatchMode::Count, 7);
  ASSERT_EQ(plan.size(), 4096u);
  for (const auto& b : plan.batches) {
    EXPECT_EQ(b.d.size(), 16u);
    EXPECT_GE(b.i.size(), 1u);
    EXPECT_GE(b.u.size(), 1u);
  }
  expect_partition(plan, ds.s_d.size(), &Batch::d);
  expect_partition(plan, ds.s_i.size(), &Batch::i);
  expect_partition(plan, ds.s_u.size(), &Batch::u);
}

TEST(Batches, SingleBatchIsEverything) {
  const Dataset ds = sized(10, 3, 5);
  const BatchPlan plan = make_batches(ds, 1);
  ASSERT_EQ(plan.size(), 1u);
  EXPECT_EQ(plan.batches[0].d.size(), 10u);
  EXPECT_EQ(plan.batches[0].i.size(), 3u);
  EXPECT_EQ(plan.batches[0].u.size(), 5u);
}

TEST(Batches, PartitionProperty) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const int nd = 1 + static_cast<int>(rng() % 300), ni = 1 + static_cast<int>(rng() % 40),
              nu = 1 + static_cast<int>(rng() % 80);
    const int k = 1 + static_cast<int>(rng() % 64);
    const BatchPlan plan = make_batches(sized(nd, ni, nu), k, BatchMode::Count, rng());
    ASSERT_EQ(plan.size(), static_cast<std::size_t>(k));
    expect_partition(plan, nd, &Batch::d);
    expect_partition(plan, ni, &Batch::i);
    expect_partition(plan, nu, &Batch::u);
  }
}

TEST(Batches, SizeMode) {
  const BatchPlan plan = make_batches(sized(100, 7, 30), 16, BatchMode::Size, 1);
  EXPECT_EQ(plan.size(), 7u);  // ceil(100 / 16)
  for (const auto& b : plan.batches) EXPECT_LE(b.d.size(), 16u);
}

TEST(Batches, Deterministic) {
  const Dataset ds = sized(500, 20, 60);
  const BatchPlan a = make_batches(ds, 32, BatchMode::Count, 99), b = make_batches(ds, 32, BatchMode::Count, 99);
  const BatchPlan c = make_batches(ds, 32, BatchMode::Count, 100);
  bool differ = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a.batches[k].d, b.batches[k].d);
    EXPECT_EQ(a.batches[k].u, b.batches[k].u);
    differ = differ || a.batches[k].d != c.batches[k].d;
  }
  EXPECT_TRUE(differ);
  EXPECT_EQ(a.order(5), b.order(5));
  EXPECT_NE(a.order(5), a.order(6));
  EXPECT_THROW(make_batches(ds, 0), std::invalid_argument);
}

TEST(Seeds, DeriveSeedSeparatesStreams) {
  std::set<std::uint64_t> s;
  for (std::uint64_t a = 0; a < 10; ++a)
    for (std::uint64_t b = 0; b < 10; ++b) s.insert(derive_seed(1, a, b));
  EXPECT_EQ(s.size(), 100u);
  EXPECT_EQ(derive_seed(5, 1, 2), derive_seed(5, 1, 2));
}
