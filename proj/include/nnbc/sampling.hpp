#pragma once

// Grid training sets over the regions of a system and split them into
// mini-batches.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "nnbc/interval.hpp"
#include "nnbc/system.hpp"

namespace nnbc {

/// SplitMix64 finalizer; used to derive independent seeds from one root.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  return mix64(mix64(mix64(mix64(root) ^ a) ^ b) ^ c);
}

/// Points of one dimension stored row by row.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return dim_ ? data_.size() / dim_ : 0; }
  bool empty() const { return data_.empty(); }
  std::span<const double> operator[](std::size_t i) const { return {data_.data() + i * dim_, static_cast<std::size_t>(dim_)}; }
  void push_back(std::span<const double> p) { data_.insert(data_.end(), p.begin(), p.end()); }
  void reserve(std::size_t n) { data_.reserve(n * dim_); }

 private:
  int dim_ = 0;
  std::vector<double> data_;
};

/// Coordinate k of `count` uniformly spaced values on [lo, hi], endpoints
/// included; a single point sits at the midpoint.
inline double grid_coord(const Interval& r, int count, int k) {
  if (count == 1) return r.mid();
  if (k == count - 1) return r.hi;
  return r.lo + (r.hi - r.lo) * k / (count - 1);
}

/// Cartesian grid over the region's bounding box, first dimension slowest,
/// filtered by membership.
inline PointSet grid_region(const Region& r, std::span<const int> counts) {
  const BoxRegion& box = r.bounding_box();
  if (counts.size() != box.size()) throw ShapeError("grid count dimension mismatch");
  for (int c : counts) {
    if (c < 1) throw std::invalid_argument("grid counts must be positive");
  }
  const int n = static_cast<int>(box.size());
  PointSet out(n);
  std::vector<int> idx(n, 0);
  std::vector<double> p(n);
  while (true) {
    for (int d = 0; d < n; ++d) p[d] = grid_coord(box[d], counts[d], idx[d]);
    if (r.contains(p)) out.push_back(p);
    int d = n - 1;
    while (d >= 0 && ++idx[d] == counts[d]) idx[d--] = 0;
    if (d < 0) break;
  }
  return out;
}

/// Mesh densities; zero entries select the defaults (256 per dimension for
/// n <= 2, 64 otherwise, with init/unsafe grids matching the domain spacing).
struct MeshConfig {
  int domain = 0;
  int init = 0;
  int unsafe = 0;
};

inline int default_domain_count(int n) { return n <= 2 ? 256 : 64; }

struct Dataset {
  PointSet s_d, s_i, s_u;
  std::vector<int> domain_counts, init_counts, unsafe_counts;
};

inline std::vector<int> counts_matching_spacing(const BoxRegion& box, const BoxRegion& domain,
                                                std::span<const int> domain_counts) {
  std::vector<int> out;
  for (std::size_t d = 0; d < box.size(); ++d) {
    const int dc = domain_counts[d];
    if (dc <= 1 || domain[d].width() == 0) {
      out.push_back(1);
      continue;
    }
    const double spacing = domain[d].width() / (dc - 1);
    out.push_back(static_cast<int>(std::ceil(box[d].width() / spacing - 1e-9)) + 1);
  }
  return out;
}

inline Dataset make_dataset(const Ccds& sys, const MeshConfig& mesh = {}) {
  const int n = sys.n();
  Dataset ds;
  const int dc = mesh.domain > 0 ? mesh.domain : default_domain_count(n);
  ds.domain_counts.assign(n, dc);
  const BoxRegion& dom = sys.domain.bounding_box();
  ds.init_counts = mesh.init > 0 ? std::vector<int>(n, mesh.init)
                                 : counts_matching_spacing(sys.init.bounding_box(), dom, ds.domain_counts);
  ds.unsafe_counts = mesh.unsafe > 0 ? std::vector<int>(n, mesh.unsafe)
                                     : counts_matching_spacing(sys.unsafe.bounding_box(), dom, ds.domain_counts);
  ds.s_d = grid_region(sys.domain, ds.domain_counts);
  ds.s_i = grid_region(sys.init, ds.init_counts);
  ds.s_u = grid_region(sys.unsafe, ds.unsafe_counts);
  return ds;
}

inline void write_csv(std::ostream& os, const PointSet& s) {
  os.precision(17);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto p = s[i];
    for (int d = 0; d < s.dim(); ++d) os << (d ? "," : "") << p[d];
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Mini-batches

enum class BatchMode { Count, Size };

struct Batch {
  std::vector<std::uint32_t> d, i, u;  // indices into s_d, s_i, s_u
};

/// Slices of a seeded permutation of each set; sets with fewer points than
/// batches are cycled so that batch k holds permuted point k mod |S|.
struct BatchPlan {
  std::vector<Batch> batches;

  std::size_t size() const { return batches.size(); }

  /// Batch visiting order for one epoch.
  std::vector<std::size_t> order(std::uint64_t seed) const {
    std::vector<std::size_t> o(batches.size());
    std::iota(o.begin(), o.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(o.begin(), o.end(), rng);
    return o;
  }
};

inline std::size_t batch_count(const Dataset& ds, int n_batch, BatchMode mode) {
  if (n_batch < 1) throw std::invalid_argument("n_batch must be positive");
  if (mode == BatchMode::Count) return static_cast<std::size_t>(n_batch);
  const std::size_t largest = std::max({ds.s_d.size(), ds.s_i.size(), ds.s_u.size()});
  return std::max<std::size_t>(1, (largest + n_batch - 1) / n_batch);
}

inline BatchPlan make_batches(const Dataset& ds, int n_batch, BatchMode mode = BatchMode::Count,
                              std::uint64_t seed = 0) {
  const std::size_t k = batch_count(ds, n_batch, mode);
  BatchPlan plan;
  plan.batches.resize(k);
  auto split = [k, &plan](std::size_t total, std::vector<std::uint32_t> Batch::*member, std::uint64_t s) {
    if (total == 0) return;
    std::vector<std::uint32_t> perm(total);
    std::iota(perm.begin(), perm.end(), std::uint32_t{0});
    std::mt19937_64 rng(s);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t b = 0; b < k; ++b) {
      auto& dst = plan.batches[b].*member;
      if (total < k) {
        dst.push_back(perm[b % total]);
        continue;
      }
      const std::size_t lo = b * total / k, hi = (b + 1) * total / k;
      for (std::size_t i = lo; i < hi; ++i) dst.push_back(perm[i]);
    }
  };
  split(ds.s_d.size(), &Batch::d, derive_seed(seed, 1));
  split(ds.s_i.size(), &Batch::i, derive_seed(seed, 2));
  split(ds.s_u.size(), &Batch::u, derive_seed(seed, 3));
  return plan;
}

}  // namespace nnbc
