#pragma once

// Interval branch-and-bound certification of the three barrier conditions:
//
//   init:   no x in X_I with N_b(x) > 0
//   unsafe: no x in X_U with N_b(x) <= 0
//   lie:    no x in X_D with N_b(x) = 0 and grad N_b(x) . f(x, N_c(x)) >= 0
//
// Boxes are explored depth first by default. A box is discharged by an interval bound,
// refuted by a concrete point checked with plain evaluation, or subdivided
// along its widest side until it is no wider than msw, at which point it is
// kept as an Unknown candidate.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nnbc/interval.hpp"
#include "nnbc/loss.hpp"
#include "nnbc/nn.hpp"
#include "nnbc/system.hpp"

namespace nnbc {

enum class Condition { Init, Unsafe, Lie };
enum class Status { Certified, Refuted, Unknown };
enum class SearchOrder { DepthFirst, BreadthFirst };

inline const char* condition_name(Condition c) {
  switch (c) {
    case Condition::Init: return "init";
    case Condition::Unsafe: return "unsafe";
    case Condition::Lie: return "lie";
  }
  return "?";
}

inline const char* status_name(Status s) {
  switch (s) {
    case Status::Certified: return "Certified";
    case Status::Refuted: return "Refuted";
    case Status::Unknown: return "Unknown";
  }
  return "?";
}

inline Condition parse_condition(const std::string& s) {
  if (s == "init") return Condition::Init;
  if (s == "unsafe") return Condition::Unsafe;
  if (s == "lie") return Condition::Lie;
  throw std::invalid_argument("unknown condition '" + s + "' (expected init, unsafe or lie)");
}

struct VerifyConfig {
  double msw = 1e-3;
  std::uint64_t max_boxes = 10'000'000;
  std::vector<Condition> conditions{Condition::Init, Condition::Unsafe, Condition::Lie};
  std::size_t keep_candidates = 64;  // candidate boxes stored per condition
  SearchOrder order = SearchOrder::DepthFirst;

  void validate() const {
    if (!(msw > 0)) throw std::invalid_argument("msw must be positive");
    if (max_boxes < 1) throw std::invalid_argument("max_boxes must be positive");
  }
};

struct ConditionResult {
  Condition condition = Condition::Init;
  Status status = Status::Certified;
  std::vector<double> witness;
  std::vector<BoxRegion> candidates;
  std::uint64_t candidate_count = 0;
  std::uint64_t boxes = 0;
  int max_depth = 0;
  double seconds = 0;
  bool budget_exhausted = false;
};

enum class BoxOutcome { Discharged, Refuted, Open };

/// Generic branch and bound; `test(box, witness)` classifies one box.
template <class Test>
ConditionResult branch_and_bound(Condition cond, const std::vector<BoxRegion>& roots, const VerifyConfig& cfg,
                                 Test&& test) {
  const auto t0 = std::chrono::steady_clock::now();
  ConditionResult res;
  res.condition = cond;
  struct Item {
    BoxRegion box;
    int depth = 0;
  };
  const bool dfs = cfg.order == SearchOrder::DepthFirst;
  std::deque<Item> stack;
  if (dfs) {
    for (auto it = roots.rbegin(); it != roots.rend(); ++it) stack.push_back({*it, 0});
  } else {
    for (const auto& r : roots) stack.push_back({r, 0});
  }
  bool refuted = false;
  while (!stack.empty()) {
    if (res.boxes >= cfg.max_boxes) {
      res.budget_exhausted = true;
      break;
    }
    Item item;
    if (dfs) {
      item = std::move(stack.back());
      stack.pop_back();
    } else {
      item = std::move(stack.front());
      stack.pop_front();
    }
    ++res.boxes;
    res.max_depth = std::max(res.max_depth, item.depth);
    std::vector<double> w;
    const BoxOutcome out = test(item.box, w);
    if (out == BoxOutcome::Refuted) {
      refuted = true;
      res.witness = std::move(w);
      break;
    }
    if (out == BoxOutcome::Discharged) continue;
    if (item.box.width() <= cfg.msw) {
      ++res.candidate_count;
      if (res.candidates.size() < cfg.keep_candidates) res.candidates.push_back(item.box);
      continue;
    }
    auto [left, right] = item.box.split();
    if (dfs) {
      stack.push_back({std::move(right), item.depth + 1});
      stack.push_back({std::move(left), item.depth + 1});
    } else {
      stack.push_back({std::move(left), item.depth + 1});
      stack.push_back({std::move(right), item.depth + 1});
    }
  }
  if (refuted) {
    res.status = Status::Refuted;
  } else if (res.candidate_count > 0 || res.budget_exhausted) {
    res.status = Status::Unknown;
  } else {
    res.status = Status::Certified;
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

/// Barrier given by a network.
class NetBarrier {
 public:
  explicit NetBarrier(const Mlp& net) : net_(&net) {
    if (net.output_dim() != 1) throw ShapeError("barrier network must have a single output");
  }
  int dim() const { return net_->input_dim(); }
  double value(std::span<const double> x) const { return forward1<double>(*net_, x); }
  Interval value(const BoxRegion& b) const { return iv_net(*net_, b); }
  std::vector<double> grad(std::span<const double> x) const { return input_grad<double>(*net_, x); }
  std::vector<Interval> grad(const BoxRegion& b) const { return iv_net_grad(*net_, b); }

 private:
  const Mlp* net_;
};

/// Barrier given by an expression over the state variables (slots 0..n-1).
class ExprBarrier {
 public:
  ExprBarrier(Expr b, const std::vector<std::string>& state) : b_(std::move(b)) {
    for (const auto& v : state) g_.push_back(diff(b_, v));
  }
  int dim() const { return static_cast<int>(g_.size()); }
  double value(std::span<const double> x) const { return evaluate<double>(b_, x); }
  Interval value(const BoxRegion& b) const { return evaluate<Interval>(b_, b.dims); }
  std::vector<double> grad(std::span<const double> x) const {
    std::vector<double> out;
    for (const auto& g : g_) out.push_back(evaluate<double>(g, x));
    return out;
  }
  std::vector<Interval> grad(const BoxRegion& b) const {
    std::vector<Interval> out;
    for (const auto& g : g_) out.push_back(evaluate<Interval>(g, b.dims));
    return out;
  }

 private:
  Expr b_;
  std::vector<Expr> g_;
};

template <class B>
ConditionResult check_init(const Ccds& sys, const B& barrier, const VerifyConfig& cfg) {
  return branch_and_bound(Condition::Init, sys.init.cover(), cfg, [&](const BoxRegion& box, std::vector<double>& w) {
    if (barrier.value(box).hi <= 0) return BoxOutcome::Discharged;
    auto mid = box.midpoint();
    if (barrier.value(std::span<const double>(mid)) > 0) {
      w = std::move(mid);
      return BoxOutcome::Refuted;
    }
    return BoxOutcome::Open;
  });
}

inline ConditionResult check_init(const Ccds& sys, const Mlp& nb, const VerifyConfig& cfg) {
  return check_init(sys, NetBarrier(nb), cfg);
}

template <class B>
ConditionResult check_unsafe(const Ccds& sys, const B& barrier, const VerifyConfig& cfg) {
  return branch_and_bound(Condition::Unsafe, sys.unsafe.cover(), cfg,
                          [&](const BoxRegion& box, std::vector<double>& w) {
                            if (barrier.value(box).lo > 0) return BoxOutcome::Discharged;
                            auto mid = box.midpoint();
                            if (barrier.value(std::span<const double>(mid)) <= 0) {
                              w = std::move(mid);
                              return BoxOutcome::Refuted;
                            }
                            return BoxOutcome::Open;
                          });
}

inline ConditionResult check_unsafe(const Ccds& sys, const Mlp& nb, const VerifyConfig& cfg) {
  return check_unsafe(sys, NetBarrier(nb), cfg);
}

inline constexpr double kLevelSetTolerance = 1e-9;

/// Plain-evaluation Lie derivative grad B(x) . f(x, N_c(x)).
template <class B>
double lie_derivative(const ClosedLoop& loop, const B& barrier, std::span<const double> x) {
  return dot(barrier.grad(x), loop(x));
}

namespace detail {

// Bisects the segment p -> q (B of opposite signs at the ends) down to a
// point with |B| <= kLevelSetTolerance.
template <class B>
bool bisect_to_level_set(const B& barrier, std::vector<double> p, std::vector<double> q, std::vector<double>& out) {
  double fp = barrier.value(std::span<const double>(p));
  for (int it = 0; it < 200; ++it) {
    std::vector<double> m(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) m[i] = p[i] + (q[i] - p[i]) / 2;
    const double fm = barrier.value(std::span<const double>(m));
    if (std::fabs(fm) <= kLevelSetTolerance) {
      out = std::move(m);
      return true;
    }
    if ((fm > 0) == (fp > 0)) {
      p = std::move(m);
      fp = fm;
    } else {
      q = std::move(m);
    }
  }
  return false;
}

// Looks for a refuting point of the lie condition in `box`: a point on the
// level set (up to tolerance) where the Lie derivative is >= 0.
template <class B>
bool find_lie_witness(const ClosedLoop& loop, const B& barrier, const BoxRegion& box, std::vector<double>& w) {
  const std::vector<double> mid = box.midpoint();
  if (lie_derivative(loop, barrier, mid) < 0) return false;
  const double fmid = barrier.value(std::span<const double>(mid));
  auto confirm = [&](std::vector<double> p) {
    if (std::fabs(barrier.value(std::span<const double>(p))) <= kLevelSetTolerance &&
        lie_derivative(loop, barrier, p) >= 0) {
      w = std::move(p);
      return true;
    }
    return false;
  };
  if (std::fabs(fmid) <= kLevelSetTolerance) return confirm(mid);
  for (std::size_t d = 0; d < box.size(); ++d) {
    for (double end : {box[d].lo, box[d].hi}) {
      std::vector<double> q = mid;
      q[d] = end;
      const double fq = barrier.value(std::span<const double>(q));
      if ((fq > 0) == (fmid > 0) && fq != 0) continue;
      std::vector<double> p;
      if (bisect_to_level_set(barrier, mid, q, p) && confirm(std::move(p))) return true;
    }
  }
  return false;
}

}  // namespace detail

template <class B>
ConditionResult check_lie(const Ccds& sys, const Mlp& nc, const B& barrier, const VerifyConfig& cfg) {
  const ClosedLoop loop(sys, nc);
  return branch_and_bound(Condition::Lie, sys.domain.cover(), cfg, [&](const BoxRegion& box, std::vector<double>& w) {
    if (!barrier.value(box).contains_zero()) return BoxOutcome::Discharged;
    try {
      const auto g = barrier.grad(box);
      const auto f = loop.operator()<Interval>(box.dims);
      Interval lie = g[0] * f[0];
      for (std::size_t i = 1; i < g.size(); ++i) lie = lie + g[i] * f[i];
      if (lie.hi < 0) return BoxOutcome::Discharged;
    } catch (const DomainError&) {
      // no enclosure on this box; keep splitting
    }
    try {
      if (detail::find_lie_witness(loop, barrier, box, w)) return BoxOutcome::Refuted;
    } catch (const DomainError&) {
    }
    return BoxOutcome::Open;
  });
}

inline ConditionResult check_lie(const Ccds& sys, const Mlp& nc, const Mlp& nb, const VerifyConfig& cfg) {
  return check_lie(sys, nc, NetBarrier(nb), cfg);
}

struct Verdict {
  std::vector<ConditionResult> results;

  Status overall() const {
    bool unknown = false;
    for (const auto& r : results) {
      if (r.status == Status::Refuted) return Status::Refuted;
      if (r.status == Status::Unknown) unknown = true;
    }
    return unknown ? Status::Unknown : Status::Certified;
  }

  const ConditionResult* find(Condition c) const {
    for (const auto& r : results) {
      if (r.condition == c) return &r;
    }
    return nullptr;
  }

  /// 0 all certified, 3 any refuted, 4 otherwise.
  int exit_code() const {
    switch (overall()) {
      case Status::Certified: return 0;
      case Status::Refuted: return 3;
      case Status::Unknown: return 4;
    }
    return 4;
  }

  std::string text() const {
    std::ostringstream os;
    os.precision(17);
    for (const auto& r : results) {
      os << condition_name(r.condition) << ": " << status_name(r.status) << " boxes=" << r.boxes
         << " max_depth=" << r.max_depth << " candidates=" << r.candidate_count;
      if (r.budget_exhausted) os << " budget_exhausted";
      os << " seconds=" << r.seconds;
      if (!r.witness.empty()) {
        os << " witness=";
        for (std::size_t i = 0; i < r.witness.size(); ++i) os << (i ? "," : "") << r.witness[i];
      }
      os << '\n';
      for (const auto& b : r.candidates) os << "  candidate " << b << '\n';
    }
    os << "overall: " << status_name(overall()) << '\n';
    return os.str();
  }

  nlohmann::json json() const {
    nlohmann::json j;
    j["overall"] = status_name(overall());
    j["conditions"] = nlohmann::json::array();
    for (const auto& r : results) {
      nlohmann::json c;
      c["condition"] = condition_name(r.condition);
      c["status"] = status_name(r.status);
      c["witness"] = r.witness;
      c["boxes"] = r.boxes;
      c["max_depth"] = r.max_depth;
      c["candidate_count"] = r.candidate_count;
      c["budget_exhausted"] = r.budget_exhausted;
      c["seconds"] = r.seconds;
      nlohmann::json cands = nlohmann::json::array();
      for (const auto& b : r.candidates) {
        nlohmann::json box = nlohmann::json::array();
        for (const auto& d : b.dims) box.push_back({d.lo, d.hi});
        cands.push_back(box);
      }
      c["candidates"] = cands;
      j["conditions"].push_back(c);
    }
    return j;
  }
};

template <class B>
Verdict verify_barrier(const Ccds& sys, const Mlp& nc, const B& barrier, const VerifyConfig& cfg) {
  cfg.validate();
  if (barrier.dim() != sys.n()) throw ShapeError("barrier dimensions do not match the system");
  Verdict v;
  for (Condition c : cfg.conditions) {
    switch (c) {
      case Condition::Init: v.results.push_back(check_init(sys, barrier, cfg)); break;
      case Condition::Unsafe: v.results.push_back(check_unsafe(sys, barrier, cfg)); break;
      case Condition::Lie: v.results.push_back(check_lie(sys, nc, barrier, cfg)); break;
    }
  }
  return v;
}

inline Verdict verify(const Ccds& sys, const Mlp& nc, const Mlp& nb, const VerifyConfig& cfg) {
  return verify_barrier(sys, nc, NetBarrier(nb), cfg);
}

}  // namespace nnbc
