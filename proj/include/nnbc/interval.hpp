#pragma once

// Closed real intervals with outward padding and axis-aligned boxes.
//
// Every rounded primitive widens its result by kPadUlps units in the last
// place on each side instead of switching the FPU rounding mode. The
// primitives below are each correctly rounded or within one ulp (libm
// sin/cos/tan), so the padded result encloses the exact real range.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "nnbc/error.hpp"
#include "nnbc/scalar.hpp"

namespace nnbc {

inline constexpr int kPadUlps = 4;

inline double next_down(double x) {
  if (std::isnan(x) || x == -std::numeric_limits<double>::infinity()) return x;
  if (x == 0) return -std::numeric_limits<double>::denorm_min();
  auto bits = std::bit_cast<std::uint64_t>(x);
  bits = x > 0 ? bits - 1 : bits + 1;
  return std::bit_cast<double>(bits);
}

inline double next_up(double x) { return -next_down(-x); }

inline double pad_down(double x, int ulps = kPadUlps) {
  for (int i = 0; i < ulps; ++i) x = next_down(x);
  return x;
}

inline double pad_up(double x, int ulps = kPadUlps) {
  for (int i = 0; i < ulps; ++i) x = next_up(x);
  return x;
}

struct Interval {
  double lo = 0;
  double hi = 0;

  Interval() = default;
  Interval(double v) : lo(v), hi(v) {}  // NOLINT: points convert implicitly
  Interval(double l, double h) : lo(l), hi(h) {
    if (!(l <= h)) throw DomainError("interval with lo > hi");
  }

  static Interval padded(double l, double h) { return {pad_down(l), pad_up(h)}; }

  double width() const { return hi - lo; }
  double mid() const { return lo + (hi - lo) / 2; }
  bool contains(double x) const { return lo <= x && x <= hi; }
  bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
  bool contains_zero() const { return lo <= 0 && 0 <= hi; }

  friend bool operator==(const Interval&, const Interval&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Interval& x) {
  return os << '[' << x.lo << ", " << x.hi << ']';
}

inline Interval hull(const Interval& a, const Interval& b) {
  return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

inline double value(const Interval& x) { return x.mid(); }

inline Interval operator-(const Interval& a) { return {-a.hi, -a.lo}; }

namespace detail {
// A floating-point sum that comes out as exactly 0 is exact (no underflow in
// addition), so zero endpoints are left unpadded.
inline Interval padded_sum(double lo, double hi) {
  return {lo == 0 ? 0.0 : pad_down(lo), hi == 0 ? 0.0 : pad_up(hi)};
}
}  // namespace detail

inline Interval operator+(const Interval& a, const Interval& b) {
  return detail::padded_sum(a.lo + b.lo, a.hi + b.hi);
}

inline Interval operator-(const Interval& a, const Interval& b) {
  return detail::padded_sum(a.lo - b.hi, a.hi - b.lo);
}

inline Interval operator*(const Interval& a, const Interval& b) {
  if (a == Interval(0.0) || b == Interval(0.0)) return Interval(0.0);
  const double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo, p4 = a.hi * b.hi;
  return Interval::padded(std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4}));
}

inline Interval operator*(double k, const Interval& a) {
  if (k == 0) return Interval(0.0);
  return k > 0 ? Interval::padded(k * a.lo, k * a.hi) : Interval::padded(k * a.hi, k * a.lo);
}
inline Interval operator*(const Interval& a, double k) { return k * a; }

inline Interval operator/(const Interval& a, const Interval& b) {
  if (b.contains_zero()) throw DomainError("interval division by an interval containing zero");
  const double q1 = a.lo / b.lo, q2 = a.lo / b.hi, q3 = a.hi / b.lo, q4 = a.hi / b.hi;
  return Interval::padded(std::min({q1, q2, q3, q4}), std::max({q1, q2, q3, q4}));
}

inline Interval operator+(const Interval& a, double b) { return a + Interval(b); }
inline Interval operator+(double a, const Interval& b) { return Interval(a) + b; }
inline Interval operator-(const Interval& a, double b) { return a - Interval(b); }
inline Interval operator-(double a, const Interval& b) { return Interval(a) - b; }
inline Interval operator/(const Interval& a, double b) { return a / Interval(b); }
inline Interval operator/(double a, const Interval& b) { return Interval(a) / b; }

inline Interval& operator+=(Interval& a, const Interval& b) { return a = a + b; }

inline Interval checked_div(const Interval& a, const Interval& b) { return a / b; }

inline Interval square(const Interval& a) {
  if (a.lo >= 0) return Interval::padded(a.lo * a.lo, a.hi * a.hi);
  if (a.hi <= 0) return Interval::padded(a.hi * a.hi, a.lo * a.lo);
  const double m = std::max(-a.lo, a.hi);
  return {0.0, pad_up(m * m)};
}

inline Interval abs(const Interval& a) {
  if (a.lo >= 0) return a;
  if (a.hi <= 0) return -a;
  return {0.0, std::max(-a.lo, a.hi)};
}

inline Interval max(const Interval& a, const Interval& b) {
  return {std::max(a.lo, b.lo), std::max(a.hi, b.hi)};
}
inline Interval min(const Interval& a, const Interval& b) {
  return {std::min(a.lo, b.lo), std::min(a.hi, b.hi)};
}
inline Interval max(double a, const Interval& b) { return max(Interval(a), b); }
inline Interval min(double a, const Interval& b) { return min(Interval(a), b); }

inline Interval step(const Interval& u) {
  if (u.lo > 0) return Interval(1.0);
  if (u.hi <= 0) return Interval(0.0);
  return {0.0, 1.0};
}

inline Interval sqrt(const Interval& a) {
  if (a.hi < 0) throw DomainError("interval sqrt of a negative interval");
  const double lo = a.lo > 0 ? pad_down(std::sqrt(a.lo)) : 0.0;
  return {std::max(0.0, lo), pad_up(std::sqrt(a.hi))};
}

namespace detail {

// True when offset + k * period lies in [x.lo, x.hi] for some integer k,
// decided with slack so that borderline cases report containment.
inline bool contains_periodic(const Interval& x, double offset, double period) {
  const double k = std::ceil((x.lo - offset) / period - 1e-9);
  return offset + k * period <= x.hi + 1e-9;
}

}  // namespace detail

inline Interval sin(const Interval& x) {
  if (x.width() >= 2 * kPi) return {-1.0, 1.0};
  const double a = std::sin(x.lo), b = std::sin(x.hi);
  double lo = pad_down(std::min(a, b)), hi = pad_up(std::max(a, b));
  if (detail::contains_periodic(x, kPi / 2, 2 * kPi)) hi = 1.0;
  if (detail::contains_periodic(x, -kPi / 2, 2 * kPi)) lo = -1.0;
  return {std::max(lo, -1.0), std::min(hi, 1.0)};
}

inline Interval cos(const Interval& x) {
  if (x.width() >= 2 * kPi) return {-1.0, 1.0};
  const double a = std::cos(x.lo), b = std::cos(x.hi);
  double lo = pad_down(std::min(a, b)), hi = pad_up(std::max(a, b));
  if (detail::contains_periodic(x, 0.0, 2 * kPi)) hi = 1.0;
  if (detail::contains_periodic(x, kPi, 2 * kPi)) lo = -1.0;
  return {std::max(lo, -1.0), std::min(hi, 1.0)};
}

inline Interval tan(const Interval& x) {
  if (x.width() >= kPi || detail::contains_periodic(x, kPi / 2, kPi)) {
    throw DomainError("interval tan spans a pole");
  }
  return Interval::padded(std::tan(x.lo), std::tan(x.hi));
}

/// Integer power using monotonicity of |x|^n; tighter than repeated products.
inline Interval pow_int(const Interval& x, int n) {
  if (n == 1) return x;
  auto raise = [n](double v) {
    double r = v;
    for (int i = 1; i < n; ++i) r *= v;
    return r;
  };
  const int ulps = kPadUlps * n;
  if (n % 2 == 1) return {pad_down(raise(x.lo), ulps), pad_up(raise(x.hi), ulps)};
  const Interval m = abs(x);
  const double lo = m.lo == 0 ? 0.0 : std::max(0.0, pad_down(raise(m.lo), ulps));
  return {lo, pad_up(raise(m.hi), ulps)};
}

// Bent-ReLU a(x) = 0.5 x + sqrt(0.25 x^2 + 1e-4) and its derivative are both
// strictly increasing, so their range over [lo, hi] is spanned by the
// endpoint values. Endpoints are evaluated in interval arithmetic because the
// closed form cancels catastrophically for negative arguments.

inline Interval bent_relu_at(double x) {
  const Interval p(x);
  return 0.5 * p + sqrt(0.25 * square(p) + Interval(1e-4));
}

inline Interval bent_relu_deriv_at(double x) {
  const Interval p(x);
  return Interval(0.5) + (0.25 * p) / sqrt(0.25 * square(p) + Interval(1e-4));
}

inline Interval iv_bent_relu(const Interval& x) {
  return {std::max(0.0, bent_relu_at(x.lo).lo), bent_relu_at(x.hi).hi};
}

inline Interval iv_bent_relu_deriv(const Interval& x) {
  return {std::max(0.0, bent_relu_deriv_at(x.lo).lo), std::min(1.0, bent_relu_deriv_at(x.hi).hi)};
}

/// Axis-aligned box, one closed interval per dimension.
struct BoxRegion {
  std::vector<Interval> dims;

  BoxRegion() = default;
  explicit BoxRegion(std::vector<Interval> d) : dims(std::move(d)) {}

  std::size_t size() const { return dims.size(); }
  const Interval& operator[](std::size_t i) const { return dims[i]; }
  Interval& operator[](std::size_t i) { return dims[i]; }

  double width() const {
    double w = 0;
    for (const auto& d : dims) w = std::max(w, d.width());
    return w;
  }

  std::size_t widest_dim() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < dims.size(); ++i) {
      if (dims[i].width() > dims[best].width()) best = i;
    }
    return best;
  }

  std::vector<double> midpoint() const {
    std::vector<double> m(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) m[i] = dims[i].mid();
    return m;
  }

  bool contains(std::span<const double> x) const {
    if (x.size() != dims.size()) throw ShapeError("box dimension mismatch");
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (!dims[i].contains(x[i])) return false;
    }
    return true;
  }

  bool contains(const BoxRegion& b) const {
    if (b.size() != size()) throw ShapeError("box dimension mismatch");
    for (std::size_t i = 0; i < dims.size(); ++i) {
      if (!dims[i].contains(b.dims[i])) return false;
    }
    return true;
  }

  /// Bisects the widest dimension (lowest index on ties) at its midpoint.
  std::pair<BoxRegion, BoxRegion> split() const {
    const std::size_t d = widest_dim();
    const double m = dims[d].mid();
    BoxRegion left = *this, right = *this;
    left.dims[d].hi = m;
    right.dims[d].lo = m;
    return {std::move(left), std::move(right)};
  }

  friend bool operator==(const BoxRegion&, const BoxRegion&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const BoxRegion& b) {
  for (std::size_t i = 0; i < b.size(); ++i) os << (i ? " x " : "") << b.dims[i];
  return os;
}

}  // namespace nnbc
