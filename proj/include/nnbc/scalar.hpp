#pragma once

// Scalar primitives shared by plain evaluation, the autodiff tape and the
// interval evaluator. Generic code in this library calls these unqualified so
// that overloads for Var and Interval are picked up by argument-dependent
// lookup. Kink conventions: max/min pick the second operand on ties.

#include <cmath>
#include <numbers>

#include "nnbc/error.hpp"

namespace nnbc {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTanPoleTolerance = 1e-12;

inline bool near_tan_pole(double x) {
  return std::fabs(std::remainder(x - kPi / 2, kPi)) < kTanPoleTolerance;
}

inline double value(double x) { return x; }

inline double square(double x) { return x * x; }
inline double max(double a, double b) { return a > b ? a : b; }
inline double min(double a, double b) { return a < b ? a : b; }
inline double abs(double x) { return std::fabs(x); }
inline double step(double u) { return u > 0 ? 1.0 : 0.0; }

inline double sqrt(double x) {
  if (x < 0) throw DomainError("sqrt of negative value");
  return std::sqrt(x);
}
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double tan(double x) {
  if (near_tan_pole(x)) throw DomainError("tan evaluated at a pole");
  return std::tan(x);
}

inline double checked_div(double a, double b) {
  if (b == 0) throw DomainError("division by zero");
  return a / b;
}

/// Integer power by repeated multiplication, left to right.
template <class S>
S pow_int(const S& x, int n) {
  S r = x;
  for (int i = 1; i < n; ++i) r = r * x;
  return r;
}

}  // namespace nnbc
