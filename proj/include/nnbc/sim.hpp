#pragma once

// Closed-loop simulation with classical RK4 and simple stability metrics.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "nnbc/error.hpp"
#include "nnbc/nn.hpp"
#include "nnbc/system.hpp"

namespace nnbc {

enum class ExitReason { Completed, LeftDomain, EnteredUnsafe, NumericFailure };

inline const char* exit_reason_name(ExitReason r) {
  switch (r) {
    case ExitReason::Completed: return "completed";
    case ExitReason::LeftDomain: return "left-domain";
    case ExitReason::EnteredUnsafe: return "entered-unsafe";
    case ExitReason::NumericFailure: return "numeric-failure";
  }
  return "?";
}

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> inputs;  // controller output at each state
  ExitReason exit_reason = ExitReason::Completed;
  double exit_time = 0;

  bool safe() const { return exit_reason == ExitReason::Completed; }
  const std::vector<double>& final_state() const { return states.back(); }

  void write_csv(std::ostream& os, const Ccds& sys) const {
    os << "t";
    for (const auto& v : sys.state_vars) os << ',' << v;
    for (const auto& v : sys.input_vars) os << ',' << v;
    os << '\n';
    os.precision(10);
    for (std::size_t k = 0; k < times.size(); ++k) {
      os << times[k];
      for (double v : states[k]) os << ',' << v;
      for (double v : inputs[k]) os << ',' << v;
      os << '\n';
    }
    os << "# exit: " << exit_reason_name(exit_reason) << " at t=" << exit_time << '\n';
  }
};

struct SimConfig {
  double dt = 0.01;
  double t_end = 60;

  void validate() const {
    if (!(dt > 0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
    if (!(t_end >= 0) || !std::isfinite(t_end)) throw std::invalid_argument("t_end must be non-negative");
  }
};

namespace detail {

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace detail

/// Integrates x' = f(x, N_c(x)) from x0. Every recorded state is checked
/// against the domain and then the unsafe set; the run stops at the first
/// violation with the offending state as the last sample.
inline Trajectory simulate(const Ccds& sys, const Mlp& nc, std::span<const double> x0, SimConfig cfg = {}) {
  cfg.validate();
  if (static_cast<int>(x0.size()) != sys.n()) throw ShapeError("initial state has the wrong dimension");
  const ClosedLoop loop(sys, nc);
  Trajectory tr;
  std::vector<double> x(x0.begin(), x0.end());
  const std::size_t steps = static_cast<std::size_t>(std::llround(cfg.t_end / cfg.dt));
  const std::size_t n = x.size();

  auto record = [&](double t) {
    tr.times.push_back(t);
    tr.states.push_back(x);
    tr.inputs.push_back(forward(nc, x));
  };
  auto classify = [&](double t) {
    if (!detail::all_finite(x)) {
      tr.exit_reason = ExitReason::NumericFailure;
    } else if (!sys.domain.contains(x)) {
      tr.exit_reason = ExitReason::LeftDomain;
    } else if (sys.unsafe.contains(x)) {
      tr.exit_reason = ExitReason::EnteredUnsafe;
    } else {
      return false;
    }
    tr.exit_time = t;
    return true;
  };

  record(0);
  if (classify(0)) return tr;
  std::vector<double> tmp(n);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    try {
      const auto k1 = loop(x);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * cfg.dt * k1[i];
      const auto k2 = loop(tmp);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * cfg.dt * k2[i];
      const auto k3 = loop(tmp);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + cfg.dt * k3[i];
      const auto k4 = loop(tmp);
      for (std::size_t i = 0; i < n; ++i) x[i] += cfg.dt / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    } catch (const DomainError&) {
      tr.exit_reason = ExitReason::NumericFailure;
      tr.exit_time = t;
      return tr;
    }
    if (!detail::all_finite(x)) {
      tr.exit_reason = ExitReason::NumericFailure;
      tr.exit_time = t;
      return tr;
    }
    record(t);
    if (classify(t)) return tr;
  }
  tr.exit_time = tr.times.back();
  return tr;
}

/// True iff no recorded state lies in the unsafe set while inside the domain.
inline bool safety_check(const Trajectory& tr, const Ccds& sys) {
  for (const auto& x : tr.states) {
    if (sys.domain.contains(x) && sys.unsafe.contains(x)) return false;
  }
  return true;
}

struct StabilityMetrics {
  double overshoot = 0;      // max over t of |x(t) - x_o| beyond the initial distance
  double settling_time = 0;  // first time after which |x - x_o| stays within the band
  double final_error = 0;    // |x(t_end) - x_o|
  bool settled = false;
};

/// The band is `band` times the initial distance to x_o (absolute 1e-9
/// when starting at x_o).
inline StabilityMetrics stability_metrics(const Trajectory& tr, std::span<const double> xo, double band = 0.05) {
  if (tr.states.empty()) throw std::invalid_argument("empty trajectory");
  auto dist = [&](const std::vector<double>& x) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - xo[i]) * (x[i] - xo[i]);
    return std::sqrt(s);
  };
  StabilityMetrics m;
  const double d0 = dist(tr.states.front());
  const double tol = d0 > 0 ? band * d0 : 1e-9;
  double peak = 0;
  std::size_t last_out = 0;
  bool any_out = false;
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    const double d = dist(tr.states[k]);
    peak = std::max(peak, d);
    if (d > tol) {
      last_out = k;
      any_out = true;
    }
  }
  m.overshoot = std::max(0.0, peak - d0);
  m.final_error = dist(tr.states.back());
  if (!any_out) {
    m.settled = true;
    m.settling_time = tr.times.front();
  } else if (last_out + 1 < tr.states.size()) {
    m.settled = true;
    m.settling_time = tr.times[last_out + 1];
  } else {
    m.settling_time = tr.times.back();
  }
  return m;
}

}  // namespace nnbc
