#pragma once

// Restart / epoch / mini-batch SGD training of the controller and barrier.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nnbc/error.hpp"
#include "nnbc/loss.hpp"
#include "nnbc/nn.hpp"
#include "nnbc/sampling.hpp"
#include "nnbc/system.hpp"

namespace nnbc {

struct LrSchedule {
  enum class Kind { Fixed, Linear, Adaptive };
  Kind kind = Kind::Fixed;
  double start = 0.1;
  double end = 0.1;  // Linear: final value; Adaptive: cap
  int window = 5;
  double factor = 1.5;

  static LrSchedule fixed(double lr) { return {Kind::Fixed, lr, lr, 5, 1.5}; }
  static LrSchedule linear(double a, double b) { return {Kind::Linear, a, b, 5, 1.5}; }
  static LrSchedule adaptive(double a, double cap, int window = 5, double factor = 1.5) {
    return {Kind::Adaptive, a, cap, window, factor};
  }

  void validate() const {
    if (!(start > 0) || !(end > 0)) throw std::invalid_argument("learning rates must be positive");
    if (kind != Kind::Fixed && start > end) throw std::invalid_argument("schedule start must not exceed its end/cap");
    if (window < 1 || !(factor >= 1)) throw std::invalid_argument("adaptive window >= 1 and factor >= 1 required");
  }
};

/// Per-restart learning-rate state.
class LrState {
 public:
  LrState(const LrSchedule& s, int n_epoch) : s_(s), n_epoch_(n_epoch), lr_(s.start) {}

  double lr() const { return lr_; }

  /// Called after each epoch with that epoch's loss; sets the rate for the
  /// next epoch.
  void end_epoch(int epoch, double loss) {
    switch (s_.kind) {
      case LrSchedule::Kind::Fixed: break;
      case LrSchedule::Kind::Linear: {
        const int next = epoch + 1;
        const double t = n_epoch_ > 1 ? std::min(1.0, static_cast<double>(next) / (n_epoch_ - 1)) : 1.0;
        lr_ = s_.start + (s_.end - s_.start) * t;
        break;
      }
      case LrSchedule::Kind::Adaptive: {
        history_.push_back(loss);
        if (static_cast<int>(history_.size()) > s_.window) {
          const double old = history_[history_.size() - 1 - s_.window];
          if (old - loss < 0.01 * old) {
            lr_ = std::min(s_.end, lr_ * s_.factor);
            history_.clear();
          }
        }
        break;
      }
    }
  }

 private:
  LrSchedule s_;
  int n_epoch_;
  double lr_;
  std::vector<double> history_;
};

struct TrainConfig {
  int n_restart = 5;
  int n_epoch = 100;
  int n_batch = 4096;
  BatchMode batch_mode = BatchMode::Count;
  LrSchedule lr = LrSchedule::fixed(0.1);
  LossConfig loss;
  std::uint64_t seed = 0;
  std::string warm_start;
  MeshConfig mesh;
  int controller_hidden = 5;
  int barrier_hidden = 10;
  double control_bound = 0;  // > 0 selects a Hardtanh controller output

  void validate() const {
    if (n_restart < 1) throw std::invalid_argument("n_restart must be >= 1");
    if (n_epoch < 0) throw std::invalid_argument("n_epoch must be >= 0");
    if (n_batch < 1) throw std::invalid_argument("n_batch must be >= 1");
    if (controller_hidden < 1 || barrier_hidden < 1) throw std::invalid_argument("hidden widths must be >= 1");
    if (control_bound < 0) throw std::invalid_argument("control_bound must be >= 0");
    lr.validate();
    loss.validate();
  }
};

inline std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string lr_schedule_text(const LrSchedule& s) {
  switch (s.kind) {
    case LrSchedule::Kind::Fixed: return "fixed";
    case LrSchedule::Kind::Linear: return "linear " + format_real(s.start) + " " + format_real(s.end);
    case LrSchedule::Kind::Adaptive:
      return "adaptive " + format_real(s.start) + " " + format_real(s.end) + " " + std::to_string(s.window) + " " +
             format_real(s.factor);
  }
  return "";
}

/// Config file text; parse_train_config(config_text(c)) == c.
inline std::string config_text(const TrainConfig& c) {
  std::ostringstream os;
  os << "n_restart = " << c.n_restart << '\n';
  os << "n_epoch = " << c.n_epoch << '\n';
  os << "n_batch = " << c.n_batch << '\n';
  os << "batch_mode = " << (c.batch_mode == BatchMode::Count ? "count" : "size") << '\n';
  os << "lr = " << format_real(c.lr.start) << '\n';
  os << "lr_schedule = " << lr_schedule_text(c.lr) << '\n';
  for (int i = 0; i < 6; ++i) os << 'c' << i + 1 << " = " << format_real(c.loss.c[i]) << '\n';
  for (int i = 0; i < 8; ++i) os << "eps" << i + 1 << " = " << format_real(c.loss.eps[i]) << '\n';
  os << "l6_mode = " << (c.loss.l6_per_batch ? "batch" : "epoch") << '\n';
  os << "seed = " << c.seed << '\n';
  if (!c.warm_start.empty()) os << "warm_start = " << c.warm_start << '\n';
  os << "mesh_domain = " << c.mesh.domain << '\n';
  os << "mesh_init = " << c.mesh.init << '\n';
  os << "mesh_unsafe = " << c.mesh.unsafe << '\n';
  os << "controller_hidden = " << c.controller_hidden << '\n';
  os << "barrier_hidden = " << c.barrier_hidden << '\n';
  os << "control_bound = " << format_real(c.control_bound) << '\n';
  return os.str();
}

inline TrainConfig parse_train_config(const std::string& text) {
  TrainConfig c;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  std::optional<std::string> schedule;
  auto number = [&](const std::string& s) {
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
      throw ParseError("invalid number '" + s + "'", line, 1);
    }
    return v;
  };
  auto integer = [&](const std::string& s) {
    const double v = number(s);
    if (v != std::floor(v) || std::fabs(v) > 2e9) throw ParseError("expected an integer, got '" + s + "'", line, 1);
    return static_cast<int>(v);
  };
  while (std::getline(in, raw)) {
    ++line;
    if (auto h = raw.find('#'); h != std::string::npos) raw.resize(h);
    const std::string body = detail::trim(raw);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line, 1);
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string val = detail::trim(body.substr(eq + 1));
    if (val.empty()) throw ParseError("missing value for '" + key + "'", line, 1);
    if (key == "n_restart") {
      c.n_restart = integer(val);
    } else if (key == "n_epoch") {
      c.n_epoch = integer(val);
    } else if (key == "n_batch") {
      c.n_batch = integer(val);
    } else if (key == "batch_mode") {
      if (val != "count" && val != "size") throw ParseError("batch_mode must be count or size", line, 1);
      c.batch_mode = val == "count" ? BatchMode::Count : BatchMode::Size;
    } else if (key == "lr") {
      c.lr.start = number(val);
    } else if (key == "lr_schedule") {
      schedule = val;
    } else if (key.size() == 2 && key[0] == 'c' && key[1] >= '1' && key[1] <= '6') {
      c.loss.c[key[1] - '1'] = number(val);
    } else if (key.size() == 4 && key.rfind("eps", 0) == 0 && key[3] >= '1' && key[3] <= '8') {
      c.loss.eps[key[3] - '1'] = number(val);
    } else if (key == "l6_mode") {
      if (val != "batch" && val != "epoch") throw ParseError("l6_mode must be batch or epoch", line, 1);
      c.loss.l6_per_batch = val == "batch";
    } else if (key == "seed") {
      const auto res = std::from_chars(val.data(), val.data() + val.size(), c.seed);
      if (res.ec != std::errc() || res.ptr != val.data() + val.size()) throw ParseError("invalid seed", line, 1);
    } else if (key == "warm_start") {
      c.warm_start = val;
    } else if (key == "mesh_domain") {
      c.mesh.domain = integer(val);
    } else if (key == "mesh_init") {
      c.mesh.init = integer(val);
    } else if (key == "mesh_unsafe") {
      c.mesh.unsafe = integer(val);
    } else if (key == "controller_hidden") {
      c.controller_hidden = integer(val);
    } else if (key == "barrier_hidden") {
      c.barrier_hidden = integer(val);
    } else if (key == "control_bound") {
      c.control_bound = number(val);
    } else {
      throw ParseError("unknown key '" + key + "'", line, 1);
    }
  }
  if (schedule) {
    std::istringstream ss(*schedule);
    std::vector<std::string> w;
    for (std::string x; ss >> x;) w.push_back(x);
    if (w[0] == "fixed" && w.size() == 1) {
      c.lr = LrSchedule::fixed(c.lr.start);
    } else if (w[0] == "linear" && w.size() == 3) {
      c.lr = LrSchedule::linear(number(w[1]), number(w[2]));
    } else if (w[0] == "adaptive" && (w.size() == 3 || w.size() == 5)) {
      c.lr = LrSchedule::adaptive(number(w[1]), number(w[2]));
      if (w.size() == 5) {
        c.lr.window = integer(w[3]);
        c.lr.factor = number(w[4]);
      }
    } else {
      throw ParseError("lr_schedule must be 'fixed', 'linear a b' or 'adaptive a cap [window factor]'", 0, 0);
    }
  } else {
    c.lr = LrSchedule::fixed(c.lr.start);
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
  return c;
}

inline TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str());
}

// ---------------------------------------------------------------------------

struct TrainReport {
  bool success = false;
  int restarts_used = 0;  // re-initializations after the first attempt
  int epochs_used = 0;    // epochs run in the returned restart
  int epochs_total = 0;
  double final_epoch_loss = std::numeric_limits<double>::quiet_NaN();
  double full_pass_loss = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> restart_log;
  std::string config;

  /// Deterministic summary (excludes wall time).
  std::string text() const {
    std::ostringstream os;
    os << "success = " << (success ? "true" : "false") << '\n';
    os << "restarts_used = " << restarts_used << '\n';
    os << "epochs_used = " << epochs_used << '\n';
    os << "epochs_total = " << epochs_total << '\n';
    os << "final_epoch_loss = " << format_real(final_epoch_loss) << '\n';
    os << "full_pass_loss = " << format_real(full_pass_loss) << '\n';
    os << "seed = " << seed << '\n';
    for (const auto& l : restart_log) os << "restart " << l << '\n';
    return os.str();
  }
};

struct TrainResult {
  Mlp controller;
  Mlp barrier;
  TrainReport report;
};

/// theta <- theta - lr * grad. Throws on a non-finite result.
inline void sgd_step(Mlp& net, std::span<const double> grad, double lr) {
  auto p = net.params();
  if (grad.size() != p.size()) throw ShapeError("gradient size mismatch");
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = p[i] - lr * grad[i];
    if (!std::isfinite(v)) throw NonFiniteError("non-finite parameter update");
    p[i] = v;
  }
}

inline bool decide_success(double epoch_loss, double full_pass_loss) {
  return epoch_loss == 0 && full_pass_loss == 0;
}

inline bool decide_success(double epoch_loss, const Mlp& nc, const Mlp& nb, const Dataset& ds, const LossModel& lm) {
  if (epoch_loss != 0) return false;
  return lm.full_pass(nc, nb, ds) == 0;
}

/// Optional per-epoch observer: (restart, epoch, epoch loss, lr).
using EpochHook = std::function<void(int, int, double, double)>;

struct WarmStart {
  Mlp controller;
  Mlp barrier;
};

inline TrainResult train(const Ccds& sys, const Dataset& ds, const TrainConfig& cfg,
                         const std::optional<WarmStart>& warm = std::nullopt, const EpochHook& hook = {}) {
  cfg.validate();
  if (ds.s_d.empty() || ds.s_i.empty() || ds.s_u.empty()) throw std::invalid_argument("training sets must be nonempty");
  const auto t0 = std::chrono::steady_clock::now();
  const LossModel lm(sys, cfg.loss);
  const BatchPlan plan = make_batches(ds, cfg.n_batch, cfg.batch_mode, derive_seed(cfg.seed, 0, 4));
  std::vector<PointBatch> views;
  views.reserve(plan.size());
  for (const auto& b : plan.batches) views.push_back(view(ds, b));

  Mlp nc = default_controller(sys.n(), sys.m(), cfg.controller_hidden, cfg.control_bound);
  Mlp nb = default_barrier(sys.n(), cfg.barrier_hidden);
  if (warm) {
    if (warm->controller.dims() != nc.dims() || warm->barrier.dims() != nb.dims()) {
      throw ShapeError("warm-start networks do not match the configured architecture");
    }
  }

  TrainResult best;
  double best_loss = std::numeric_limits<double>::infinity();
  bool have_best = false;
  TrainReport rep;
  rep.seed = cfg.seed;
  rep.config = config_text(cfg);

  for (int r = 0; r < cfg.n_restart; ++r) {
    if (r == 0 && warm) {
      nc = warm->controller;
      nb = warm->barrier;
    } else {
      nc = default_controller(sys.n(), sys.m(), cfg.controller_hidden, cfg.control_bound);
      nb = default_barrier(sys.n(), cfg.barrier_hidden);
      init_gaussian(nc, derive_seed(cfg.seed, r, 1));
      init_gaussian(nb, derive_seed(cfg.seed, r, 2));
    }
    LrState lr(cfg.lr, cfg.n_epoch);
    double epoch_loss = std::numeric_limits<double>::quiet_NaN();
    int epochs = 0;
    bool ok = false;
    std::string why = "exhausted";
    try {
      for (int e = 0; e < cfg.n_epoch; ++e) {
        epoch_loss = 0;
        const auto order = plan.order(derive_seed(cfg.seed, r, 3, static_cast<std::uint64_t>(e)));
        bool first = true;
        for (std::size_t k : order) {
          const bool with_l6 = cfg.loss.l6_per_batch || first;
          first = false;
          const LossGrad lg = lm.value_and_grad(nc, nb, views[k], with_l6);
          if (!std::isfinite(lg.value)) throw NonFiniteError("non-finite batch loss");
          epoch_loss += lg.value;
          if (lg.value > 0) {
            sgd_step(nc, lg.grad_c, lr.lr());
            sgd_step(nb, lg.grad_b, lr.lr());
          }
        }
        ++epochs;
        ++rep.epochs_total;
        if (hook) hook(r, e, epoch_loss, lr.lr());
        if (!std::isfinite(epoch_loss)) throw NonFiniteError("non-finite epoch loss");
        if (decide_success(epoch_loss, nc, nb, ds, lm)) {
          ok = true;
          break;
        }
        lr.end_epoch(e, epoch_loss);
      }
    } catch (const DomainError& ex) {
      why = std::string("aborted: ") + ex.what();
      epoch_loss = std::numeric_limits<double>::quiet_NaN();
    }

    double full = std::numeric_limits<double>::infinity();
    if (why == "exhausted" || ok) {
      try {
        full = lm.full_pass(nc, nb, ds);
      } catch (const DomainError&) {
        full = std::numeric_limits<double>::infinity();
      }
    }
    if (ok) why = "success";
    rep.restart_log.push_back(std::to_string(r) + ": " + why + ", epochs " + std::to_string(epochs) +
                              ", full_pass_loss " + format_real(full));
    if (ok || !have_best || full < best_loss) {
      best_loss = full;
      have_best = true;
      best.controller = nc;
      best.barrier = nb;
      rep.restarts_used = r;
      rep.epochs_used = epochs;
      rep.final_epoch_loss = epoch_loss;
      rep.full_pass_loss = full;
    }
    if (ok) {
      rep.success = true;
      break;
    }
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  best.report = std::move(rep);
  return best;
}

/// Warm-started training from already trained networks.
inline TrainResult fine_tune(const Ccds& sys, const Dataset& ds, const Mlp& controller, const Mlp& barrier,
                             const TrainConfig& cfg, const EpochHook& hook = {}) {
  return train(sys, ds, cfg, WarmStart{controller, barrier}, hook);
}

}  // namespace nnbc
