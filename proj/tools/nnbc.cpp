// nnbc: train, verify and simulate neural controller/barrier pairs.
//
// Exit codes: 0 ok, 1 usage or input error, 2 training failed,
// 3 a condition was refuted, 4 verification inconclusive.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nnbc/nnbc.hpp"

namespace fs = std::filesystem;
using namespace nnbc;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kUsage = 1, kTrainFailed = 2, kRefuted = 3, kUnknown = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw UsageError("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw UsageError("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw UsageError("write failed for '" + p.string() + "'");
}

void prepare_out(const fs::path& dir, bool force) {
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec)) throw UsageError("output path '" + dir.string() + "' is not a directory");
    if (!fs::is_empty(dir, ec) && !force) {
      throw UsageError("output directory '" + dir.string() + "' is not empty (use --force)");
    }
    return;
  }
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create '" + dir.string() + "': " + ec.message());
}

struct Model {
  Ccds sys;
  Mlp controller;
  Mlp barrier;
  std::string system_text;
};

Model load_model(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("model directory '" + dir.string() + "' not found");
  Model m{};
  m.system_text = read_file(dir / "system.sys");
  m.sys = parse_system(m.system_text);
  m.controller = load_mlp((dir / "controller.nn").string());
  m.barrier = load_mlp((dir / "barrier.nn").string());
  return m;
}

void write_manifest(const fs::path& dir, const std::string& command, const std::vector<std::string>& lines) {
  std::ostringstream os;
  os << "tool = nnbc " << kVersion << '\n';
  os << "command = " << command << '\n';
  for (const auto& l : lines) os << l << '\n';
  write_file(dir / "manifest.txt", os.str());
}

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 1; i < argc; ++i) {
    if (i > 1) s += ' ';
    s += argv[i];
  }
  return s;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string system, builtin_name, config, out, warm, model;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool force = false;
  bool verbose = false;
};

int run_training(const TrainArgs& a, bool fine, const std::string& cmdline) {
  Ccds sys;
  std::string sys_text;
  std::optional<WarmStart> warm;
  if (fine) {
    Model m = load_model(a.model);
    sys = std::move(m.sys);
    sys_text = std::move(m.system_text);
    warm = WarmStart{std::move(m.controller), std::move(m.barrier)};
  } else {
    if (a.system.empty() == a.builtin_name.empty()) throw UsageError("give exactly one of --system or --builtin");
    if (!a.builtin_name.empty()) {
      sys_text = builtin_sources().count(a.builtin_name) ? builtin_sources().at(a.builtin_name) : "";
      if (sys_text.empty()) throw UsageError("unknown builtin system '" + a.builtin_name + "'");
    } else {
      sys_text = read_file(a.system);
    }
    sys = parse_system(sys_text);
    if (!a.warm.empty()) {
      Model m = load_model(a.warm);
      warm = WarmStart{std::move(m.controller), std::move(m.barrier)};
    }
  }
  TrainConfig cfg = parse_train_config(read_file(a.config));
  if (a.seed_given) cfg.seed = a.seed;
  cfg.validate();

  const fs::path out = a.out;
  prepare_out(out, a.force);
  const Dataset ds = make_dataset(sys, cfg.mesh);
  EpochHook hook;
  if (a.verbose) {
    hook = [](int r, int e, double loss, double lr) {
      std::cerr << "restart " << r << " epoch " << e << " loss " << loss << " lr " << lr << '\n';
    };
  }
  const TrainResult res = train(sys, ds, cfg, warm, hook);

  write_file(out / "system.sys", sys_text);
  write_file(out / "config.cfg", config_text(cfg));
  save_mlp(res.controller, (out / "controller.nn").string());
  save_mlp(res.barrier, (out / "barrier.nn").string());
  write_file(out / "train_report.txt", res.report.text());
  {
    std::ostringstream os;
    os << "wall_seconds = " << res.report.wall_seconds << '\n';
    write_file(out / "timing.txt", os.str());
  }
  write_manifest(out, cmdline,
                 {"seed = " + std::to_string(cfg.seed), "system = " + sys.name,
                  std::string("warm_start = ") + (warm ? "true" : "false"),
                  "dataset = " + std::to_string(ds.s_d.size()) + " domain, " + std::to_string(ds.s_i.size()) +
                      " init, " + std::to_string(ds.s_u.size()) + " unsafe"});
  std::cout << res.report.text();
  std::cout << "wall_seconds = " << res.report.wall_seconds << '\n';
  return res.report.success ? kOk : kTrainFailed;
}

struct VerifyArgs {
  std::string model, out, conditions;
  double msw = 1e-3;
  std::uint64_t max_boxes = 10'000'000;
  bool force = false;
};

std::vector<Condition> parse_conditions(const std::string& list) {
  std::vector<Condition> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(parse_condition(item));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (out.empty()) throw UsageError("no conditions given");
  return out;
}

int run_verify(const VerifyArgs& a, const std::string& cmdline) {
  const Model m = load_model(a.model);
  VerifyConfig cfg;
  cfg.msw = a.msw;
  cfg.max_boxes = a.max_boxes;
  if (!a.conditions.empty()) cfg.conditions = parse_conditions(a.conditions);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const fs::path out = a.out;
  prepare_out(out, a.force);
  const Verdict v = verify(m.sys, m.controller, m.barrier, cfg);
  write_file(out / "verdict.txt", v.text());
  write_file(out / "verdict.json", v.json().dump(2) + "\n");
  std::ostringstream msw;
  msw.precision(17);
  msw << "msw = " << cfg.msw;
  write_manifest(out, cmdline, {msw.str(), "max_boxes = " + std::to_string(cfg.max_boxes), "model = " + a.model});
  std::cout << v.text();
  return v.exit_code();
}

struct SimArgs {
  std::string model, out, init;
  int n = -1;
  double t = 60, dt = 0.01;
  std::uint64_t seed = 0;
  bool force = false;
};

int run_simulate(const SimArgs& a, const std::string& cmdline) {
  if ((a.n >= 0) == !a.init.empty()) throw UsageError("give exactly one of --n or --init");
  if (!a.init.empty() || a.n >= 0) {
    if (a.init.empty() && a.n < 1) throw UsageError("--n must be at least 1");
  }
  SimConfig sc{a.dt, a.t};
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const Model m = load_model(a.model);
  std::vector<std::vector<double>> starts;
  if (!a.init.empty()) {
    std::istringstream in(a.init);
    std::vector<double> x0;
    std::string tok;
    while (in >> tok) {
      try {
        x0.push_back(detail::parse_double(tok, 1));
      } catch (const ParseError&) {
        throw UsageError("bad number '" + tok + "' in --init");
      }
    }
    if (static_cast<int>(x0.size()) != m.sys.n()) throw UsageError("--init needs " + std::to_string(m.sys.n()) + " values");
    if (!m.sys.domain.contains(x0)) throw UsageError("--init state lies outside the domain");
    starts.push_back(std::move(x0));
  } else {
    std::mt19937_64 rng(a.seed);
    const BoxRegion& ib = m.sys.init.bounding_box();
    for (int k = 0; k < a.n; ++k) {
      std::vector<double> x0;
      for (std::size_t d = 0; d < ib.size(); ++d) {
        std::uniform_real_distribution<double> u(ib[d].lo, ib[d].hi);
        x0.push_back(u(rng));
      }
      starts.push_back(std::move(x0));
    }
  }

  const fs::path out = a.out;
  prepare_out(out, a.force);
  std::ostringstream sum;
  sum.precision(10);
  std::size_t safe = 0;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const Trajectory tr = simulate(m.sys, m.controller, starts[k], sc);
    char name[32];
    std::snprintf(name, sizeof name, "traj_%03zu.csv", k);
    std::ofstream csv(out / name);
    if (!csv) throw UsageError("cannot write trajectory file");
    tr.write_csv(csv, m.sys);
    const bool ok = tr.safe() && safety_check(tr, m.sys);
    if (ok) ++safe;
    sum << name << ": exit=" << exit_reason_name(tr.exit_reason) << " t=" << tr.exit_time;
    if (m.sys.equilibrium) {
      const StabilityMetrics sm = stability_metrics(tr, *m.sys.equilibrium);
      sum << " overshoot=" << sm.overshoot << " settling_time=" << sm.settling_time
          << " final_error=" << sm.final_error;
    }
    sum << '\n';
  }
  const std::string head = "safe = " + std::to_string(safe) + "/" + std::to_string(starts.size()) + "\n";
  write_file(out / "summary.txt", head + sum.str());
  write_manifest(out, cmdline, {"seed = " + std::to_string(a.seed), "model = " + a.model});
  std::cout << head;
  return kOk;
}

struct SmtArgs {
  std::string model, out;
  int segments = 64;
  bool force = false;
};

int run_emit(const SmtArgs& a, const std::string& cmdline) {
  if (a.segments < 1) throw UsageError("--segments must be positive");
  const Model m = load_model(a.model);
  const fs::path out = a.out;
  prepare_out(out, a.force);
  for (Condition c : {Condition::Init, Condition::Unsafe, Condition::Lie}) {
    const IsatScript s = emit_isat(m.sys, m.controller, m.barrier, c, a.segments);
    const std::string text = to_string(s);
    if (!(parse_isat(text) == s)) {
      std::cerr << "error: reparse check failed for " << condition_name(c) << '\n';
      return kUsage;
    }
    write_file(out / script_file_name(c), text);
    std::cout << script_file_name(c) << ": " << s.decls.size() << " variables, " << s.constraints.size()
              << " constraints\n";
  }
  write_manifest(out, cmdline, {"segments = " + std::to_string(a.segments), "model = " + a.model});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural controller and barrier certificate synthesis"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a controller and barrier from scratch");
  train_cmd->add_option("--system", ta.system, "system file");
  train_cmd->add_option("--builtin", ta.builtin_name, "builtin system name");
  train_cmd->add_option("--config", ta.config, "training config")->required();
  train_cmd->add_option("--out", ta.out, "output directory")->required();
  train_cmd->add_option("--warm-start", ta.warm, "model directory to start from");
  auto* seed_opt = train_cmd->add_option("--seed", ta.seed, "root seed (overrides the config)");
  train_cmd->add_flag("--force", ta.force, "allow a non-empty output directory");
  train_cmd->add_flag("--verbose", ta.verbose, "print per-epoch losses");

  TrainArgs fa;
  auto* fine_cmd = app.add_subcommand("fine-tune", "retrain a model with new tolerances");
  fine_cmd->add_option("--model", fa.model, "model directory")->required();
  fine_cmd->add_option("--config", fa.config, "training config")->required();
  fine_cmd->add_option("--out", fa.out, "output directory")->required();
  auto* fseed_opt = fine_cmd->add_option("--seed", fa.seed, "root seed (overrides the config)");
  fine_cmd->add_flag("--force", fa.force, "allow a non-empty output directory");
  fine_cmd->add_flag("--verbose", fa.verbose, "print per-epoch losses");

  VerifyArgs va;
  auto* verify_cmd = app.add_subcommand("verify", "check the barrier conditions by branch and bound");
  verify_cmd->add_option("--model", va.model, "model directory")->required();
  verify_cmd->add_option("--msw", va.msw, "minimal splitting width");
  verify_cmd->add_option("--conditions", va.conditions, "comma-separated subset of init,unsafe,lie");
  verify_cmd->add_option("--max-boxes", va.max_boxes, "box budget per condition");
  verify_cmd->add_option("--out", va.out, "output directory")->required();
  verify_cmd->add_flag("--force", va.force, "allow a non-empty output directory");

  SimArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "simulate the closed loop");
  sim_cmd->add_option("--model", sa.model, "model directory")->required();
  sim_cmd->add_option("--n", sa.n, "number of random initial states");
  sim_cmd->add_option("--init", sa.init, "initial state, space separated");
  sim_cmd->add_option("--t", sa.t, "end time");
  sim_cmd->add_option("--dt", sa.dt, "step size");
  sim_cmd->add_option("--seed", sa.seed, "seed for random initial states");
  sim_cmd->add_option("--out", sa.out, "output directory")->required();
  sim_cmd->add_flag("--force", sa.force, "allow a non-empty output directory");

  SmtArgs ma;
  auto* smt_cmd = app.add_subcommand("emit-smt", "write iSAT3 scripts for the three conditions");
  smt_cmd->add_option("--model", ma.model, "model directory")->required();
  smt_cmd->add_option("--segments", ma.segments, "PWL segments per Bent-ReLU unit");
  smt_cmd->add_option("--out", ma.out, "output directory")->required();
  smt_cmd->add_flag("--force", ma.force, "allow a non-empty output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  const std::string cmdline = join_args(argc, argv);
  try {
    if (*train_cmd) {
      ta.seed_given = seed_opt->count() > 0;
      return run_training(ta, false, cmdline);
    }
    if (*fine_cmd) {
      fa.seed_given = fseed_opt->count() > 0;
      return run_training(fa, true, cmdline);
    }
    if (*verify_cmd) return run_verify(va, cmdline);
    if (*sim_cmd) return run_simulate(sa, cmdline);
    if (*smt_cmd) return run_emit(ma, cmdline);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
