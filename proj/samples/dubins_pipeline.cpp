// Dubins car end to end: pre-train, fine-tune with eps3 = 0.01, certify, simulate.
// Build target dubins_pipeline; run with no arguments.

#include <cstdio>
#include <random>

#include "nnbc/nnbc.hpp"

using namespace nnbc;

int main() {
  const Ccds sys = builtin("dubins");

  TrainConfig cfg;  // Dubins pre-training row
  cfg.n_epoch = 100;
  cfg.n_batch = 4096;
  cfg.lr = LrSchedule::fixed(0.1);
  cfg.loss.c = {1, 1, 1, 0, 0, 0};
  cfg.loss.eps = {0, 0, 0, 0.01, 0, 0, 0, 0};
  cfg.seed = 1;

  const Dataset ds = make_dataset(sys, cfg.mesh);
  std::printf("samples: %zu domain, %zu init, %zu unsafe\n", ds.s_d.size(), ds.s_i.size(), ds.s_u.size());

  const TrainResult pre = train(sys, ds, cfg);
  std::printf("pre-training: %s after %d restarts, %.1f s\n", pre.report.success ? "zero loss" : "failed",
              pre.report.restarts_used, pre.report.wall_seconds);
  if (!pre.report.success) return 2;

  cfg.loss.eps[2] = 0.01;  // margin on the Lie derivative
  const TrainResult tuned = fine_tune(sys, ds, pre.controller, pre.barrier, cfg);

  VerifyConfig vc;
  vc.msw = 1e-3;
  const Verdict v = verify(sys, tuned.controller, tuned.barrier, vc);
  std::fputs(v.text().c_str(), stdout);

  std::mt19937_64 rng(7);
  const BoxRegion& ib = sys.init.bounding_box();
  int safe = 0;
  for (int k = 0; k < 10; ++k) {
    std::vector<double> x0;
    for (std::size_t d = 0; d < ib.size(); ++d) x0.push_back(std::uniform_real_distribution<double>(ib[d].lo, ib[d].hi)(rng));
    safe += simulate(sys, tuned.controller, x0).safe();
  }
  std::printf("simulated: %d/10 safe\n", safe);

  const Trajectory tr = simulate(sys, tuned.controller, std::vector<double>{-1, -0.19});
  const StabilityMetrics m = stability_metrics(tr, *sys.equilibrium);
  std::printf("from (-1, -0.19): overshoot %.4f, settling %.2f, final error %.3g\n", m.overshoot, m.settling_time,
              m.final_error);
  return v.exit_code();
}
