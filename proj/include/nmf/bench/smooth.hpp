#pragma once

#include <vector>

#include "nmf/bench/generators.hpp"
#include "nmf/regularized.hpp"

namespace nmf::bench {

struct SmoothRun {
  double delta = 0.0;
  std::uint64_t seed = 0;
  double energy = 0.0;          // second_difference_energy of the recovered U
  double relative_error = 0.0;  // ‖FEᵀ − UVᵀ‖/‖FEᵀ‖
  StopReason stop_reason = StopReason::Criterion;
  std::size_t sweeps = 0;
  double elapsed_s = 0.0;
};

struct SmoothSettings {
  std::vector<double> deltas{0.0, 10.0, 100.0};
  std::size_t n_seeds = 5;
  std::uint64_t seed = 0;
  std::size_t rank = kSmoothSources;
  double noise_rel = 0.2;
  StopRule stop;
};

/// Seed s builds mixture seed+s; every δ starts from the same point.
inline std::vector<SmoothRun> run_smooth_experiment(const SmoothSettings& cfg) {
  if (cfg.n_seeds == 0 || cfg.deltas.empty()) throw InputError("need at least one seed and one δ");
  std::vector<SmoothRun> out;
  for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
    const std::uint64_t seed = cfg.seed + s;
    const SmoothMixture mix = gen_smooth_mixture(200, 100, cfg.noise_rel, seed);
    const FactorPair start = init_scaled(mix.A, cfg.rank, start_seed(seed, 0, 0));
    const double clean_norm = frobenius_norm(mix.clean);
    for (double delta : cfg.deltas) {
      auto spec = RegularizerSpec::uniform(cfg.rank, ColumnWeights{0.0, 0.0, delta});
      spec.rebalance = true;
      const SolverReport rep = run_regularized(mix.A, spec, cfg.stop, start);
      SmoothRun run;
      run.delta = delta;
      run.seed = seed;
      run.energy = second_difference_energy(rep.final.U);
      run.relative_error = frobenius_norm(mix.clean - matmul_nt(rep.final.U, rep.final.V)) / clean_norm;
      run.stop_reason = rep.stop_reason;
      run.sweeps = rep.sweeps();
      run.elapsed_s = rep.elapsed_seconds();
      out.push_back(run);
    }
  }
  return out;
}

struct SmoothSummary {
  double delta = 0.0;
  double mean_energy = 0.0;
  double mean_relative_error = 0.0;
};

inline std::vector<SmoothSummary> summarize(const std::vector<SmoothRun>& runs,
                                            const std::vector<double>& deltas) {
  std::vector<SmoothSummary> out;
  for (double d : deltas) {
    SmoothSummary s{d, 0.0, 0.0};
    std::size_t n = 0;
    for (const auto& r : runs)
      if (r.delta == d) {
        s.mean_energy += r.energy;
        s.mean_relative_error += r.relative_error;
        ++n;
      }
    if (n) {
      s.mean_energy /= static_cast<double>(n);
      s.mean_relative_error /= static_cast<double>(n);
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace nmf::bench
