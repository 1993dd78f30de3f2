#pragma once

// Outer VMC loop: sample (or sum exactly), assemble, SR update, apply.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "cpdvmc/log.hpp"
#include "cpdvmc/observables.hpp"
#include "cpdvmc/sr.hpp"

namespace cpdvmc {

struct OptimizeOptions {
  int n_iterations = 200;
  bool exact = false;
  // exact mode only: halve the step until the energy does not rise
  bool backtracking = true;
  int max_backtracks = 20;
  int checkpoint_every = 0;
  std::string checkpoint_path;
  std::string dump_path;  // batch dump when a local energy is not finite

  void validate() const {
    if (n_iterations < 0) throw ConfigError("n_iterations must be >= 0");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
    if (checkpoint_every > 0 && checkpoint_path.empty())
      throw ConfigError("checkpoint_every needs a checkpoint path");
    if (max_backtracks < 0) throw ConfigError("max_backtracks must be >= 0");
  }
};

struct TrajectoryRecord {
  int iter = 0;
  double energy = 0.0;
  double error = 0.0;
  double acceptance = 1.0;
  double update_norm = 0.0;
  double wallclock_s = 0.0;
};

inline void write_trajectory_header(std::ostream& os) {
  os << "iter,energy,stderr,acceptance,update_norm,wallclock_s\n";
}

inline void write_trajectory_row(std::ostream& os, const TrajectoryRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.3f\n", r.iter, r.energy, r.error, r.acceptance,
                r.update_norm, r.wallclock_s);
  os << buf;
}

inline void dump_batch_csv(const std::string& path, const SampleBatch& batch, int L) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write batch dump " + path);
  out << "config,local_energy,sign,log_abs_psi\n";
  out.precision(17);
  for (std::size_t s = 0; s < batch.size(); ++s)
    out << to_string(batch.configs[s], L) << ',' << batch.local_energies[s] << ',' << batch.logpsi[s].sign << ','
        << batch.logpsi[s].log_abs << '\n';
}

// Throws with a diagnostic when any local energy is not finite.
inline void check_batch(const SampleBatch& batch, int L, const std::string& dump_path, int iteration) {
  const auto bad = count_non_finite(batch);
  if (bad == 0) return;
  std::string first;
  for (std::size_t s = 0; s < batch.size(); ++s)
    if (!std::isfinite(batch.local_energies[s])) {
      first = to_string(batch.configs[s], L);
      break;
    }
  std::string msg = "iteration " + std::to_string(iteration) + ": " + std::to_string(bad) + " of " +
                    std::to_string(batch.size()) + " local energies are not finite (first at " + first + ")";
  if (!dump_path.empty()) {
    dump_batch_csv(dump_path, batch, L);
    msg += "; batch written to " + dump_path;
  }
  throw NumericalError(msg);
}

using TrajectoryCallback = std::function<void(const TrajectoryRecord&)>;

struct OptimizeResult {
  std::vector<TrajectoryRecord> trajectory;
};

inline SampleBatch draw_batch(const CpdParams& p, const Hamiltonian& H, const SamplerConfig& sc, bool exact,
                              bool with_derivatives, int iteration, std::vector<Config>* chains = nullptr) {
  if (exact) return exact_sum(p, H, with_derivatives, sc.threshold, sc.n_threads);
  auto c = sc;
  c.seed = derive_seed(sc.seed, static_cast<std::uint64_t>(iteration));
  return run_chains(p, H, c, with_derivatives, chains);
}

inline OptimizeResult optimize(CpdParams& p, const Hamiltonian& H, const SamplerConfig& sc, const SrConfig& sr,
                               const OptimizeOptions& opt, const TrajectoryCallback& on_record = {}) {
  opt.validate();
  sc.validate();
  SrUpdater update(sr);
  OptimizeResult result;
  const auto start = std::chrono::steady_clock::now();
  const int L = p.spec.L;
  std::vector<Config> chains;
  for (int it = 0; it < opt.n_iterations; ++it) {
    const auto batch = draw_batch(p, H, sc, opt.exact, true, it, &chains);
    check_batch(batch, L, opt.dump_path, it);
    const auto est = energy_estimate(batch);
    const auto cb = assemble_centered(batch, p.size());
    Eigen::VectorXd delta = update(cb, it);
    if (!delta.allFinite()) throw NumericalError("iteration " + std::to_string(it) + ": SR update is not finite");

    if (opt.exact && opt.backtracking) {
      const double tol = 1e-12 * std::max(1.0, std::abs(est.mean));
      auto trial = p;
      bool ok = false;
      for (int k = 0; k <= opt.max_backtracks; ++k) {
        for (std::size_t j = 0; j < p.size(); ++j) trial.eps[j] = p.eps[j] + delta(static_cast<Eigen::Index>(j));
        const auto tb = exact_sum(trial, H, false, sc.threshold, sc.n_threads);
        if (count_non_finite(tb) == 0 && tb.mean_energy() <= est.mean + tol) {
          ok = true;
          break;
        }
        delta *= 0.5;
      }
      if (!ok) delta.setZero();
    }

    for (std::size_t j = 0; j < p.size(); ++j) p.eps[j] += delta(static_cast<Eigen::Index>(j));
    TrajectoryRecord rec;
    rec.iter = it;
    rec.energy = est.mean;
    rec.error = est.error;
    rec.acceptance = batch.acceptance();
    rec.update_norm = delta.norm();
    rec.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.trajectory.push_back(rec);
    if (on_record) on_record(rec);
    log::debug("iter " + std::to_string(it) + " E = " + std::to_string(est.mean) + " +- " + std::to_string(est.error));
    if (opt.checkpoint_every > 0 && (it + 1) % opt.checkpoint_every == 0) write_checkpoint(opt.checkpoint_path, p);
  }
  if (!opt.checkpoint_path.empty()) write_checkpoint(opt.checkpoint_path, p);
  return result;
}

}  // namespace cpdvmc
