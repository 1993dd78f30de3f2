// Command-line driver: cpdvmc <subcommand> --config FILE [--seed N] [--threads N] [--output DIR]

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "cpdvmc/cpdvmc.hpp"

namespace fs = std::filesystem;
using namespace cpdvmc;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string output = ".";
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

RunConfig load(const Common& c) {
  auto rc = read_run_config(c.config);
  if (c.seed) {
    rc.ansatz.seed = *c.seed;
    rc.sampler.seed = *c.seed;
  }
  if (c.threads) {
    if (*c.threads < 1) throw ConfigError("--threads must be >= 1");
    rc.sampler.n_threads = *c.threads;
  }
  std::error_code ec;
  fs::create_directories(c.output, ec);
  if (ec) throw IoError("cannot create output directory " + c.output + ": " + ec.message());
  return rc;
}

fs::path out_path(const Common& c, const std::string& name) {
  const fs::path p(name);
  return p.is_absolute() ? p : fs::path(c.output) / p;
}

void print_energy(const char* label, double e, double err) {
  std::printf("%s %.12f +- %.3e\n", label, e, err);
}

int run_optimize(const Common& c) {
  auto rc = load(c);
  const auto sys = build_system(rc.system);
  auto p = initial_params(sys, rc.ansatz);
  rc.optimize.checkpoint_path = out_path(c, rc.outputs.checkpoint).string();
  rc.optimize.dump_path = out_path(c, rc.outputs.dump).string();
  auto traj = open_out(out_path(c, rc.outputs.trajectory));
  write_trajectory_header(traj);
  const auto res = optimize(p, sys.H, rc.sampler, rc.sr, rc.optimize, [&](const TrajectoryRecord& r) {
    write_trajectory_row(traj, r);
    traj.flush();
    log::info("iter " + std::to_string(r.iter) + " E = " + std::to_string(r.energy));
  });
  if (rc.optimize.n_iterations == 0) write_checkpoint(rc.optimize.checkpoint_path, p);
  if (!res.trajectory.empty()) {
    const auto& last = res.trajectory.back();
    print_energy("last_iteration_energy", last.energy, last.error);
  }
  std::printf("parameters %zu\ncheckpoint %s\n", p.size(), rc.optimize.checkpoint_path.c_str());
  return 0;
}

CpdParams checkpoint_params(const Common& c, const RunConfig& rc, const System& sys) {
  auto a = rc.ansatz;
  if (a.checkpoint_in.empty()) a.checkpoint_in = out_path(c, rc.outputs.checkpoint).string();
  if (!fs::exists(a.checkpoint_in)) throw IoError("checkpoint " + a.checkpoint_in + " not found; run optimize first");
  return initial_params(sys, a);
}

int run_evaluate(const Common& c) {
  const auto rc = load(c);
  const auto sys = build_system(rc.system);
  const auto p = checkpoint_params(c, rc, sys);
  auto out = open_out(out_path(c, rc.outputs.evaluation));
  out << "evaluation,energy\n";
  char buf[64];
  if (rc.evaluate.exact) {
    const auto batch = exact_sum(p, sys.H, false, rc.sampler.threshold, rc.sampler.n_threads);
    std::snprintf(buf, sizeof buf, "0,%.17g\n", batch.mean_energy());
    out << buf;
    print_energy("energy", batch.mean_energy(), 0.0);
    return 0;
  }
  auto sc = rc.sampler;
  sc.n_samples = rc.evaluate.n_samples;
  const auto ev = evaluate_energy(p, sys.H, sc, rc.evaluate.n_evaluations);
  for (std::size_t k = 0; k < ev.energies.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", k, ev.energies[k]);
    out << buf;
  }
  print_energy("energy", ev.estimate.mean, ev.estimate.error);
  std::printf("acceptance %.4f\n", ev.acceptance);
  return 0;
}

int run_correlate(const Common& c) {
  const auto rc = load(c);
  const auto sys = build_system(rc.system);
  if (!sys.geometry) throw ConfigError("correlate needs 'system.geometry' for FCIDUMP systems");
  const auto p = checkpoint_params(c, rc, sys);
  const int L = sys.spec.L;
  auto bulk = rc.correlate.bulk.empty() ? central_sites(*sys.geometry) : rc.correlate.bulk;
  for (int a : bulk)
    if (a < 0 || a >= L) throw ConfigError("'correlate.bulk' site " + std::to_string(a) + " outside [0, L)");
  SampleBatch batch;
  if (rc.correlate.exact) {
    batch = exact_sum(p, sys.H, false, rc.sampler.threshold, rc.sampler.n_threads);
  } else {
    auto sc = rc.sampler;
    sc.n_samples = rc.correlate.n_samples;
    batch = run_chains(p, sys.H, sc, false);
  }
  const auto amp = [&p](const Config& cfg) { return log_amplitude(p, cfg); };
  const auto pc = pair_correlators(batch, bulk_pairs(bulk, L), L, amp, rc.correlate.form);
  const auto shells = radial_correlation(pc, *sys.geometry, bulk);
  auto out = open_out(out_path(c, rc.outputs.correlation));
  write_correlation_csv(out, shells);
  write_correlation_csv(std::cout, shells);
  return 0;
}

int run_morsefit(const Common& c) {
  const auto rc = load(c);
  if (rc.morse.input.empty()) throw ConfigError("'morsefit.input' is required");
  std::ifstream in(rc.morse.input);
  if (!in) throw IoError("cannot open " + rc.morse.input);
  const auto fit = fit_morse(parse_morse_csv(in), MorseOptions{rc.morse.mass_amu});
  auto out = open_out(out_path(c, rc.outputs.morse));
  write_morse_csv(out, fit);
  write_morse_csv(std::cout, fit);
  return 0;
}

int run_ed(const Common& c) {
  const auto rc = load(c);
  const auto sys = build_system(rc.system);
  const auto gs = oracle::ground_state(sys.H, sys.spec);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.15f", gs.energy);
  std::printf("ground_state_energy %s\ndimension %zu\n", buf, gs.sector.size());
  auto out = open_out(out_path(c, rc.outputs.ed));
  out << "energy,dimension,residual\n" << buf << ',' << gs.sector.size() << ',' << gs.residual << '\n';
  if (rc.ed.rdm) {
    const auto r = oracle::spin_rdms(gs.sector, gs.vector, sys.spec.L);
    auto rdm = open_out(out_path(c, rc.outputs.rdm));
    rdm << "i,j,up,down\n";
    rdm.precision(15);
    for (int i = 0; i < sys.spec.L; ++i)
      for (int j = 0; j < sys.spec.L; ++j) rdm << i << ',' << j << ',' << r.g1[0](i, j) << ',' << r.g1[1](i, j) << '\n';
  }
  return 0;
}

int run_fcidump_check(const Common& c) {
  const auto rc = load(c);
  if (rc.system.kind != SystemKind::fcidump) throw ConfigError("fcidump-check needs system.type = 'fcidump'");
  const auto H = read_fcidump(rc.system.fcidump);
  const int L = H.n_sites();
  double asym = (H.h1() - H.h1().transpose()).cwiseAbs().maxCoeff();
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j)
      for (int k = 0; k < L; ++k)
        for (int l = 0; l < L; ++l) {
          const double v = H.eri(i, j, k, l);
          for (double w : {H.eri(j, i, k, l), H.eri(i, j, l, k), H.eri(k, l, i, j)}) asym = std::max(asym, std::abs(v - w));
        }
  std::printf("norb %d\nnelec %d\nms2 %d\necore %.15g\nmax_symmetry_violation %.3e\n", L, H.nelec(), H.ms2(),
              H.e_core(), asym);
  const auto sys = build_system(rc.system);
  const auto scf = run_scf(sys.H, sys.spec);
  std::printf("hf_energy %.12f\nhf_converged %d\n", scf.energy, scf.converged ? 1 : 0);
  if (asym > 1e-10) throw ParseError("integrals violate the 8-fold permutational symmetry by " + std::to_string(asym));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CPD backflow variational Monte Carlo"};
  app.require_subcommand(1, 1);
  Common common;
  std::uint64_t seed = 0;
  int threads = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON run configuration")->required();
    sub->add_option("--seed", seed, "override ansatz.seed and sampler.seed");
    sub->add_option("--threads", threads, "worker thread cap");
    sub->add_option("--output", common.output, "output directory")->capture_default_str();
  };
  struct Sub {
    const char* name;
    const char* help;
    int (*run)(const Common&);
  };
  const Sub subs[] = {
      {"optimize", "optimize the ansatz and write the trajectory and checkpoint", run_optimize},
      {"evaluate", "independent energy evaluations from a checkpoint", run_evaluate},
      {"correlate", "radial spin-spin correlation from a checkpoint", run_correlate},
      {"morsefit", "fit a Morse potential to r,E[,stderr] data", run_morsefit},
      {"ed", "exact ground state energy", run_ed},
      {"fcidump-check", "parse and validate an FCIDUMP", run_fcidump_check},
  };
  std::vector<std::pair<CLI::App*, const Sub*>> registered;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    add_common(sub);
    registered.push_back({sub, &s});
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorCategory::config);
  }
  try {
    for (auto [sub, s] : registered) {
      if (!sub->parsed()) continue;
      if (sub->count("--seed")) common.seed = seed;
      if (sub->count("--threads")) common.threads = threads;
      return s->run(common);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error[%s]: %s\n", std::string(category_name(e.category())).c_str(), e.what());
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error[internal]: %s\n", e.what());
    return 1;
  }
  return 1;
}
