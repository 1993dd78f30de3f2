#pragma once

// JSON run configuration for the command-line driver.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpdvmc/analysis.hpp"
#include "cpdvmc/fcidump.hpp"
#include "cpdvmc/hartree_fock.hpp"
#include "cpdvmc/observables.hpp"
#include "cpdvmc/optimize.hpp"

namespace cpdvmc {

enum class SystemKind { hubbard, fcidump };

struct SystemConfig {
  bool given = false;
  SystemKind kind = SystemKind::hubbard;
  HubbardSpec hubbard{};
  std::string fcidump;
  std::string geometry;
  int n_up = -1;  // -1: half filling (Hubbard) or NELEC/MS2 (FCIDUMP)
  int n_dn = -1;
  SpinMode spin_mode = SpinMode::restricted;
};

struct AnsatzConfig {
  int M = 1;
  int K = 0;  // 0: every site
  double sigma = 0.01;
  std::uint64_t seed = 1;
  std::string checkpoint_in;
};

struct EvaluateConfig {
  int n_evaluations = 50;
  int n_samples = 1 << 16;
  bool exact = false;
};

struct CorrelateConfig {
  SzszForm form = SzszForm::spin_free;
  std::vector<int> bulk;  // empty: sites nearest the centroid
  int n_samples = 1 << 16;
  bool exact = false;
};

struct MorseConfig {
  std::string input;
  double mass_amu = units::hydrogen_mass_amu;
};

struct EdConfig {
  bool rdm = false;
};

struct OutputConfig {
  std::string trajectory = "trajectory.csv";
  std::string checkpoint = "checkpoint.bin";
  std::string evaluation = "evaluation.csv";
  std::string correlation = "correlation.csv";
  std::string morse = "morse.csv";
  std::string ed = "ed.csv";
  std::string rdm = "rdm1.csv";
  std::string dump = "bad_batch.csv";
};

struct RunConfig {
  SystemConfig system;
  AnsatzConfig ansatz;
  SamplerConfig sampler;
  bool mix_given = false;
  SrConfig sr;
  OptimizeOptions optimize;
  EvaluateConfig evaluate;
  CorrelateConfig correlate;
  MorseConfig morse;
  EdConfig ed;
  OutputConfig outputs;
};

namespace detail {

// Reads typed keys from a JSON object tree, collecting every problem
// instead of stopping at the first.
class ConfigReader {
 public:
  std::vector<std::string> problems;

  const nlohmann::json* section(const nlohmann::json& parent, const std::string& key, const std::string& path) {
    seen_.insert(join(path, key));
    if (!parent.contains(key)) return nullptr;
    const auto& v = parent.at(key);
    if (!v.is_object()) {
      problems.push_back("'" + join(path, key) + "' must be an object");
      return nullptr;
    }
    return &v;
  }

  template <class T>
  void get(const nlohmann::json* obj, const std::string& path, const std::string& key, T& out) {
    const auto full = join(path, key);
    seen_.insert(full);
    if (!obj || !obj->contains(key)) return;
    const auto& v = obj->at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) return bad(full, "a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) return bad(full, "an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.get<std::int64_t>() < 0 && !v.is_number_unsigned()) return bad(full, "a non-negative integer");
      }
      out = v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) return bad(full, "a number");
      out = v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) return bad(full, "a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const auto& x) { return x.is_number_integer(); }))
        return bad(full, "an array of integers");
      out = v.get<std::vector<int>>();
    }
  }

  template <class E, class Parse>
  void get_enum(const nlohmann::json* obj, const std::string& path, const std::string& key, E& out, Parse parse) {
    std::string s;
    bool given = obj && obj->contains(key);
    get(obj, path, key, s);
    if (!given || !obj->at(key).is_string()) return;
    try {
      out = parse(s);
    } catch (const Error& e) {
      problems.push_back("'" + join(path, key) + "': " + e.what());
    }
  }

  // Every key present in the tree but never read.
  void unknown(const nlohmann::json& node, const std::string& path) {
    for (const auto& [key, value] : node.items()) {
      const auto full = join(path, key);
      if (!seen_.count(full)) {
        problems.push_back("unknown key '" + full + "'");
        continue;
      }
      if (value.is_object()) unknown(value, full);
    }
  }

 private:
  std::set<std::string> seen_;

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
  void bad(const std::string& key, const std::string& what) {
    problems.push_back("'" + key + "' must be " + what);
  }
};

inline std::string resolve(const std::string& path, const std::filesystem::path& base) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  return p.is_absolute() ? path : (base / p).lexically_normal().string();
}

inline SpinMode parse_spin_mode(const std::string& s) {
  if (s == "restricted") return SpinMode::restricted;
  if (s == "generalized") return SpinMode::generalized;
  throw ConfigError("expected 'restricted' or 'generalized', got '" + s + "'");
}

}  // namespace detail

// Relative input paths resolve against base_dir (the config file's directory).
inline RunConfig parse_run_config(const nlohmann::json& root, const std::filesystem::path& base_dir = {}) {
  if (!root.is_object()) throw ConfigError("configuration must be a JSON object");
  detail::ConfigReader rd;
  RunConfig c;

  const auto* sys = rd.section(root, "system", "");
  c.system.given = sys != nullptr;
  std::string type = "hubbard";
  rd.get(sys, "system", "type", type);
  if (type == "hubbard") {
    c.system.kind = SystemKind::hubbard;
  } else if (type == "fcidump") {
    c.system.kind = SystemKind::fcidump;
  } else {
    rd.problems.push_back("'system.type' must be 'hubbard' or 'fcidump'");
  }
  auto& hs = c.system.hubbard;
  rd.get(sys, "system", "nx", hs.nx);
  rd.get(sys, "system", "ny", hs.ny);
  rd.get(sys, "system", "t", hs.t);
  rd.get(sys, "system", "U", hs.U);
  rd.get(sys, "system", "periodic_x", hs.periodic_x);
  rd.get(sys, "system", "periodic_y", hs.periodic_y);
  rd.get(sys, "system", "fcidump", c.system.fcidump);
  rd.get(sys, "system", "geometry", c.system.geometry);
  rd.get(sys, "system", "n_up", c.system.n_up);
  rd.get(sys, "system", "n_dn", c.system.n_dn);
  rd.get_enum(sys, "system", "spin_mode", c.system.spin_mode, detail::parse_spin_mode);
  if (sys && c.system.kind == SystemKind::fcidump && c.system.fcidump.empty())
    rd.problems.push_back("'system.fcidump' is required when system.type is 'fcidump'");
  c.system.fcidump = detail::resolve(c.system.fcidump, base_dir);
  c.system.geometry = detail::resolve(c.system.geometry, base_dir);

  const auto* an = rd.section(root, "ansatz", "");
  rd.get(an, "ansatz", "M", c.ansatz.M);
  rd.get(an, "ansatz", "K", c.ansatz.K);
  rd.get(an, "ansatz", "sigma", c.ansatz.sigma);
  rd.get(an, "ansatz", "seed", c.ansatz.seed);
  rd.get(an, "ansatz", "checkpoint_in", c.ansatz.checkpoint_in);
  c.ansatz.checkpoint_in = detail::resolve(c.ansatz.checkpoint_in, base_dir);
  if (c.ansatz.M < 1) rd.problems.push_back("'ansatz.M' must be >= 1");
  if (c.ansatz.K < 0) rd.problems.push_back("'ansatz.K' must be >= 0");
  if (!(c.ansatz.sigma >= 0.0)) rd.problems.push_back("'ansatz.sigma' must be >= 0");

  const auto* sa = rd.section(root, "sampler", "");
  auto& sc = c.sampler;
  rd.get(sa, "sampler", "n_samples", sc.n_samples);
  rd.get(sa, "sampler", "n_chains", sc.n_chains);
  rd.get(sa, "sampler", "burn_in_sweeps", sc.burn_in_sweeps);
  rd.get(sa, "sampler", "moves_per_sample", sc.moves_per_sample);
  rd.get(sa, "sampler", "seed", sc.seed);
  rd.get(sa, "sampler", "threshold", sc.threshold);
  rd.get(sa, "sampler", "threads", sc.n_threads);
  rd.get(sa, "sampler", "exact", c.optimize.exact);
  sc.mix = c.system.kind == SystemKind::hubbard ? MoveMix::hubbard() : MoveMix::ab_initio();
  if (const auto* mix = sa ? rd.section(*sa, "mix", "sampler") : nullptr) {
    c.mix_given = true;
    sc.mix = MoveMix{0.0, 0.0, 0.0, 0.0};
    rd.get(mix, "sampler.mix", "hop", sc.mix.hop);
    rd.get(mix, "sampler.mix", "single", sc.mix.single);
    rd.get(mix, "sampler.mix", "pair", sc.mix.pair);
    rd.get(mix, "sampler.mix", "exchange", sc.mix.exchange);
  }

  const auto* op = rd.section(root, "optimizer", "");
  auto& sr = c.sr;
  rd.get_enum(op, "optimizer", "variant", sr.variant, parse_sr_variant);
  rd.get_enum(op, "optimizer", "solver", sr.solver, parse_sr_solver);
  rd.get(op, "optimizer", "learning_rate", sr.learning_rate);
  rd.get(op, "optimizer", "diagonal_shift", sr.diagonal_shift);
  rd.get(op, "optimizer", "rms_decay", sr.rms_decay);
  rd.get(op, "optimizer", "rms_floor", sr.rms_floor);
  rd.get(op, "optimizer", "lr_decay", sr.lr_decay);
  rd.get(op, "optimizer", "cg_max_iterations", sr.cg_max_iterations);
  rd.get(op, "optimizer", "cg_tolerance", sr.cg_tolerance);
  rd.get(op, "optimizer", "dense_limit", sr.dense_limit);
  rd.get(op, "optimizer", "n_iterations", c.optimize.n_iterations);
  rd.get(op, "optimizer", "checkpoint_every", c.optimize.checkpoint_every);
  rd.get(op, "optimizer", "backtracking", c.optimize.backtracking);
  rd.get(op, "optimizer", "max_backtracks", c.optimize.max_backtracks);

  const auto* ev = rd.section(root, "evaluate", "");
  rd.get(ev, "evaluate", "n_evaluations", c.evaluate.n_evaluations);
  rd.get(ev, "evaluate", "n_samples", c.evaluate.n_samples);
  rd.get(ev, "evaluate", "exact", c.evaluate.exact);

  const auto* co = rd.section(root, "correlate", "");
  rd.get_enum(co, "correlate", "form", c.correlate.form, parse_szsz_form);
  rd.get(co, "correlate", "bulk", c.correlate.bulk);
  rd.get(co, "correlate", "n_samples", c.correlate.n_samples);
  rd.get(co, "correlate", "exact", c.correlate.exact);

  const auto* mo = rd.section(root, "morsefit", "");
  rd.get(mo, "morsefit", "input", c.morse.input);
  rd.get(mo, "morsefit", "mass_amu", c.morse.mass_amu);
  c.morse.input = detail::resolve(c.morse.input, base_dir);

  const auto* ed = rd.section(root, "ed", "");
  rd.get(ed, "ed", "rdm", c.ed.rdm);

  const auto* out = rd.section(root, "outputs", "");
  auto& o = c.outputs;
  for (auto [key, field] : {std::pair{"trajectory", &o.trajectory}, {"checkpoint", &o.checkpoint},
                            {"evaluation", &o.evaluation}, {"correlation", &o.correlation}, {"morse", &o.morse},
                            {"ed", &o.ed}, {"rdm", &o.rdm}, {"dump", &o.dump}})
    rd.get(out, "outputs", key, *field);

  rd.unknown(root, "");
  auto guard = [&](auto&& check) {
    try {
      check();
    } catch (const Error& e) {
      rd.problems.push_back(e.what());
    }
  };
  guard([&] { sc.validate(); });
  guard([&] { sr.validate(); });
  guard([&] { c.optimize.validate(); });
  guard([&] { hs.validate(); });
  if (c.evaluate.n_evaluations < 2) rd.problems.push_back("'evaluate.n_evaluations' must be >= 2");
  if (c.evaluate.n_samples < 1) rd.problems.push_back("'evaluate.n_samples' must be >= 1");
  if (c.correlate.n_samples < 1) rd.problems.push_back("'correlate.n_samples' must be >= 1");
  if (!(c.morse.mass_amu > 0.0)) rd.problems.push_back("'morsefit.mass_amu' must be > 0");

  if (!rd.problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : rd.problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  return c;
}

inline RunConfig read_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config ") + path + ": " + e.what());
  }
  return parse_run_config(root, std::filesystem::path(path).parent_path());
}

struct System {
  Hamiltonian H;
  SystemSpec spec;
  std::optional<Geometry> geometry;
};

inline System build_system(const SystemConfig& c) {
  if (!c.given) throw ConfigError("invalid configuration:\n  missing section 'system'");
  if (c.kind == SystemKind::hubbard) {
    HubbardHamiltonian hub(c.hubbard);
    const int L = hub.n_sites();
    const SystemSpec spec{L, c.n_up >= 0 ? c.n_up : (L + 1) / 2, c.n_dn >= 0 ? c.n_dn : L / 2, c.spin_mode};
    spec.validate();
    Geometry g;
    for (int i = 0; i < L; ++i)
      g.positions.emplace_back(static_cast<double>(i % c.hubbard.nx), static_cast<double>(i / c.hubbard.nx), 0.0);
    return System{std::move(hub), spec, std::move(g)};
  }
  auto H = read_fcidump(c.fcidump);
  const int L = H.n_sites();
  const SystemSpec spec{L, c.n_up >= 0 ? c.n_up : (H.nelec() + H.ms2()) / 2,
                        c.n_dn >= 0 ? c.n_dn : (H.nelec() - H.ms2()) / 2, c.spin_mode};
  spec.validate();
  std::optional<Geometry> g;
  if (!c.geometry.empty()) {
    g = read_geometry(c.geometry);
    if (g->size() != L)
      throw ConfigError("geometry has " + std::to_string(g->size()) + " sites but the FCIDUMP has " +
                        std::to_string(L) + " orbitals");
  }
  return System{std::move(H), spec, std::move(g)};
}

inline LookupTable build_lookup(const System& s, int K) {
  const int L = s.spec.L;
  if (K == 0 || K >= L) return LookupTable::full(L);
  if (const auto* hub = std::get_if<HubbardHamiltonian>(&s.H)) return build_lookup(hub->lattice(), K);
  return build_lookup(exchange_matrix(std::get<AbInitioHamiltonian>(s.H)), K);
}

// Parameters from the checkpoint when one is configured, otherwise a
// Hartree-Fock initialisation.
inline CpdParams initial_params(const System& s, const AnsatzConfig& a) {
  if (!a.checkpoint_in.empty()) {
    auto p = read_checkpoint(a.checkpoint_in);
    if (p.spec.L != s.spec.L || p.spec.n_up != s.spec.n_up || p.spec.n_dn != s.spec.n_dn)
      throw ConfigError("checkpoint " + a.checkpoint_in + " does not match the configured system");
    return p;
  }
  const auto scf = run_scf(s.H, s.spec);
  return init_from_hf(s.spec, scf.orbitals, a.M, build_lookup(s, a.K), a.sigma, a.seed);
}

}  // namespace cpdvmc
