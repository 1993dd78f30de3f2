#pragma once

// Energy estimates, local RDM estimators and spin-spin correlations.
//
// RDM index convention (chemist order, spin-summed over sigma, tau):
//   gamma^s_ij      = <a+_is a_js>
//   Gamma^st_ijkl   = <a+_is a+_kt a_lt a_js>
// With this order the singlet identities
//   Gamma^aa = Gamma^bb = (Gamma_ijkl - Gamma_kjil) / 6
//   Gamma^ab = Gamma^ba = (2 Gamma_ijkl + Gamma_kjil) / 6
// hold for the spin-free Gamma = sum_st Gamma^st.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpdvmc/sampler.hpp"

namespace cpdvmc {

struct Estimate {
  double mean = 0.0;
  double error = 0.0;
};

// Flyvbjerg-Petersen blocking: the largest standard error over blocking
// levels that keep at least 16 blocks.
inline Estimate blocking_estimate(std::span<const double> x) {
  const auto n = x.size();
  if (n == 0) return {};
  Estimate out;
  out.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  if (n < 2) return out;
  std::vector<double> level(x.begin(), x.end());
  double best = 0.0;
  while (level.size() >= 16) {
    const auto m = level.size();
    double var = 0.0;
    for (double v : level) var += (v - out.mean) * (v - out.mean);
    var /= static_cast<double>(m);
    best = std::max(best, std::sqrt(var / static_cast<double>(m - 1)));
    std::vector<double> next(m / 2);
    for (std::size_t k = 0; k < next.size(); ++k) next[k] = 0.5 * (level[2 * k] + level[2 * k + 1]);
    level = std::move(next);
  }
  if (best == 0.0 && n < 16) {
    double var = 0.0;
    for (double v : x) var += (v - out.mean) * (v - out.mean);
    best = std::sqrt(var / static_cast<double>(n) / static_cast<double>(n - 1));
  }
  out.error = best;
  return out;
}

// Weighted (exact-sum) batches carry no statistical error.
inline Estimate energy_estimate(const SampleBatch& batch) {
  if (!batch.weights.empty()) return {batch.mean_energy(), 0.0};
  return blocking_estimate(batch.local_energies);
}

// Mean and standard deviation across independent evaluations.
inline Estimate evaluation_estimate(std::span<const double> evals) {
  if (evals.size() < 2) throw ContractError("at least two evaluations are needed for an error bar");
  const double n = static_cast<double>(evals.size());
  const double mean = std::accumulate(evals.begin(), evals.end(), 0.0) / n;
  double var = 0.0;
  for (double e : evals) var += (e - mean) * (e - mean);
  return {mean, std::sqrt(var / (n - 1.0))};
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9U};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

struct EvaluationResult {
  std::vector<double> energies;
  Estimate estimate;
  double acceptance = 0.0;
};

// n_evals sampled energies with seeds derived from cfg.seed; each
// evaluation continues the chains of the previous one.
inline EvaluationResult evaluate_energy(const CpdParams& p, const Hamiltonian& H, SamplerConfig cfg,
                                        int n_evals = 50) {
  if (n_evals < 2) throw ConfigError("n_evaluations must be >= 2");
  EvaluationResult out;
  const auto base = cfg.seed;
  std::uint64_t acc = 0, att = 0;
  std::vector<Config> chains;
  for (int k = 0; k < n_evals; ++k) {
    cfg.seed = derive_seed(base, static_cast<std::uint64_t>(k));
    const auto batch = run_chains(p, H, cfg, false, &chains);
    out.energies.push_back(batch.mean_energy());
    acc += batch.accepted;
    att += batch.attempted;
  }
  out.estimate = evaluation_estimate(out.energies);
  out.acceptance = att ? static_cast<double>(acc) / static_cast<double>(att) : 1.0;
  return out;
}

// Born weights of an arbitrary amplitude over a whole sector.
template <class Amp>
SampleBatch born_weights(const std::vector<Config>& sector, Amp&& amp) {
  SampleBatch batch;
  double max_log = -std::numeric_limits<double>::infinity();
  std::vector<LogAmp> amps;
  amps.reserve(sector.size());
  for (const auto& c : sector) {
    amps.push_back(amp(c));
    if (!amps.back().is_zero()) max_log = std::max(max_log, amps.back().log_abs);
  }
  if (!std::isfinite(max_log)) throw NumericalError("amplitude vanishes on the whole sector");
  double z = 0.0;
  for (std::size_t k = 0; k < sector.size(); ++k) {
    if (amps[k].is_zero()) continue;
    const double w = std::exp(2.0 * (amps[k].log_abs - max_log));
    batch.configs.push_back(sector[k]);
    batch.logpsi.push_back(amps[k]);
    batch.weights.push_back(w);
    z += w;
  }
  for (auto& w : batch.weights) w /= z;
  return batch;
}

// Requested RDM entries in spatial indices.
struct RdmRequest {
  std::vector<std::array<int, 2>> one;
  std::vector<std::array<int, 4>> two;
};

// Spin-resolved values for a request: one[q][sigma], two[q][2 sigma + tau].
struct RdmValues {
  std::vector<std::array<double, 2>> one;
  std::vector<std::array<double, 4>> two;

  double spin_free_one(std::size_t q) const { return one[q][0] + one[q][1]; }
  double spin_free_two(std::size_t q) const { return two[q][0] + two[q][1] + two[q][2] + two[q][3]; }
};

// Local estimators <n|O|psi>/<n|psi> for the requested entries.
template <class Amp>
RdmValues rdm_local(const RdmRequest& req, const Config& n, int L, Amp&& amp, const LogAmp& ref) {
  if (ref.is_zero()) throw NumericalError("local RDM estimator at a configuration with zero amplitude");
  auto ratio = [&](const Excitation& ex) {
    // <n|O|psi> = sum_n' <n'|O^+|n> psi(n')
    const auto r = try_apply(n, ex, L);
    if (!r) return 0.0;
    if (r->cfg == n) return static_cast<double>(r->parity);
    return r->parity * amplitude_ratio(amp(r->cfg), ref);
  };
  RdmValues out;
  out.one.resize(req.one.size());
  out.two.resize(req.two.size());
  for (std::size_t q = 0; q < req.one.size(); ++q) {
    const auto [i, j] = req.one[q];
    for (int s = 0; s < 2; ++s) {
      const auto sp = static_cast<Spin>(s);
      out.one[q][static_cast<std::size_t>(s)] =
          ratio(Excitation::single(spin_orbital_index(j, sp, L), spin_orbital_index(i, sp, L)));
    }
  }
  for (std::size_t q = 0; q < req.two.size(); ++q) {
    const auto [i, j, k, l] = req.two[q];
    for (int s = 0; s < 2; ++s)
      for (int t = 0; t < 2; ++t) {
        const auto ss = static_cast<Spin>(s), tt = static_cast<Spin>(t);
        // adjoint of a+_is a+_kt a_lt a_js
        out.two[q][static_cast<std::size_t>(2 * s + t)] =
            ratio(Excitation::pair(spin_orbital_index(j, ss, L), spin_orbital_index(l, tt, L),
                                   spin_orbital_index(k, tt, L), spin_orbital_index(i, ss, L)));
      }
  }
  return out;
}

// Weighted mean of the local estimators over a batch.
template <class Amp>
RdmValues estimate_rdms(const SampleBatch& batch, const RdmRequest& req, int L, Amp&& amp) {
  RdmValues acc;
  acc.one.assign(req.one.size(), {0.0, 0.0});
  acc.two.assign(req.two.size(), {0.0, 0.0, 0.0, 0.0});
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto loc = rdm_local(req, batch.configs[s], L, amp, batch.logpsi[s]);
    const double w = batch.weight(s);
    for (std::size_t q = 0; q < req.one.size(); ++q)
      for (int a = 0; a < 2; ++a) acc.one[q][static_cast<std::size_t>(a)] += w * loc.one[q][static_cast<std::size_t>(a)];
    for (std::size_t q = 0; q < req.two.size(); ++q)
      for (int a = 0; a < 4; ++a) acc.two[q][static_cast<std::size_t>(a)] += w * loc.two[q][static_cast<std::size_t>(a)];
  }
  return acc;
}

// Appendix form in spin-free RDMs; exact for singlet states.
inline double szsz_spin_free(double gamma_aa, double Gamma_aabb, double Gamma_baab, bool same_site) {
  return -0.5 * (Gamma_aabb / 6.0 + Gamma_baab / 3.0) + (same_site ? 0.25 * gamma_aa : 0.0);
}

// General form in spinned RDMs, valid for any state.
inline double szsz_spinned(const std::array<double, 4>& Gamma_aabb, const std::array<double, 2>& gamma_aa,
                           bool same_site) {
  const double two = 0.25 * (Gamma_aabb[0] - Gamma_aabb[1] - Gamma_aabb[2] + Gamma_aabb[3]);
  return two + (same_site ? 0.25 * (gamma_aa[0] + gamma_aa[1]) : 0.0);
}

enum class SzszForm { spin_free, spinned };

inline SzszForm parse_szsz_form(const std::string& s) {
  if (s == "spin_free") return SzszForm::spin_free;
  if (s == "spinned") return SzszForm::spinned;
  throw ConfigError("unknown correlator form '" + s + "' (expected spin_free or spinned)");
}

// Entries needed for <S^z_a S^z_b>: gamma_aa, Gamma_aabb, Gamma_baab.
inline RdmRequest szsz_request(int a, int b) { return {{{a, a}}, {{a, a, b, b}, {b, a, a, b}}}; }

inline double szsz_from_values(const RdmValues& v, int a, int b, SzszForm form) {
  if (form == SzszForm::spinned) return szsz_spinned(v.two[0], v.one[0], a == b);
  return szsz_spin_free(v.spin_free_one(0), v.spin_free_two(0), v.spin_free_two(1), a == b);
}

// Per-sample local correlators for a list of site pairs.
struct PairCorrelators {
  std::vector<std::pair<int, int>> pairs;
  Eigen::MatrixXd samples;      // n_samples x n_pairs
  std::vector<double> weights;  // empty for uniform

  double weight(Eigen::Index s) const {
    return weights.empty() ? 1.0 / static_cast<double>(samples.rows()) : weights[static_cast<std::size_t>(s)];
  }
  double mean(std::size_t q) const {
    double m = 0.0;
    for (Eigen::Index s = 0; s < samples.rows(); ++s) m += weight(s) * samples(s, static_cast<Eigen::Index>(q));
    return m;
  }
};

template <class Amp>
PairCorrelators pair_correlators(const SampleBatch& batch, const std::vector<std::pair<int, int>>& pairs, int L,
                                 Amp&& amp, SzszForm form) {
  PairCorrelators out;
  out.pairs = pairs;
  out.weights = batch.weights;
  out.samples.resize(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(pairs.size()));
  std::vector<RdmRequest> reqs;
  for (auto [a, b] : pairs) reqs.push_back(szsz_request(a, b));
  for (std::size_t s = 0; s < batch.size(); ++s)
    for (std::size_t q = 0; q < pairs.size(); ++q) {
      const auto v = rdm_local(reqs[q], batch.configs[s], L, amp, batch.logpsi[s]);
      out.samples(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(q)) =
          szsz_from_values(v, pairs[q].first, pairs[q].second, form);
    }
  return out;
}

// Site positions in Angstrom.
struct Geometry {
  std::vector<Eigen::Vector3d> positions;

  int size() const noexcept { return static_cast<int>(positions.size()); }
  double distance(int a, int b) const {
    return (positions[static_cast<std::size_t>(a)] - positions[static_cast<std::size_t>(b)]).norm();
  }
  double nearest_neighbour_distance() const {
    double d = std::numeric_limits<double>::infinity();
    for (int a = 0; a < size(); ++a)
      for (int b = a + 1; b < size(); ++b) d = std::min(d, distance(a, b));
    if (!std::isfinite(d) || d <= 0.0) throw ContractError("geometry needs at least two distinct sites");
    return d;
  }
};

// Plain text, one "site_index x y z" line per site; '#' starts a comment.
inline Geometry parse_geometry(std::istream& in) {
  std::map<int, Eigen::Vector3d> sites;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    int idx;
    double x, y, z;
    if (!(ls >> idx)) continue;
    if (!(ls >> x >> y >> z)) throw ParseError("geometry line " + std::to_string(lineno) + ": expected 'index x y z'");
    std::string extra;
    if (ls >> extra) throw ParseError("geometry line " + std::to_string(lineno) + ": trailing text");
    if (idx < 0 || !sites.emplace(idx, Eigen::Vector3d(x, y, z)).second)
      throw ParseError("geometry line " + std::to_string(lineno) + ": bad or duplicate site index");
  }
  Geometry g;
  int expect = 0;
  for (const auto& [idx, pos] : sites) {
    if (idx != expect++) throw ParseError("geometry site indices must be 0..L-1 without gaps");
    g.positions.push_back(pos);
  }
  if (g.positions.empty()) throw ParseError("geometry file holds no sites");
  return g;
}

inline Geometry read_geometry(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open geometry file " + path);
  return parse_geometry(in);
}

// Sites closest to the centroid, ties within tol * d.
inline std::vector<int> central_sites(const Geometry& g, double tol = 1e-6) {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& p : g.positions) c += p;
  c /= static_cast<double>(g.size());
  const double d = g.size() > 1 ? g.nearest_neighbour_distance() : 1.0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : g.positions) best = std::min(best, (p - c).norm());
  std::vector<int> out;
  for (int a = 0; a < g.size(); ++a)
    if ((g.positions[static_cast<std::size_t>(a)] - c).norm() <= best + tol * d) out.push_back(a);
  return out;
}

// All (bulk, b) pairs, bulk-major.
inline std::vector<std::pair<int, int>> bulk_pairs(const std::vector<int>& bulk, int L) {
  std::vector<std::pair<int, int>> out;
  for (int a : bulk)
    for (int b = 0; b < L; ++b) out.push_back({a, b});
  return out;
}

struct CorrelationShell {
  double r_over_d = 0.0;
  double C = 0.0;
  double error = 0.0;
  int n_pairs = 0;
};

// C(r) = 1/N_bulk sum_{a in bulk} sum_{|r_a - r_b| = r} <S^z_a S^z_b>.
// Shells are merged within 1e-6 d; shells without pairs are not emitted.
inline std::vector<CorrelationShell> radial_correlation(const PairCorrelators& pc, const Geometry& g,
                                                        const std::vector<int>& bulk) {
  if (bulk.empty()) throw ContractError("radial correlation needs at least one bulk site");
  const double d = g.nearest_neighbour_distance();
  const double tol = 1e-6 * d;
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t q = 0; q < pc.pairs.size(); ++q) {
    const auto [a, b] = pc.pairs[q];
    if (std::find(bulk.begin(), bulk.end(), a) == bulk.end()) continue;
    dist.push_back({g.distance(a, b), q});
  }
  std::sort(dist.begin(), dist.end());
  std::vector<CorrelationShell> out;
  const auto ns = pc.samples.rows();
  const double nb = static_cast<double>(bulk.size());
  std::size_t k = 0;
  while (k < dist.size()) {
    const double r0 = dist[k].first;
    Eigen::VectorXd per_sample = Eigen::VectorXd::Zero(ns);
    CorrelationShell sh;
    double rsum = 0.0;
    while (k < dist.size() && dist[k].first - r0 <= tol) {
      per_sample += pc.samples.col(static_cast<Eigen::Index>(dist[k].second)) / nb;
      rsum += dist[k].first;
      ++sh.n_pairs;
      ++k;
    }
    sh.r_over_d = rsum / sh.n_pairs / d;
    if (pc.weights.empty()) {
      const auto est = blocking_estimate(std::span<const double>(per_sample.data(), static_cast<std::size_t>(ns)));
      sh.C = est.mean;
      sh.error = est.error;
    } else {
      for (Eigen::Index s = 0; s < ns; ++s) sh.C += pc.weight(s) * per_sample(s);
    }
    out.push_back(sh);
  }
  return out;
}

inline void write_correlation_csv(std::ostream& os, const std::vector<CorrelationShell>& shells) {
  os << "r_over_d,C,stderr,n_pairs\n";
  os.precision(12);
  for (const auto& s : shells) os << s.r_over_d << ',' << s.C << ',' << s.error << ',' << s.n_pairs << '\n';
}

}  // namespace cpdvmc
