#pragma once

// Metropolis-Hastings sampling of |psi|^2 in a fixed (N_up, N_dn) sector,
// and the deterministic exact-sum replacement for small sectors.
//
// Every move type proposes from an index set whose size does not depend on
// the configuration, so q(n|n') = q(n'|n) and the acceptance probability is
// min(1, |psi(n')/psi(n)|^2). A proposal whose target is off the lattice or
// already occupied counts as a rejected step.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "cpdvmc/cpd_ansatz.hpp"
#include "cpdvmc/eval_context.hpp"
#include "cpdvmc/hamiltonian.hpp"

namespace cpdvmc {

enum class MoveKind : int { hop = 0, single = 1, pair = 2, exchange = 3 };

struct MoveMix {
  double hop = 0.0;
  double single = 1.0;
  double pair = 0.0;
  double exchange = 0.0;

  std::array<double, 4> weights() const { return {hop, single, pair, exchange}; }

  static MoveMix hubbard() { return {0.8, 0.1, 0.0, 0.1}; }
  static MoveMix ab_initio() { return {0.0, 0.7, 0.3, 0.0}; }
};

struct SamplerConfig {
  std::size_t n_samples = 4096;
  int n_chains = 4;
  int burn_in_sweeps = 10;
  int moves_per_sample = 0;  // 0: one sweep of L attempted moves
  MoveMix mix;
  std::uint64_t seed = 1;
  double threshold = 0.0;  // local-energy pruning
  int n_threads = 1;

  void validate() const {
    const auto w = mix.weights();
    double sum = 0.0;
    for (double x : w) {
      if (!(x >= 0.0)) throw ConfigError("move probabilities must be non-negative");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("move probabilities must sum to 1");
    if (n_chains < 1) throw ConfigError("n_chains must be >= 1");
    if (n_samples == 0 || n_samples % static_cast<std::size_t>(n_chains) != 0)
      throw ConfigError("n_samples must be a positive multiple of n_chains");
    if (burn_in_sweeps < 0 || moves_per_sample < 0) throw ConfigError("burn-in and thinning must be >= 0");
    if (!(threshold >= 0.0)) throw ConfigError("threshold must be >= 0");
    if (n_threads < 1) throw ConfigError("n_threads must be >= 1");
  }
};

struct SampleBatch {
  std::vector<Config> configs;
  std::vector<double> local_energies;
  std::vector<LogAmp> logpsi;
  std::vector<SparseGradient> derivatives;  // empty unless requested
  std::vector<double> weights;              // empty for Markov-chain samples
  std::uint64_t accepted = 0;
  std::uint64_t attempted = 0;

  std::size_t size() const noexcept { return configs.size(); }
  double weight(std::size_t s) const noexcept {
    return weights.empty() ? 1.0 / static_cast<double>(configs.size()) : weights[s];
  }
  double acceptance() const noexcept {
    return attempted == 0 ? 1.0 : static_cast<double>(accepted) / static_cast<double>(attempted);
  }
  double mean_energy() const noexcept {
    double e = 0.0;
    for (std::size_t s = 0; s < size(); ++s) e += weight(s) * local_energies[s];
    return e;
  }
};

struct MoveProposal {
  Excitation ex;
  double ratio = 1.0;  // q(n|n') / q(n'|n)
};

namespace detail {

template <class Rng>
std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

template <class Rng>
int pick_bit(std::uint64_t mask, Rng& rng) {
  auto k = uniform_index(rng, static_cast<std::size_t>(std::popcount(mask)));
  while (k--) mask &= mask - 1;
  return std::countr_zero(mask);
}

// Move types that can succeed somewhere in the sector.
inline std::array<bool, 4> feasible_moves(const SystemSpec& spec, const Lattice* lattice) {
  const int L = spec.L, u = spec.n_up, d = spec.n_dn;
  const bool up_mobile = u > 0 && u < L, dn_mobile = d > 0 && d < L;
  const bool hop = lattice != nullptr && lattice->coordination() > 0 && (up_mobile || dn_mobile);
  const bool single = up_mobile || dn_mobile;
  const bool pair = (u >= 2 && L - u >= 2) || (d >= 2 && L - d >= 2) || (up_mobile && dn_mobile);
  const bool exchange = up_mobile && dn_mobile;
  return {hop, single, pair, exchange};
}

}  // namespace detail

// nullopt: the drawn proposal is illegal for cfg and counts as rejected.
template <class Rng>
std::optional<MoveProposal> propose_move(const Config& cfg, const SystemSpec& spec, const Lattice* lattice,
                                         const MoveMix& mix, Rng& rng) {
  const int L = spec.L;
  const auto feasible = detail::feasible_moves(spec, lattice);
  auto w = mix.weights();
  double total = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (!feasible[static_cast<std::size_t>(k)]) w[static_cast<std::size_t>(k)] = 0.0;
    total += w[static_cast<std::size_t>(k)];
  }
  if (total <= 0.0) {
    // the mix only names impossible moves; fall back to the feasible ones
    for (int k = 0; k < 4; ++k) w[static_cast<std::size_t>(k)] = feasible[static_cast<std::size_t>(k)] ? 1.0 : 0.0;
    if (std::none_of(feasible.begin(), feasible.end(), [](bool b) { return b; })) return std::nullopt;
  }
  std::discrete_distribution<int> kind_dist(w.begin(), w.end());
  const auto kind = static_cast<MoveKind>(kind_dist(rng));
  const std::uint64_t full = low_mask(L);
  const int n = spec.n_electrons();

  // electron k in canonical order: (site, spin)
  auto electron = [&](std::size_t k) {
    if (k < static_cast<std::size_t>(spec.n_up)) {
      std::uint64_t m = cfg.up;
      while (k--) m &= m - 1;
      return std::pair{std::countr_zero(m), Spin::up};
    }
    k -= static_cast<std::size_t>(spec.n_up);
    std::uint64_t m = cfg.dn;
    while (k--) m &= m - 1;
    return std::pair{std::countr_zero(m), Spin::dn};
  };

  switch (kind) {
    case MoveKind::hop: {
      const auto [i, s] = electron(detail::uniform_index(rng, static_cast<std::size_t>(n)));
      const auto& slots = lattice->slots(i);
      const int j = slots[detail::uniform_index(rng, slots.size())];
      if (j < 0 || cfg.occupied(j, s)) return std::nullopt;
      return MoveProposal{Excitation::single(spin_orbital_index(j, s, L), spin_orbital_index(i, s, L))};
    }
    case MoveKind::single: {
      const auto [i, s] = electron(detail::uniform_index(rng, static_cast<std::size_t>(n)));
      const std::uint64_t vir = ~cfg.mask(s) & full;
      if (vir == 0) return std::nullopt;
      const int a = detail::pick_bit(vir, rng);
      return MoveProposal{Excitation::single(spin_orbital_index(a, s, L), spin_orbital_index(i, s, L))};
    }
    case MoveKind::pair: {
      const auto x = detail::uniform_index(rng, static_cast<std::size_t>(n));
      auto y = detail::uniform_index(rng, static_cast<std::size_t>(n - 1));
      if (y >= x) ++y;
      auto [i, s] = electron(std::min(x, y));
      auto [j, t] = electron(std::max(x, y));
      if (s == t) {
        const std::uint64_t vir = ~cfg.mask(s) & full;
        if (std::popcount(vir) < 2) return std::nullopt;
        const int a = detail::pick_bit(vir, rng);
        const int b = detail::pick_bit(vir & ~(std::uint64_t{1} << a), rng);
        return MoveProposal{Excitation::pair(spin_orbital_index(a, s, L), spin_orbital_index(b, s, L),
                                             spin_orbital_index(j, s, L), spin_orbital_index(i, s, L))};
      }
      const std::uint64_t vir_s = ~cfg.mask(s) & full, vir_t = ~cfg.mask(t) & full;
      if (vir_s == 0 || vir_t == 0) return std::nullopt;
      const int a = detail::pick_bit(vir_s, rng);
      const int b = detail::pick_bit(vir_t, rng);
      return MoveProposal{Excitation::pair(spin_orbital_index(a, s, L), spin_orbital_index(b, t, L),
                                           spin_orbital_index(j, t, L), spin_orbital_index(i, s, L))};
    }
    case MoveKind::exchange: {
      const int i = detail::pick_bit(cfg.up, rng);
      const int j = detail::pick_bit(cfg.dn, rng);
      if (i == j || cfg.occupied(j, Spin::up) || cfg.occupied(i, Spin::dn)) return std::nullopt;
      return MoveProposal{Excitation::pair(spin_orbital_index(j, Spin::up, L), spin_orbital_index(i, Spin::dn, L),
                                           spin_orbital_index(j, Spin::dn, L), spin_orbital_index(i, Spin::up, L))};
    }
  }
  return std::nullopt;
}

// One Metropolis-Hastings step; the context is only touched on acceptance.
template <class Rng>
bool mh_step(EvalContext& ctx, const Lattice* lattice, const MoveMix& mix, Rng& rng) {
  const auto& spec = ctx.params().spec;
  const auto move = propose_move(ctx.config(), spec, lattice, mix, rng);
  if (!move) return false;
  const auto pr = ctx.propose(move->ex);
  const auto& cur = ctx.log_amplitude();
  if (pr.amp.is_zero()) {
    if (cur.is_zero()) ctx.rebuild();
    return false;
  }
  if (!cur.is_zero()) {
    const double log_ratio = 2.0 * (pr.amp.log_abs - cur.log_abs) + std::log(move->ratio);
    if (log_ratio < 0.0 && std::generate_canonical<double, 53>(rng) >= std::exp(log_ratio)) return false;
  }
  ctx.accept(pr);
  return true;
}

inline std::mt19937_64 chain_rng(std::uint64_t seed, std::uint64_t chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), static_cast<std::uint32_t>(chain >> 32)};
  return std::mt19937_64(seq);
}

template <class Rng>
Config random_sector_config(const SystemSpec& spec, Rng& rng) {
  auto pick = [&](int n) {
    std::vector<int> sites(static_cast<std::size_t>(spec.L));
    std::iota(sites.begin(), sites.end(), 0);
    std::uint64_t m = 0;
    for (int k = 0; k < n; ++k) {
      const auto r = static_cast<std::size_t>(k) + detail::uniform_index(rng, sites.size() - static_cast<std::size_t>(k));
      std::swap(sites[static_cast<std::size_t>(k)], sites[r]);
      m |= std::uint64_t{1} << sites[static_cast<std::size_t>(k)];
    }
    return m;
  };
  const auto up = pick(spec.n_up);
  return {up, pick(spec.n_dn)};
}

template <class Rng>
Config nonzero_start(const CpdParams& p, Rng& rng, int max_tries = 100000) {
  for (int t = 0; t < max_tries; ++t) {
    const auto c = random_sector_config(p.spec, rng);
    if (!log_amplitude(p, c).is_zero()) return c;
  }
  throw NumericalError("no configuration with nonzero amplitude found for the chain start");
}

namespace detail {

// NaN marks a sample whose local energy could not be formed.
inline double local_energy_or_nan(const Hamiltonian& H, const EvalContext& ctx, double threshold) {
  const auto e = local_energy(H, ctx.config(), [&](const Config& t) { return ctx.evaluate(t); }, threshold,
                              ctx.log_amplitude());
  return e ? *e : std::numeric_limits<double>::quiet_NaN();
}

template <class F>
void parallel_for(int n_items, int n_threads, F&& f) {
  n_threads = std::max(1, std::min(n_threads, n_items));
  if (n_threads == 1) {
    for (int k = 0; k < n_items; ++k) f(k);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (int k = t; k < n_items; k += n_threads) f(k);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

inline std::size_t count_non_finite(const SampleBatch& batch) {
  return static_cast<std::size_t>(
      std::count_if(batch.local_energies.begin(), batch.local_energies.end(), [](double e) { return !std::isfinite(e); }));
}

// Samples are laid out chain by chain, so the batch does not depend on the
// number of worker threads.
// With a state vector the chains continue from its configurations (when
// they still have nonzero amplitude) and leave their final configurations
// in it.
inline SampleBatch run_chains(const CpdParams& p, const Hamiltonian& H, const SamplerConfig& cfg,
                              bool with_derivatives, std::vector<Config>* state = nullptr) {
  cfg.validate();
  if (n_sites(H) != p.spec.L) throw ContractError("Hamiltonian and ansatz disagree on L");
  const Lattice* lattice = lattice_of(H);
  const auto per_chain = cfg.n_samples / static_cast<std::size_t>(cfg.n_chains);
  const int stride = cfg.moves_per_sample > 0 ? cfg.moves_per_sample : p.spec.L;
  SampleBatch batch;
  batch.configs.resize(cfg.n_samples);
  batch.local_energies.resize(cfg.n_samples);
  batch.logpsi.resize(cfg.n_samples);
  if (with_derivatives) batch.derivatives.resize(cfg.n_samples);
  std::vector<std::uint64_t> accepted(static_cast<std::size_t>(cfg.n_chains)), attempted(accepted.size());
  const bool resume = state && state->size() == static_cast<std::size_t>(cfg.n_chains);
  std::vector<Config> final_configs(static_cast<std::size_t>(cfg.n_chains));

  detail::parallel_for(cfg.n_chains, cfg.n_threads, [&](int chain) {
    auto rng = chain_rng(cfg.seed, static_cast<std::uint64_t>(chain));
    const auto c = static_cast<std::size_t>(chain);
    const bool warm = resume && !log_amplitude(p, (*state)[c]).is_zero();
    EvalContext ctx(p, warm ? (*state)[c] : nonzero_start(p, rng));
    for (long k = 0; k < static_cast<long>(cfg.burn_in_sweeps) * p.spec.L; ++k) mh_step(ctx, lattice, cfg.mix, rng);
    std::uint64_t acc = 0, att = 0;
    for (std::size_t s = 0; s < per_chain; ++s) {
      for (int k = 0; k < stride; ++k) {
        acc += mh_step(ctx, lattice, cfg.mix, rng) ? 1 : 0;
        ++att;
      }
      const auto slot = static_cast<std::size_t>(chain) * per_chain + s;
      batch.configs[slot] = ctx.config();
      batch.logpsi[slot] = ctx.log_amplitude();
      batch.local_energies[slot] = detail::local_energy_or_nan(H, ctx, cfg.threshold);
      if (with_derivatives) batch.derivatives[slot] = log_derivatives(p, ctx.config());
    }
    accepted[c] = acc;
    attempted[c] = att;
    final_configs[c] = ctx.config();
  });
  if (state) *state = std::move(final_configs);
  batch.accepted = std::accumulate(accepted.begin(), accepted.end(), std::uint64_t{0});
  batch.attempted = std::accumulate(attempted.begin(), attempted.end(), std::uint64_t{0});
  return batch;
}

// Born-weighted expectation over the whole sector. Configurations with
// psi == 0 are dropped; weights sum to one.
inline SampleBatch exact_sum(const CpdParams& p, const Hamiltonian& H, bool with_derivatives,
                             double threshold = 0.0, int n_threads = 1,
                             std::uint64_t max_configs = 5'000'000) {
  if (n_sites(H) != p.spec.L) throw ContractError("Hamiltonian and ansatz disagree on L");
  const auto sector = enumerate_sector(p.spec, max_configs);
  const auto n = sector.size();
  std::vector<LogAmp> amps(n);
  std::vector<double> eloc(n);
  std::vector<SparseGradient> grads(with_derivatives ? n : 0);
  const int chunks = static_cast<int>(std::min<std::size_t>(n, 64));
  detail::parallel_for(chunks, n_threads, [&](int chunk) {
    for (std::size_t k = static_cast<std::size_t>(chunk); k < n; k += static_cast<std::size_t>(chunks)) {
      amps[k] = log_amplitude(p, sector[k]);
      if (amps[k].is_zero()) continue;
      const auto e = local_energy(H, sector[k], [&](const Config& t) { return log_amplitude(p, t); }, threshold,
                                  amps[k]);
      eloc[k] = *e;
      if (with_derivatives) grads[k] = log_derivatives(p, sector[k]);
    }
  });
  double max_log = -std::numeric_limits<double>::infinity();
  for (const auto& a : amps)
    if (!a.is_zero()) max_log = std::max(max_log, a.log_abs);
  if (!std::isfinite(max_log)) throw NumericalError("wavefunction vanishes on the whole sector");
  SampleBatch batch;
  double z = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (amps[k].is_zero()) continue;
    const double w = std::exp(2.0 * (amps[k].log_abs - max_log));
    if (w == 0.0) continue;
    batch.configs.push_back(sector[k]);
    batch.logpsi.push_back(amps[k]);
    batch.local_energies.push_back(eloc[k]);
    batch.weights.push_back(w);
    if (with_derivatives) batch.derivatives.push_back(std::move(grads[k]));
    z += w;
  }
  for (auto& w : batch.weights) w /= z;
  return batch;
}

}  // namespace cpdvmc
