#pragma once

#include <optional>
#include <variant>

#include "cpdvmc/ab_initio.hpp"
#include "cpdvmc/amplitude.hpp"
#include "cpdvmc/hubbard.hpp"

namespace cpdvmc {

using Hamiltonian = std::variant<HubbardHamiltonian, AbInitioHamiltonian>;

inline int n_sites(const Hamiltonian& H) {
  return std::visit([](const auto& h) { return h.n_sites(); }, H);
}

inline const Lattice* lattice_of(const Hamiltonian& H) {
  if (auto* hub = std::get_if<HubbardHamiltonian>(&H)) return &hub->lattice();
  return nullptr;
}

// Streams (target, <cfg|H|target>) for the diagonal and every connected
// configuration surviving the magnitude threshold.
template <class F>
void connected_elements(const Hamiltonian& H, const Config& cfg, double threshold, F&& f) {
  std::visit([&](const auto& h) { h.for_each_connected(cfg, threshold, f); }, H);
}

// E_loc(n) = sum_n' <n|H|n'> psi(n') / psi(n). amp is any callable
// Config -> LogAmp. Returns nullopt when psi(n) == 0.
template <class Ham, class Amp>
std::optional<double> local_energy(const Ham& H, const Config& cfg, Amp&& amp, double threshold,
                                   const LogAmp& ref) {
  if (ref.is_zero()) return std::nullopt;
  double e = 0.0;
  auto acc = [&](const Config& target, double element) {
    if (target == cfg) e += element;
    else e += element * amplitude_ratio(amp(target), ref);
  };
  if constexpr (std::is_same_v<std::decay_t<Ham>, Hamiltonian>) connected_elements(H, cfg, threshold, acc);
  else H.for_each_connected(cfg, threshold, acc);
  return e;
}

template <class Ham, class Amp>
std::optional<double> local_energy(const Ham& H, const Config& cfg, Amp&& amp, double threshold = 0.0) {
  const LogAmp ref = amp(cfg);
  return local_energy(H, cfg, amp, threshold, ref);
}

}  // namespace cpdvmc
