#pragma once

#include <array>
#include <cmath>
#include <queue>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cpdvmc/fock.hpp"

namespace cpdvmc {

struct HubbardSpec {
  int nx = 1;
  int ny = 1;
  double t = 1.0;
  double U = 0.0;
  bool periodic_x = false;
  bool periodic_y = false;

  int n_sites() const noexcept { return nx * ny; }
  int site(int x, int y) const noexcept { return y * nx + x; }

  void validate() const {
    if (nx < 1 || ny < 1 || nx * ny > kMaxSites)
      throw ContractError("lattice dims must be positive with nx*ny <= 64");
    if (!std::isfinite(t) || !std::isfinite(U)) throw ContractError("t and U must be finite");
  }
};

// Nearest-neighbour structure of an nx-by-ny lattice. A periodic axis of
// extent 2 connects the same pair twice, doubling that bond.
class Lattice {
 public:
  explicit Lattice(const HubbardSpec& spec) : spec_(spec) {
    spec.validate();
    const int L = spec.n_sites();
    hopping_ = Eigen::MatrixXd::Zero(L, L);
    slots_.assign(static_cast<std::size_t>(L), {});
    for (int y = 0; y < spec.ny; ++y)
      for (int x = 0; x < spec.nx; ++x) {
        const int i = spec.site(x, y);
        auto& s = slots_[static_cast<std::size_t>(i)];
        if (spec.nx > 1) {
          s.push_back(neighbour(x + 1, spec.nx, spec.periodic_x, [&](int xx) { return spec.site(xx, y); }));
          s.push_back(neighbour(x - 1, spec.nx, spec.periodic_x, [&](int xx) { return spec.site(xx, y); }));
        }
        if (spec.ny > 1) {
          s.push_back(neighbour(y + 1, spec.ny, spec.periodic_y, [&](int yy) { return spec.site(x, yy); }));
          s.push_back(neighbour(y - 1, spec.ny, spec.periodic_y, [&](int yy) { return spec.site(x, yy); }));
        }
        // count each bond once through the forward slots
        for (std::size_t k = 0; k < s.size(); k += 2) {
          const int j = s[k];
          if (j < 0) continue;
          hopping_(i, j) -= spec.t;
          hopping_(j, i) -= spec.t;
        }
      }
    neighbours_.assign(static_cast<std::size_t>(L), {});
    for (int i = 0; i < L; ++i)
      for (int j = 0; j < L; ++j)
        if (i != j && hopping_(i, j) != 0.0)
          neighbours_[static_cast<std::size_t>(i)].push_back({j, hopping_(i, j)});
  }

  const HubbardSpec& spec() const noexcept { return spec_; }
  int n_sites() const noexcept { return spec_.n_sites(); }

  // -t times bond multiplicity.
  const Eigen::MatrixXd& hopping() const noexcept { return hopping_; }

  // Distinct neighbours with aggregated hopping amplitude.
  const std::vector<std::pair<int, double>>& neighbours(int site) const {
    return neighbours_[static_cast<std::size_t>(site)];
  }

  // Direction slots per site (same count for every site); -1 marks a slot
  // leaving an open boundary.
  const std::vector<int>& slots(int site) const { return slots_[static_cast<std::size_t>(site)]; }
  int coordination() const noexcept { return slots_.empty() ? 0 : static_cast<int>(slots_[0].size()); }

  std::vector<int> graph_distances(int from) const {
    std::vector<int> dist(static_cast<std::size_t>(n_sites()), -1);
    std::queue<int> q;
    dist[static_cast<std::size_t>(from)] = 0;
    q.push(from);
    while (!q.empty()) {
      const int i = q.front();
      q.pop();
      for (auto [j, amp] : neighbours(i))
        if (dist[static_cast<std::size_t>(j)] < 0) {
          dist[static_cast<std::size_t>(j)] = dist[static_cast<std::size_t>(i)] + 1;
          q.push(j);
        }
    }
    return dist;
  }

 private:
  template <class Index>
  static int neighbour(int c, int extent, bool periodic, Index&& idx) {
    if (c >= 0 && c < extent) return idx(c);
    if (!periodic) return -1;
    return idx((c + extent) % extent);
  }

  HubbardSpec spec_;
  Eigen::MatrixXd hopping_;
  std::vector<std::vector<std::pair<int, double>>> neighbours_;
  std::vector<std::vector<int>> slots_;
};

class HubbardHamiltonian {
 public:
  explicit HubbardHamiltonian(const HubbardSpec& spec) : lattice_(spec) {}

  const HubbardSpec& spec() const noexcept { return lattice_.spec(); }
  const Lattice& lattice() const noexcept { return lattice_; }
  int n_sites() const noexcept { return lattice_.n_sites(); }

  double diagonal(const Config& c) const noexcept {
    return spec().U * std::popcount(c.up & c.dn);
  }

  // f(Config target, double element) for the diagonal and every
  // same-spin nearest-neighbour hop with |element| >= threshold.
  template <class F>
  void for_each_connected(const Config& c, double threshold, F&& f) const {
    const int L = n_sites();
    f(c, diagonal(c));
    for (Spin s : {Spin::up, Spin::dn}) {
      const std::uint64_t occ = c.mask(s);
      for_each_set_bit(occ, [&](int i) {
        for (auto [j, amp] : lattice_.neighbours(i)) {
          if ((occ >> j) & 1U) continue;
          if (std::abs(amp) < threshold) continue;
          const auto ex = Excitation::single(spin_orbital_index(j, s, L), spin_orbital_index(i, s, L));
          const auto r = try_apply(c, ex, L);
          f(r->cfg, amp * r->parity);
        }
      });
    }
  }

 private:
  Lattice lattice_;
};

}  // namespace cpdvmc
