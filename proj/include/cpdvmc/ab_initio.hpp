#pragma once

// Ab initio Hamiltonian in a real orthonormal orbital basis:
//   H = sum_{ij,s} h_ij c+_is c_js
//     + 1/2 sum_{ijkl,st} (ij|kl) c+_is c+_kt c_lt c_js + e_core
// with chemist-notation two-electron integrals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cpdvmc/fock.hpp"
#include "cpdvmc/hubbard.hpp"
#include "cpdvmc/log.hpp"

namespace cpdvmc {

// Antisymmetrized double-excitation amplitudes for one occupied pair,
// sorted by non-increasing magnitude.
struct ScreenedTarget {
  std::uint8_t a = 0;
  std::uint8_t b = 0;
  double magnitude = 0.0;
  double element = 0.0;
};

struct ScreeningIndex {
  int L = 0;
  // Keyed by i * L + j. same_spin uses i < j; opposite_spin is (i up, j down).
  std::vector<std::vector<ScreenedTarget>> same_spin;
  std::vector<std::vector<ScreenedTarget>> opposite_spin;

  const std::vector<ScreenedTarget>& same(int i, int j) const {
    return same_spin[static_cast<std::size_t>(i * L + j)];
  }
  const std::vector<ScreenedTarget>& opposite(int i, int j) const {
    return opposite_spin[static_cast<std::size_t>(i * L + j)];
  }
};

struct ExchangeMatrix {
  Eigen::MatrixXd K;
};

class AbInitioHamiltonian {
 public:
  AbInitioHamiltonian() = default;

  // h2 is the full L^4 array, indexed ((i*L + j)*L + k)*L + l.
  AbInitioHamiltonian(Eigen::MatrixXd h1, std::vector<double> h2, double e_core, int nelec = 0,
                      int ms2 = 0)
      : L_(static_cast<int>(h1.rows())),
        h1_(std::move(h1)),
        h2_(std::move(h2)),
        e_core_(e_core),
        nelec_(nelec),
        ms2_(ms2) {
    if (h1_.rows() != h1_.cols()) throw ContractError("h1 must be square");
    if (L_ < 1 || L_ > kMaxSites) throw ContractError("orbital count outside [1, 64]");
    if (h2_.size() != static_cast<std::size_t>(L_) * L_ * L_ * L_)
      throw ContractError("h2 size does not match L^4");
    if (!h1_.allFinite() || !std::isfinite(e_core_) ||
        !std::all_of(h2_.begin(), h2_.end(), [](double v) { return std::isfinite(v); }))
      throw ContractError("non-finite integral");
    build_screening();
  }

  int n_sites() const noexcept { return L_; }
  int nelec() const noexcept { return nelec_; }
  int ms2() const noexcept { return ms2_; }
  double e_core() const noexcept { return e_core_; }
  const Eigen::MatrixXd& h1() const noexcept { return h1_; }
  const std::vector<double>& h2_data() const noexcept { return h2_; }
  const ScreeningIndex& screening() const noexcept { return screen_; }

  double eri(int i, int j, int k, int l) const noexcept {
    return h2_[static_cast<std::size_t>(((i * L_ + j) * L_ + k) * L_ + l)];
  }

  double diagonal(const Config& c) const {
    double e = e_core_;
    const auto up = set_bits(c.up), dn = set_bits(c.dn);
    for (const auto* occ : {&up, &dn})
      for (int i : *occ) e += h1_(i, i);
    // Coulomb over all pairs of occupied spin-orbitals, exchange within a spin.
    double coulomb = 0.0, exchange = 0.0;
    for (const auto* a : {&up, &dn})
      for (const auto* b : {&up, &dn})
        for (int i : *a)
          for (int j : *b) coulomb += eri(i, i, j, j);
    for (const auto* a : {&up, &dn})
      for (int i : *a)
        for (int j : *a) exchange += eri(i, j, j, i);
    return e + 0.5 * (coulomb - exchange);
  }

  // Single excitation i -> a within spin s, before the parity factor.
  double single_element(const Config& c, Spin s, int a, int i) const {
    double v = h1_(a, i);
    for_each_set_bit(c.up | c.dn, [&](int r) {
      const int nr = static_cast<int>((c.up >> r) & 1U) + static_cast<int>((c.dn >> r) & 1U);
      v += nr * eri(a, i, r, r);
      if (c.occupied(r, s)) v -= eri(a, r, r, i);
    });
    return v;
  }

  // Diagonal, all non-zero singles and the doubles. With threshold > 0 the
  // doubles come from the screening index and each occupied pair stops at
  // the first amplitude below threshold.
  template <class F>
  void for_each_connected(const Config& c, double threshold, F&& f) const {
    f(c, diagonal(c));
    for_each_single(c, f);
    if (threshold > 0.0) for_each_double_screened(c, threshold, f);
    else for_each_double_direct(c, f);
  }

  template <class F>
  void for_each_single(const Config& c, F&& f) const {
    const std::uint64_t full = low_mask(L_);
    for (Spin s : {Spin::up, Spin::dn}) {
      const std::uint64_t occ = c.mask(s);
      const std::uint64_t vir = ~occ & full;
      for_each_set_bit(occ, [&](int i) {
        for_each_set_bit(vir, [&](int a) {
          const double v = single_element(c, s, a, i);
          if (v == 0.0) return;
          const auto ex = Excitation::single(spin_orbital_index(a, s, L_), spin_orbital_index(i, s, L_));
          const auto r = try_apply(c, ex, L_);
          f(r->cfg, v * r->parity);
        });
      });
    }
  }

  template <class F>
  void for_each_double_direct(const Config& c, F&& f) const {
    const std::uint64_t full = low_mask(L_);
    for (Spin s : {Spin::up, Spin::dn}) {
      const auto occ = set_bits(c.mask(s));
      const auto vir = set_bits(~c.mask(s) & full);
      for (std::size_t x = 0; x < occ.size(); ++x)
        for (std::size_t y = x + 1; y < occ.size(); ++y)
          for (std::size_t p = 0; p < vir.size(); ++p)
            for (std::size_t q = p + 1; q < vir.size(); ++q)
              emit_same(c, s, occ[x], occ[y], vir[p], vir[q], same_spin_element(occ[x], occ[y], vir[p], vir[q]), f);
    }
    const auto occ_up = set_bits(c.up), occ_dn = set_bits(c.dn);
    const auto vir_up = set_bits(~c.up & full), vir_dn = set_bits(~c.dn & full);
    for (int i : occ_up)
      for (int j : occ_dn)
        for (int a : vir_up)
          for (int b : vir_dn) emit_opposite(c, i, j, a, b, eri(a, i, b, j), f);
  }

  template <class F>
  void for_each_double_screened(const Config& c, double threshold, F&& f) const {
    for (Spin s : {Spin::up, Spin::dn}) {
      const std::uint64_t occ_mask = c.mask(s);
      const auto occ = set_bits(occ_mask);
      for (std::size_t x = 0; x < occ.size(); ++x)
        for (std::size_t y = x + 1; y < occ.size(); ++y)
          for (const auto& t : screen_.same(occ[x], occ[y])) {
            if (t.magnitude < threshold) break;
            if (((occ_mask >> t.a) & 1U) || ((occ_mask >> t.b) & 1U)) continue;
            emit_same(c, s, occ[x], occ[y], t.a, t.b, t.element, f);
          }
    }
    for_each_set_bit(c.up, [&](int i) {
      for_each_set_bit(c.dn, [&](int j) {
        for (const auto& t : screen_.opposite(i, j)) {
          if (t.magnitude < threshold) break;
          if (((c.up >> t.a) & 1U) || ((c.dn >> t.b) & 1U)) continue;
          emit_opposite(c, i, j, t.a, t.b, t.element, f);
        }
      });
    });
  }

  // <ab||ij> for i<j occupied and a<b empty, all in one spin channel.
  double same_spin_element(int i, int j, int a, int b) const noexcept {
    return eri(a, i, b, j) - eri(a, j, b, i);
  }

 private:
  template <class F>
  void emit_same(const Config& c, Spin s, int i, int j, int a, int b, double v, F& f) const {
    if (v == 0.0) return;
    const auto ex = Excitation::pair(spin_orbital_index(a, s, L_), spin_orbital_index(b, s, L_),
                                     spin_orbital_index(j, s, L_), spin_orbital_index(i, s, L_));
    const auto r = try_apply(c, ex, L_);
    f(r->cfg, v * r->parity);
  }

  template <class F>
  void emit_opposite(const Config& c, int i, int j, int a, int b, double v, F& f) const {
    if (v == 0.0) return;
    const auto ex = Excitation::pair(spin_orbital_index(a, Spin::up, L_), spin_orbital_index(b, Spin::dn, L_),
                                     spin_orbital_index(j, Spin::dn, L_), spin_orbital_index(i, Spin::up, L_));
    const auto r = try_apply(c, ex, L_);
    f(r->cfg, v * r->parity);
  }

  void build_screening() {
    screen_.L = L_;
    const auto n = static_cast<std::size_t>(L_ * L_);
    screen_.same_spin.assign(n, {});
    screen_.opposite_spin.assign(n, {});
    auto by_magnitude = [](const ScreenedTarget& x, const ScreenedTarget& y) {
      if (x.magnitude != y.magnitude) return x.magnitude > y.magnitude;
      return std::pair(x.a, x.b) < std::pair(y.a, y.b);
    };
    for (int i = 0; i < L_; ++i)
      for (int j = 0; j < L_; ++j) {
        if (i < j) {
          auto& list = screen_.same_spin[static_cast<std::size_t>(i * L_ + j)];
          for (int a = 0; a < L_; ++a)
            for (int b = a + 1; b < L_; ++b) {
              if (a == i || a == j || b == i || b == j) continue;
              const double v = same_spin_element(i, j, a, b);
              if (v != 0.0)
                list.push_back({static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b), std::abs(v), v});
            }
          std::sort(list.begin(), list.end(), by_magnitude);
        }
        auto& list = screen_.opposite_spin[static_cast<std::size_t>(i * L_ + j)];
        for (int a = 0; a < L_; ++a)
          for (int b = 0; b < L_; ++b) {
            if (a == i || b == j) continue;
            const double v = eri(a, i, b, j);
            if (v != 0.0)
              list.push_back({static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b), std::abs(v), v});
          }
        std::sort(list.begin(), list.end(), by_magnitude);
      }
  }

  int L_ = 0;
  Eigen::MatrixXd h1_;
  std::vector<double> h2_;
  double e_core_ = 0.0;
  int nelec_ = 0;
  int ms2_ = 0;
  ScreeningIndex screen_;
};

// Sets (ij|kl) and its seven real-orbital symmetry partners.
inline void set_eri_symmetric(std::vector<double>& h2, int L, int i, int j, int k, int l, double v) {
  auto at = [&](int p, int q, int r, int s) -> double& {
    return h2[static_cast<std::size_t>(((p * L + q) * L + r) * L + s)];
  };
  at(i, j, k, l) = v;
  at(j, i, k, l) = v;
  at(i, j, l, k) = v;
  at(j, i, l, k) = v;
  at(k, l, i, j) = v;
  at(l, k, i, j) = v;
  at(k, l, j, i) = v;
  at(l, k, j, i) = v;
}

inline ExchangeMatrix exchange_matrix(const AbInitioHamiltonian& H) {
  const int L = H.n_sites();
  ExchangeMatrix out{Eigen::MatrixXd(L, L)};
  for (int m = 0; m < L; ++m)
    for (int n = 0; n < L; ++n) out.K(m, n) = H.eri(m, n, m, n);
  for (int m = 0; m < L; ++m)
    for (int n = 0; n < L; ++n)
      if (out.K(m, n) > out.K(m, m)) {
        log::warn("exchange matrix row " + std::to_string(m) +
                  " is not diagonally dominant; basis may not be localized");
        return out;
      }
  return out;
}

// The Hubbard model written as ab initio integrals: h1 = hopping matrix,
// (ii|ii) = U, no core energy.
inline AbInitioHamiltonian to_ab_initio(const HubbardHamiltonian& hub, int nelec = 0, int ms2 = 0) {
  const int L = hub.n_sites();
  std::vector<double> h2(static_cast<std::size_t>(L) * L * L * L, 0.0);
  for (int i = 0; i < L; ++i) set_eri_symmetric(h2, L, i, i, i, i, hub.spec().U);
  return AbInitioHamiltonian(hub.lattice().hopping(), std::move(h2), 0.0, nelec, ms2);
}

}  // namespace cpdvmc
