#pragma once

// Second-quantized configurations over L spatial sites with two spin
// species. Spin-orbitals are ordered up-block first: p = spin * L + site.
// A configuration |n> is the ordered product of creation operators in
// ascending spin-orbital order acting on the vacuum.

#include <algorithm>
#include <array>
#include <bit>
#include <compare>
#include <limits>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpdvmc/errors.hpp"

namespace cpdvmc {

inline constexpr int kMaxSites = 64;

enum class Spin : std::uint8_t { up = 0, dn = 1 };
enum class SpinMode : std::uint8_t { restricted = 0, generalized = 1 };

struct SystemSpec {
  int L = 0;
  int n_up = 0;
  int n_dn = 0;
  SpinMode spin_mode = SpinMode::restricted;

  int n_electrons() const noexcept { return n_up + n_dn; }
  int n(Spin s) const noexcept { return s == Spin::up ? n_up : n_dn; }

  void validate() const {
    if (L < 1 || L > kMaxSites)
      throw ContractError("site count L=" + std::to_string(L) + " outside [1, 64]");
    if (n_up < 0 || n_up > L || n_dn < 0 || n_dn > L)
      throw ContractError("electron counts (" + std::to_string(n_up) + ", " +
                          std::to_string(n_dn) + ") incompatible with L=" +
                          std::to_string(L));
  }

  friend bool operator==(const SystemSpec&, const SystemSpec&) = default;
};

constexpr std::uint64_t low_mask(int nbits) noexcept {
  return nbits >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << nbits) - 1);
}

struct Config {
  std::uint64_t up = 0;
  std::uint64_t dn = 0;

  std::uint64_t mask(Spin s) const noexcept { return s == Spin::up ? up : dn; }
  std::uint64_t& mask(Spin s) noexcept { return s == Spin::up ? up : dn; }

  bool occupied(int site, Spin s) const noexcept { return (mask(s) >> site) & 1U; }

  // Spin-orbital occupancy under the canonical ordering.
  bool occupied_so(int p, int L) const noexcept {
    return p < L ? ((up >> p) & 1U) : ((dn >> (p - L)) & 1U);
  }

  int count(Spin s) const noexcept { return std::popcount(mask(s)); }

  friend auto operator<=>(const Config&, const Config&) = default;
};

struct ConfigHash {
  std::size_t operator()(const Config& c) const noexcept {
    std::uint64_t h = c.up * 0x9E3779B97F4A7C15ULL;
    h ^= c.dn + 0x7F4A7C159E3779B9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

inline int spin_orbital_index(int site, Spin s, int L) {
  if (site < 0 || site >= L)
    throw ContractError("site " + std::to_string(site) + " out of range for L=" +
                        std::to_string(L));
  return static_cast<int>(s) * L + site;
}

// 0 = empty, 1 = up, 2 = down, 3 = doubly occupied.
inline int site_state(const Config& c, int site) noexcept {
  return static_cast<int>((c.up >> site) & 1U) | (static_cast<int>((c.dn >> site) & 1U) << 1);
}

// Number of occupied spin-orbitals with canonical index strictly below p.
inline int occupied_below(const Config& c, int p, int L) noexcept {
  if (p < L) return std::popcount(c.up & low_mask(p));
  return std::popcount(c.up) + std::popcount(c.dn & low_mask(p - L));
}

template <class F>
inline void for_each_set_bit(std::uint64_t m, F&& f) {
  while (m) {
    f(std::countr_zero(m));
    m &= m - 1;
  }
}

inline std::vector<int> set_bits(std::uint64_t m) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(std::popcount(m)));
  for_each_set_bit(m, [&](int b) { out.push_back(b); });
  return out;
}

// Operator string c^dag_{create[0]} ... c^dag_{create[rank-1]}
//                c_{annihilate[0]} ... c_{annihilate[rank-1]}
// on spin-orbital indices, rank 1 or 2. Applied right to left.
struct Excitation {
  std::array<int, 2> create{};
  std::array<int, 2> annihilate{};
  int rank = 0;

  static Excitation single(int to, int from) { return {{to, 0}, {from, 0}, 1}; }
  // c^dag_a c^dag_b c_k c_l
  static Excitation pair(int a, int b, int k, int l) { return {{a, b}, {k, l}, 2}; }

  friend bool operator==(const Excitation&, const Excitation&) = default;
};

struct Applied {
  Config cfg;
  int parity = 1;
};

namespace detail {

inline bool annihilate(Config& c, int p, int L, int& sign) noexcept {
  if (!c.occupied_so(p, L)) return false;
  if (occupied_below(c, p, L) & 1) sign = -sign;
  if (p < L) c.up &= ~(std::uint64_t{1} << p);
  else c.dn &= ~(std::uint64_t{1} << (p - L));
  return true;
}

inline bool create(Config& c, int p, int L, int& sign) noexcept {
  if (c.occupied_so(p, L)) return false;
  if (occupied_below(c, p, L) & 1) sign = -sign;
  if (p < L) c.up |= std::uint64_t{1} << p;
  else c.dn |= std::uint64_t{1} << (p - L);
  return true;
}

}  // namespace detail

// Returns nullopt when the operator string annihilates |cfg>.
inline std::optional<Applied> try_apply(const Config& cfg, const Excitation& ex, int L) noexcept {
  Config c = cfg;
  int sign = 1;
  for (int k = ex.rank - 1; k >= 0; --k)
    if (!detail::annihilate(c, ex.annihilate[static_cast<std::size_t>(k)], L, sign))
      return std::nullopt;
  for (int k = ex.rank - 1; k >= 0; --k)
    if (!detail::create(c, ex.create[static_cast<std::size_t>(k)], L, sign)) return std::nullopt;
  return Applied{c, sign};
}

inline Applied apply_excitation(const Config& cfg, const Excitation& ex, int L) {
  auto r = try_apply(cfg, ex, L);
  if (!r) throw ContractError("excitation annihilates a hole or creates onto a particle");
  return *r;
}

inline Excitation inverse(const Excitation& ex) {
  Excitation inv = ex;
  if (ex.rank == 2) {
    inv.create = {ex.annihilate[1], ex.annihilate[0]};
    inv.annihilate = {ex.create[1], ex.create[0]};
  } else {
    inv.create[0] = ex.annihilate[0];
    inv.annihilate[0] = ex.create[0];
  }
  return inv;
}

inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
    if (r > std::numeric_limits<std::uint64_t>::max())
      return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(r);
}

inline std::uint64_t sector_size(const SystemSpec& spec) {
  auto a = binomial(spec.L, spec.n_up), b = binomial(spec.L, spec.n_dn);
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
    return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

// All L-bit masks with n bits set, ascending.
inline std::vector<std::uint64_t> masks_with_popcount(int L, int n) {
  std::vector<std::uint64_t> out;
  if (n == 0) return {0};
  out.reserve(binomial(L, n));
  std::uint64_t m = low_mask(n);
  const std::uint64_t limit = low_mask(L);
  while (true) {
    out.push_back(m);
    if (m == (limit & ~low_mask(L - n))) break;
    // Gosper's hack
    std::uint64_t c = m & (~m + 1);
    std::uint64_t r = m + c;
    m = (((r ^ m) >> 2) / c) | r;
  }
  return out;
}

inline constexpr std::uint64_t kDefaultSectorBudget = 20'000'000;

// Lexicographic in (up, dn).
inline std::vector<Config> enumerate_sector(const SystemSpec& spec,
                                            std::uint64_t max_configs = kDefaultSectorBudget) {
  spec.validate();
  const auto n = sector_size(spec);
  if (n > max_configs)
    throw ResourceError("sector with " + std::to_string(n) + " configurations exceeds budget " +
                        std::to_string(max_configs));
  const auto ups = masks_with_popcount(spec.L, spec.n_up);
  const auto dns = masks_with_popcount(spec.L, spec.n_dn);
  std::vector<Config> out;
  out.reserve(n);
  for (auto u : ups)
    for (auto d : dns) out.push_back({u, d});
  return out;
}

// Index of cfg in a sorted sector listing, or -1.
inline std::ptrdiff_t sector_index(const std::vector<Config>& sector, const Config& cfg) {
  auto it = std::lower_bound(sector.begin(), sector.end(), cfg);
  if (it == sector.end() || *it != cfg) return -1;
  return it - sector.begin();
}

inline bool in_sector(const Config& c, const SystemSpec& spec) noexcept {
  const auto lim = ~low_mask(spec.L);
  return (c.up & lim) == 0 && (c.dn & lim) == 0 && c.count(Spin::up) == spec.n_up &&
         c.count(Spin::dn) == spec.n_dn;
}

inline std::string to_string(const Config& c, int L) {
  static constexpr char glyph[4] = {'.', 'u', 'd', '2'};
  std::string s(static_cast<std::size_t>(L), '.');
  for (int i = 0; i < L; ++i) s[static_cast<std::size_t>(i)] = glyph[site_state(c, i)];
  return s;
}

}  // namespace cpdvmc
