#pragma once

// CP-decomposed backflow determinant.
//
// Each backflow orbital is a sum of M rank-one products over the K sites
// in the row's lookup table:
//
//   phi_{mu i}(n) = sum_m prod_{nu<K} eps[mu][i][ n_{x(mu,nu)} ][nu][m]
//
// where n_x in {0,1,2,3} is the full spinful occupation of site x. The
// amplitude is the determinant of phi restricted to the occupied rows.
//
// Restricted mode keeps two blocks (up rows/orbitals, down rows/orbitals)
// and psi = det(A_up) det(A_dn). Generalized mode has one block whose rows
// are the 2L spin-orbitals and whose columns are all N orbitals.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cpdvmc/ab_initio.hpp"
#include "cpdvmc/amplitude.hpp"
#include "cpdvmc/fock.hpp"
#include "cpdvmc/hartree_fock.hpp"
#include "cpdvmc/hubbard.hpp"
#include "cpdvmc/log.hpp"

namespace cpdvmc {

inline constexpr int kSiteStates = 4;

class LookupTable {
 public:
  LookupTable() = default;

  LookupTable(int L, int K, std::vector<int> sites) : L_(L), K_(K), sites_(std::move(sites)) {
    if (L < 1 || L > kMaxSites) throw ContractError("lookup: L outside [1, 64]");
    if (K < 1 || K > L) throw ContractError("lookup: K must satisfy 1 <= K <= L");
    if (sites_.size() != static_cast<std::size_t>(L) * K) throw ContractError("lookup: size is not L*K");
    slot_.assign(static_cast<std::size_t>(L) * L, -1);
    referrers_.assign(static_cast<std::size_t>(L), {});
    for (int mu = 0; mu < L; ++mu) {
      if (site(mu, 0) != mu) throw ContractError("lookup: row " + std::to_string(mu) + " must start with itself");
      for (int nu = 0; nu < K; ++nu) {
        const int x = site(mu, nu);
        if (x < 0 || x >= L) throw ContractError("lookup: site index out of range");
        auto& s = slot_[static_cast<std::size_t>(mu * L + x)];
        if (s >= 0) throw ContractError("lookup: duplicate site in row " + std::to_string(mu));
        s = nu;
        referrers_[static_cast<std::size_t>(x)].push_back({mu, nu});
      }
    }
  }

  // Every row is itself followed by the remaining sites in ascending order.
  static LookupTable full(int L) {
    std::vector<int> s;
    s.reserve(static_cast<std::size_t>(L) * L);
    for (int mu = 0; mu < L; ++mu) {
      s.push_back(mu);
      for (int x = 0; x < L; ++x)
        if (x != mu) s.push_back(x);
    }
    return LookupTable(L, L, std::move(s));
  }

  int L() const noexcept { return L_; }
  int K() const noexcept { return K_; }
  int site(int mu, int nu) const noexcept { return sites_[static_cast<std::size_t>(mu * K_ + nu)]; }
  std::span<const int> row(int mu) const noexcept {
    return {sites_.data() + static_cast<std::ptrdiff_t>(mu) * K_, static_cast<std::size_t>(K_)};
  }
  // Position of site x in row mu, or -1.
  int slot(int mu, int x) const noexcept { return slot_[static_cast<std::size_t>(mu * L_ + x)]; }
  // (row, slot) pairs whose row contains site x.
  const std::vector<std::pair<int, int>>& referrers(int x) const {
    return referrers_[static_cast<std::size_t>(x)];
  }
  const std::vector<int>& data() const noexcept { return sites_; }

  friend bool operator==(const LookupTable& a, const LookupTable& b) {
    return a.L_ == b.L_ && a.K_ == b.K_ && a.sites_ == b.sites_;
  }

 private:
  int L_ = 0;
  int K_ = 0;
  std::vector<int> sites_;
  std::vector<int> slot_;
  std::vector<std::vector<std::pair<int, int>>> referrers_;
};

namespace detail {

// Row mu: mu, then the K-1 best other sites under `better`.
template <class Better>
LookupTable ranked_lookup(int L, int K, Better&& better) {
  if (K < 1 || K > L) throw ContractError("lookup: K must satisfy 1 <= K <= L");
  std::vector<int> sites;
  sites.reserve(static_cast<std::size_t>(L) * K);
  for (int mu = 0; mu < L; ++mu) {
    std::vector<int> others;
    for (int x = 0; x < L; ++x)
      if (x != mu) others.push_back(x);
    std::stable_sort(others.begin(), others.end(), [&](int a, int b) { return better(mu, a, b); });
    sites.push_back(mu);
    sites.insert(sites.end(), others.begin(), others.begin() + (K - 1));
  }
  return LookupTable(L, K, std::move(sites));
}

}  // namespace detail

// K most strongly exchange-coupled partners per site; ties by site index.
inline LookupTable build_lookup(const ExchangeMatrix& ex, int K) {
  return detail::ranked_lookup(static_cast<int>(ex.K.rows()), K, [&](int mu, int a, int b) {
    return ex.K(mu, a) > ex.K(mu, b);
  });
}

// K nearest partners by lattice graph distance; ties by site index.
inline LookupTable build_lookup(const Lattice& lattice, int K) {
  const int L = lattice.n_sites();
  std::vector<std::vector<int>> dist(static_cast<std::size_t>(L));
  for (int mu = 0; mu < L; ++mu) {
    dist[static_cast<std::size_t>(mu)] = lattice.graph_distances(mu);
    for (auto& d : dist[static_cast<std::size_t>(mu)])
      if (d < 0) d = std::numeric_limits<int>::max();
  }
  return detail::ranked_lookup(L, K, [&](int mu, int a, int b) {
    return dist[static_cast<std::size_t>(mu)][static_cast<std::size_t>(a)] <
           dist[static_cast<std::size_t>(mu)][static_cast<std::size_t>(b)];
  });
}

struct CpdParams {
  SystemSpec spec;
  int M = 1;
  LookupTable lookup;
  std::vector<double> eps;

  static CpdParams zeros(const SystemSpec& spec, int M, LookupTable lookup) {
    spec.validate();
    if (M < 1) throw ContractError("support dimension M must be >= 1");
    if (lookup.L() != spec.L) throw ContractError("lookup table size does not match L");
    CpdParams p{spec, M, std::move(lookup), {}};
    p.eps.assign(p.block_offset(p.n_blocks()), 0.0);
    return p;
  }

  bool restricted() const noexcept { return spec.spin_mode == SpinMode::restricted; }
  int K() const noexcept { return lookup.K(); }
  int n_blocks() const noexcept { return restricted() ? 2 : 1; }
  int rows(int) const noexcept { return restricted() ? spec.L : 2 * spec.L; }
  int orbitals(int b) const noexcept {
    if (!restricted()) return spec.n_electrons();
    return b == 0 ? spec.n_up : spec.n_dn;
  }
  // Spatial site whose lookup row governs row r of a block.
  int row_site(int r) const noexcept { return r % spec.L; }

  std::size_t block_size(int b) const noexcept {
    return static_cast<std::size_t>(rows(b)) * orbitals(b) * kSiteStates * K() * M;
  }
  std::size_t block_offset(int b) const noexcept {
    std::size_t off = 0;
    for (int k = 0; k < b; ++k) off += block_size(k);
    return off;
  }
  std::size_t index(int b, int r, int i, int s, int nu, int m) const noexcept {
    const auto n_orb = static_cast<std::size_t>(orbitals(b));
    return block_offset(b) +
           ((((static_cast<std::size_t>(r) * n_orb + static_cast<std::size_t>(i)) * kSiteStates +
              static_cast<std::size_t>(s)) * static_cast<std::size_t>(K()) + static_cast<std::size_t>(nu)) *
                static_cast<std::size_t>(M) + static_cast<std::size_t>(m));
  }
  double& at(int b, int r, int i, int s, int nu, int m) noexcept { return eps[index(b, r, i, s, nu, m)]; }
  double at(int b, int r, int i, int s, int nu, int m) const noexcept { return eps[index(b, r, i, s, nu, m)]; }
  std::size_t size() const noexcept { return eps.size(); }

  // Block and row for spin-orbital p = spin*L + site.
  std::pair<int, int> locate(int p) const noexcept {
    if (restricted()) return {p / spec.L, p % spec.L};
    return {0, p};
  }

  // Occupied rows of block b in canonical order.
  std::vector<int> occupied_rows(int b, const Config& c) const {
    if (restricted()) return set_bits(b == 0 ? c.up : c.dn);
    auto rows_up = set_bits(c.up);
    for (int x : set_bits(c.dn)) rows_up.push_back(x + spec.L);
    return rows_up;
  }
};

inline double orbital_value(const CpdParams& p, int b, int r, int i, const Config& cfg) {
  const int mu = p.row_site(r);
  double sum = 0.0;
  for (int m = 0; m < p.M; ++m) {
    double prod = 1.0;
    for (int nu = 0; nu < p.K(); ++nu) prod *= p.at(b, r, i, site_state(cfg, p.lookup.site(mu, nu)), nu, m);
    sum += prod;
  }
  return sum;
}

// Spin-orbital mu, orbital i of its block.
inline double orbital_value(const CpdParams& p, int mu, int i, const Config& cfg) {
  const auto [b, r] = p.locate(mu);
  if (i < 0 || i >= p.orbitals(b)) throw ContractError("orbital index out of range");
  return orbital_value(p, b, r, i, cfg);
}

inline Eigen::MatrixXd orbital_matrix(const CpdParams& p, int b, const Config& cfg) {
  const auto rows = p.occupied_rows(b, cfg);
  const int n = p.orbitals(b);
  if (static_cast<int>(rows.size()) != n) throw ContractError("configuration is outside the parameter sector");
  Eigen::MatrixXd A(n, n);
  for (int a = 0; a < n; ++a)
    for (int i = 0; i < n; ++i) A(a, i) = orbital_value(p, b, rows[static_cast<std::size_t>(a)], i, cfg);
  return A;
}

inline LogAmp log_amplitude(const CpdParams& p, const Config& cfg) {
  LogAmp out{1, 0.0};
  for (int b = 0; b < p.n_blocks(); ++b) out = out * log_det(orbital_matrix(p, b, cfg));
  return out;
}

using SparseGradient = std::vector<std::pair<std::uint32_t, double>>;

// d log psi / d eps, nonzero only on the occupied rows and on the state
// each lookup slot currently holds. Sorted by parameter index.
inline SparseGradient log_derivatives(const CpdParams& p, const Config& cfg) {
  SparseGradient out;
  const int K = p.K();
  std::vector<double> f(static_cast<std::size_t>(K)), pre(static_cast<std::size_t>(K) + 1),
      suf(static_cast<std::size_t>(K) + 1);
  std::vector<int> states(static_cast<std::size_t>(K));
  for (int b = 0; b < p.n_blocks(); ++b) {
    const int n = p.orbitals(b);
    if (n == 0) continue;
    const Eigen::MatrixXd A = orbital_matrix(p, b, cfg);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    if (log_det(A).is_zero()) throw NumericalError("singular orbital matrix in log_derivatives");
    const Eigen::MatrixXd inv = lu.inverse();
    const auto rows = p.occupied_rows(b, cfg);
    for (int a = 0; a < n; ++a) {
      const int r = rows[static_cast<std::size_t>(a)];
      const int mu = p.row_site(r);
      for (int nu = 0; nu < K; ++nu) states[static_cast<std::size_t>(nu)] = site_state(cfg, p.lookup.site(mu, nu));
      for (int i = 0; i < n; ++i) {
        const double w = inv(i, a);
        for (int m = 0; m < p.M; ++m) {
          for (int nu = 0; nu < K; ++nu) f[static_cast<std::size_t>(nu)] = p.at(b, r, i, states[static_cast<std::size_t>(nu)], nu, m);
          pre[0] = 1.0;
          for (int nu = 0; nu < K; ++nu) pre[static_cast<std::size_t>(nu) + 1] = pre[static_cast<std::size_t>(nu)] * f[static_cast<std::size_t>(nu)];
          suf[static_cast<std::size_t>(K)] = 1.0;
          for (int nu = K - 1; nu >= 0; --nu) suf[static_cast<std::size_t>(nu)] = suf[static_cast<std::size_t>(nu) + 1] * f[static_cast<std::size_t>(nu)];
          for (int nu = 0; nu < K; ++nu) {
            const double d = w * pre[static_cast<std::size_t>(nu)] * suf[static_cast<std::size_t>(nu) + 1];
            out.push_back({static_cast<std::uint32_t>(p.index(b, r, i, states[static_cast<std::size_t>(nu)], nu, m)), d});
          }
        }
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  return out;
}

// Orbitals spanning the HF determinant with the factorized product
// initialised to one: eps[.][i][s][0][0] = phi_{mu i}, eps[.][.][s][nu>0][0] = 1,
// everything at m > 0 zero, plus i.i.d. normal(0, sigma) noise drawn in
// storage order from mt19937_64(seed).
//
// With sigma = 0 the m > 0 components are dead: every product contains a
// zero factor and so does every derivative with K >= 2. Use sigma > 0 to
// let them train.
inline CpdParams init_from_hf(const SystemSpec& spec, const HFOrbitals& hf, int M, LookupTable lookup,
                              double sigma, std::uint64_t seed) {
  const int L = spec.L;
  if (hf.up.rows() != L || hf.up.cols() != spec.n_up || hf.dn.rows() != L || hf.dn.cols() != spec.n_dn)
    throw ContractError("HF orbital shapes do not match the system");
  auto p = CpdParams::zeros(spec, M, std::move(lookup));
  auto phi = [&](int b, int r, int i) -> double {
    if (p.restricted()) return b == 0 ? hf.up(r, i) : hf.dn(r, i);
    const bool up_row = r < L, up_orb = i < spec.n_up;
    if (up_row != up_orb) return 0.0;
    return up_row ? hf.up(r, i) : hf.dn(r - L, i - spec.n_up);
  };
  for (int b = 0; b < p.n_blocks(); ++b)
    for (int r = 0; r < p.rows(b); ++r)
      for (int i = 0; i < p.orbitals(b); ++i)
        for (int s = 0; s < kSiteStates; ++s) {
          p.at(b, r, i, s, 0, 0) = phi(b, r, i);
          for (int nu = 1; nu < p.K(); ++nu) p.at(b, r, i, s, nu, 0) = 1.0;
        }
  for (int b = 0; b < 2; ++b) {
    const auto& C = b == 0 ? hf.up : hf.dn;
    int pairs = 0;
    for (Eigen::Index x = 0; x < C.rows(); ++x)
      for (Eigen::Index y = x + 1; y < C.rows(); ++y) {
        const double nx = C.row(x).norm(), ny = C.row(y).norm();
        if (C.cols() > 1 && nx > 0 && ny > 0 && std::abs(C.row(x).dot(C.row(y))) > (1 - 1e-12) * nx * ny) ++pairs;
      }
    if (pairs > 0)
      log::warn(std::string(b == 0 ? "up" : "down") + " HF orbitals have " + std::to_string(pairs) +
                " proportional row pairs; determinants containing both rows vanish");
  }
  if (sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& e : p.eps) e += noise(rng);
  }
  return p;
}

// Binary checkpoint, little-endian:
//   "CPDB" | u32 version=1 | u32 spin_mode | u32 L K M Nup Ndn
//   | L*K u32 lookup (row-major) | f64 eps in storage order
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}
inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
}
inline std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t& pos) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(in[pos++]) << (8 * k);
  return v;
}
inline double get_f64(std::span<const std::uint8_t> in, std::size_t& pos) {
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(in[pos++]) << (8 * k);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline std::vector<std::uint8_t> save_checkpoint(const CpdParams& p) {
  std::vector<std::uint8_t> out{'C', 'P', 'D', 'B'};
  out.reserve(36 + 4 * p.lookup.data().size() + 8 * p.size());
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(p.spec.spin_mode));
  for (int v : {p.spec.L, p.K(), p.M, p.spec.n_up, p.spec.n_dn}) detail::put_u32(out, static_cast<std::uint32_t>(v));
  for (int x : p.lookup.data()) detail::put_u32(out, static_cast<std::uint32_t>(x));
  for (double e : p.eps) detail::put_f64(out, e);
  return out;
}

inline CpdParams load_checkpoint(std::span<const std::uint8_t> in) {
  constexpr std::size_t kHeader = 4 + 4 * 7;
  if (in.size() < kHeader) throw ParseError("checkpoint truncated: header incomplete");
  if (in[0] != 'C' || in[1] != 'P' || in[2] != 'D' || in[3] != 'B') throw ParseError("checkpoint: bad magic");
  std::size_t pos = 4;
  const auto version = detail::get_u32(in, pos);
  if (version != kCheckpointVersion)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  const auto mode = detail::get_u32(in, pos);
  if (mode > 1) throw ParseError("checkpoint: invalid spin mode");
  std::uint32_t dims[5];
  for (auto& d : dims) d = detail::get_u32(in, pos);
  const auto [L, K, M, n_up, n_dn] = std::tuple(dims[0], dims[1], dims[2], dims[3], dims[4]);
  if (L < 1 || L > kMaxSites || K < 1 || K > L || M < 1 || M > (1U << 20) || n_up > L || n_dn > L)
    throw ParseError("checkpoint: inconsistent dimensions");
  SystemSpec spec{static_cast<int>(L), static_cast<int>(n_up), static_cast<int>(n_dn), static_cast<SpinMode>(mode)};
  const std::size_t n_lookup = static_cast<std::size_t>(L) * K;
  if (in.size() < pos + 4 * n_lookup) throw ParseError("checkpoint truncated: lookup table incomplete");
  std::vector<int> sites(n_lookup);
  for (auto& s : sites) s = static_cast<int>(detail::get_u32(in, pos));
  CpdParams p;
  try {
    p = CpdParams::zeros(spec, static_cast<int>(M), LookupTable(static_cast<int>(L), static_cast<int>(K), std::move(sites)));
  } catch (const ContractError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  if (in.size() != pos + 8 * p.size())
    throw ParseError("checkpoint: expected " + std::to_string(pos + 8 * p.size()) + " bytes, got " +
                     std::to_string(in.size()));
  for (auto& e : p.eps) e = detail::get_f64(in, pos);
  return p;
}

inline void write_checkpoint(const std::string& path, const CpdParams& p) {
  const auto bytes = save_checkpoint(p);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline CpdParams read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), {}};
  return load_checkpoint(bytes);
}

}  // namespace cpdvmc
