#pragma once

// Reference implementations used to validate the production paths.
// Nothing here reuses the connected-configuration enumeration, the
// screening index, the evaluation context or the production derivatives.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cpdvmc/ab_initio.hpp"
#include "cpdvmc/amplitude.hpp"
#include "cpdvmc/cpd_ansatz.hpp"
#include "cpdvmc/fock.hpp"
#include "cpdvmc/hamiltonian.hpp"
#include "cpdvmc/hartree_fock.hpp"
#include "cpdvmc/hubbard.hpp"

namespace cpdvmc::oracle {

// Spin-free integrals as nonzero term lists:
//   H = e_core + sum h_ij c+_is c_js + 1/2 sum (ij|kl) c+_is c+_kt c_lt c_js
struct Integrals {
  int L = 0;
  double e_core = 0.0;
  struct One {
    int i, j;
    double v;
  };
  struct Two {
    int i, j, k, l;
    double v;
  };
  std::vector<One> one;
  std::vector<Two> two;
};

inline Integrals integrals(const HubbardHamiltonian& hub) {
  const int L = hub.n_sites();
  const Eigen::MatrixXd& T = hub.lattice().hopping();
  Integrals out{L, 0.0, {}, {}};
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j)
      if (T(i, j) != 0.0) out.one.push_back({i, j, T(i, j)});
  if (hub.spec().U != 0.0)
    for (int i = 0; i < L; ++i) out.two.push_back({i, i, i, i, hub.spec().U});
  return out;
}

inline Integrals integrals(const AbInitioHamiltonian& H) {
  const int L = H.n_sites();
  Integrals out{L, H.e_core(), {}, {}};
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j)
      if (H.h1()(i, j) != 0.0) out.one.push_back({i, j, H.h1()(i, j)});
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j)
      for (int k = 0; k < L; ++k)
        for (int l = 0; l < L; ++l)
          if (const double v = H.eri(i, j, k, l); v != 0.0) out.two.push_back({i, j, k, l, v});
  return out;
}

inline Integrals integrals(const Hamiltonian& H) {
  return std::visit([](const auto& h) { return integrals(h); }, H);
}

// Columns (index, value) of H|n> for one sector configuration.
template <class F>
void apply_terms(const Integrals& ints, const Config& n, F&& f) {
  const int L = ints.L;
  f(n, ints.e_core);
  for (const auto& t : ints.one)
    for (Spin s : {Spin::up, Spin::dn}) {
      const auto r = try_apply(n, Excitation::single(spin_orbital_index(t.i, s, L), spin_orbital_index(t.j, s, L)), L);
      if (r) f(r->cfg, t.v * r->parity);
    }
  for (const auto& t : ints.two)
    for (Spin s : {Spin::up, Spin::dn})
      for (Spin u : {Spin::up, Spin::dn}) {
        const auto ex = Excitation::pair(spin_orbital_index(t.i, s, L), spin_orbital_index(t.k, u, L),
                                         spin_orbital_index(t.l, u, L), spin_orbital_index(t.j, s, L));
        const auto r = try_apply(n, ex, L);
        if (r) f(r->cfg, 0.5 * t.v * r->parity);
      }
}

inline constexpr std::size_t kDenseLimit = 50'000;

inline Eigen::SparseMatrix<double> sparse_hamiltonian(const Integrals& ints, const std::vector<Config>& sector) {
  const auto dim = static_cast<Eigen::Index>(sector.size());
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index col = 0; col < dim; ++col)
    apply_terms(ints, sector[static_cast<std::size_t>(col)], [&](const Config& target, double v) {
      const auto row = sector_index(sector, target);
      if (row < 0) throw ContractError("operator left the sector");
      trip.emplace_back(static_cast<Eigen::Index>(row), col, v);
    });
  Eigen::SparseMatrix<double> Hs(dim, dim);
  Hs.setFromTriplets(trip.begin(), trip.end());
  Hs.prune(0.0);
  return Hs;
}

// Rows and columns follow enumerate_sector order.
inline Eigen::MatrixXd dense_hamiltonian(const Hamiltonian& H, const SystemSpec& spec) {
  const auto sector = enumerate_sector(spec, kDenseLimit);
  return Eigen::MatrixXd(sparse_hamiltonian(integrals(H), sector));
}

struct GroundState {
  double energy = 0.0;
  Eigen::VectorXd vector;
  std::vector<Config> sector;
  double residual = 0.0;
  int iterations = 0;

  // psi lookup for sector configurations, zero outside.
  LogAmp operator()(const Config& c) const {
    const auto k = sector_index(sector, c);
    return k < 0 ? LogAmp{} : from_value(vector(k));
  }
};

// Lanczos with full reorthogonalization; dense eigensolver below 1000.
inline GroundState ground_state(const Hamiltonian& H, const SystemSpec& spec, double tol = 1e-11,
                                int max_iter = 600) {
  GroundState gs;
  gs.sector = enumerate_sector(spec, 2'000'000);
  const auto Hs = sparse_hamiltonian(integrals(H), gs.sector);
  const auto dim = Hs.rows();
  if (dim <= 1000) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(Hs)};
    gs.energy = es.eigenvalues()(0);
    gs.vector = es.eigenvectors().col(0);
    gs.residual = (Hs * gs.vector - gs.energy * gs.vector).norm();
    return gs;
  }
  const int m_max = static_cast<int>(std::min<Eigen::Index>(max_iter, dim));
  Eigen::MatrixXd V(dim, m_max);
  std::vector<double> alpha, beta;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  // deterministic start with weight on every configuration
  for (Eigen::Index k = 0; k < dim; ++k) v(k) = 1.0 + 0.01 * static_cast<double>((k * 7919) % 101);
  v.normalize();
  Eigen::VectorXd ritz;
  double theta = 0.0;
  for (int j = 0; j < m_max; ++j) {
    V.col(j) = v;
    Eigen::VectorXd w = Hs * v;
    alpha.push_back(v.dot(w));
    for (int pass = 0; pass < 2; ++pass) w -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * w);
    const double b = w.norm();
    const int m = j + 1;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(Eigen::Map<Eigen::VectorXd>(alpha.data(), m),
                              Eigen::Map<Eigen::VectorXd>(beta.data(), m - 1), Eigen::ComputeEigenvectors);
    theta = es.eigenvalues()(0);
    ritz = es.eigenvectors().col(0);
    gs.iterations = m;
    gs.residual = std::abs(b * ritz(m - 1));
    if (gs.residual < tol * std::max(1.0, std::abs(theta)) || b < 1e-14) break;
    beta.push_back(b);
    v = w / b;
  }
  gs.energy = theta;
  gs.vector = V.leftCols(gs.iterations) * ritz;
  gs.vector.normalize();
  gs.residual = (Hs * gs.vector - gs.energy * gs.vector).norm();
  if (gs.residual > 1e-6 * std::max(1.0, std::abs(gs.energy)))
    throw NumericalError("Lanczos did not converge: residual " + std::to_string(gs.residual));
  return gs;
}

// Eq. 6 evaluated term by term with no caching.
inline double brute_orbital(const CpdParams& p, int b, int r, int i, const Config& cfg) {
  const int mu = r % p.spec.L;
  double sum = 0.0;
  for (int m = 0; m < p.M; ++m) {
    double prod = 1.0;
    for (int nu = 0; nu < p.K(); ++nu) {
      const int x = p.lookup.row(mu)[static_cast<std::size_t>(nu)];
      const int up = static_cast<int>((cfg.up >> x) & 1U), dn = static_cast<int>((cfg.dn >> x) & 1U);
      prod *= p.eps[p.index(b, r, i, up + 2 * dn, nu, m)];
    }
    sum += prod;
  }
  return sum;
}

inline double cofactor_det(const Eigen::MatrixXd& A) {
  const auto n = A.rows();
  if (n == 0) return 1.0;
  if (n == 1) return A(0, 0);
  double det = 0.0;
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::MatrixXd minor(n - 1, n - 1);
    for (Eigen::Index r = 1; r < n; ++r)
      for (Eigen::Index k = 0, kk = 0; k < n; ++k)
        if (k != c) minor(r - 1, kk++) = A(r, k);
    det += ((c % 2 == 0) ? 1.0 : -1.0) * A(0, c) * cofactor_det(minor);
  }
  return det;
}

inline LogAmp brute_amplitude(const CpdParams& p, const Config& cfg) {
  LogAmp out{1, 0.0};
  for (int b = 0; b < p.n_blocks(); ++b) {
    std::vector<int> rows;
    for (int r = 0; r < p.rows(b); ++r) {
      const int spin = p.restricted() ? b : r / p.spec.L;
      const int x = r % p.spec.L;
      if (((spin == 0 ? cfg.up : cfg.dn) >> x) & 1U) rows.push_back(r);
    }
    const int n = p.orbitals(b);
    if (static_cast<int>(rows.size()) != n) throw ContractError("configuration outside sector");
    Eigen::MatrixXd A(n, n);
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < n; ++i) A(a, i) = brute_orbital(p, b, rows[static_cast<std::size_t>(a)], i, cfg);
    if (n <= 4) {
      out = out * from_value(cofactor_det(A));
    } else {
      out = out * from_value(A.fullPivLu().determinant());
    }
  }
  return out;
}

// Per-orbital CP Jastrow factors kappa[b][i][s][x][m] over all L sites.
struct JastrowCP {
  int L = 0;
  int M = 1;
  std::array<int, 2> n_orb{};
  std::vector<double> kappa;

  static JastrowCP ones(int L, int M, int n_up, int n_dn) {
    JastrowCP j{L, M, {n_up, n_dn}, {}};
    j.kappa.assign(static_cast<std::size_t>(n_up + n_dn) * kSiteStates * L * M, 1.0);
    return j;
  }
  double& at(int b, int i, int s, int x, int m) {
    return kappa[offset(b, i, s, x, m)];
  }
  double at(int b, int i, int s, int x, int m) const { return kappa[offset(b, i, s, x, m)]; }

  std::size_t offset(int b, int i, int s, int x, int m) const {
    const int orb = (b == 0 ? 0 : n_orb[0]) + i;
    return ((static_cast<std::size_t>(orb) * kSiteStates + static_cast<std::size_t>(s)) * L + static_cast<std::size_t>(x)) * M +
           static_cast<std::size_t>(m);
  }
};

// eps[mu][i][s][0][m] = phi_{mu i} kappa_{i;s,mu,m}, eps[mu][i][s][k>0][m] =
// kappa_{i;s,x_{mu k},m}. Restricted mode with the full lookup.
inline CpdParams factored_cpd(const SystemSpec& spec, const HFOrbitals& phi, const JastrowCP& j) {
  if (spec.spin_mode != SpinMode::restricted) throw ContractError("factored_cpd requires restricted mode");
  auto p = CpdParams::zeros(spec, j.M, LookupTable::full(spec.L));
  for (int b = 0; b < 2; ++b) {
    const auto& C = b == 0 ? phi.up : phi.dn;
    for (int mu = 0; mu < spec.L; ++mu)
      for (int i = 0; i < p.orbitals(b); ++i)
        for (int s = 0; s < kSiteStates; ++s)
          for (int nu = 0; nu < p.K(); ++nu)
            for (int m = 0; m < j.M; ++m) {
              const int x = p.lookup.site(mu, nu);
              p.at(b, mu, i, s, nu, m) = (nu == 0 ? C(mu, i) : 1.0) * j.at(b, i, s, x, m);
            }
  }
  return p;
}

// Doubly occupied site x contributes exp(g_x) through orbital 0 of the
// first nonempty spin block.
inline CpdParams gutzwiller_cpd(const SystemSpec& spec, const HFOrbitals& phi, const std::vector<double>& g) {
  if (static_cast<int>(g.size()) != spec.L) throw ContractError("need one Gutzwiller parameter per site");
  auto j = JastrowCP::ones(spec.L, 1, spec.n_up, spec.n_dn);
  const int b = spec.n_up > 0 ? 0 : 1;
  if (spec.n_up + spec.n_dn > 0)
    for (int x = 0; x < spec.L; ++x) j.at(b, 0, 3, x, 0) = std::exp(g[static_cast<std::size_t>(x)]);
  return factored_cpd(spec, phi, j);
}

inline double slater_det(const HFOrbitals& phi, const Config& cfg) {
  double out = 1.0;
  for (int b = 0; b < 2; ++b) {
    const auto& C = b == 0 ? phi.up : phi.dn;
    const auto rows = set_bits(b == 0 ? cfg.up : cfg.dn);
    Eigen::MatrixXd A(C.cols(), C.cols());
    for (Eigen::Index a = 0; a < C.cols(); ++a) A.row(a) = C.row(rows[static_cast<std::size_t>(a)]);
    out *= C.cols() <= 4 ? cofactor_det(A) : A.fullPivLu().determinant();
  }
  return out;
}

// prod_i CP_i(n) * det(phi_occ)
inline double jastrow_det_amplitude(const HFOrbitals& phi, const JastrowCP& j, const Config& cfg) {
  double jas = 1.0;
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i < j.n_orb[static_cast<std::size_t>(b)]; ++i) {
      double sum = 0.0;
      for (int m = 0; m < j.M; ++m) {
        double prod = 1.0;
        for (int x = 0; x < j.L; ++x) prod *= j.at(b, i, site_state(cfg, x), x, m);
        sum += prod;
      }
      jas *= sum;
    }
  return jas * slater_det(phi, cfg);
}

// exp(sum_x g_x [n_x = 3]) * det(phi_occ)
inline double gutzwiller_amplitude(const HFOrbitals& phi, const std::vector<double>& g, const Config& cfg) {
  double s = 0.0;
  for (std::size_t x = 0; x < g.size(); ++x)
    if (((cfg.up & cfg.dn) >> x) & 1U) s += g[x];
  return std::exp(s) * slater_det(phi, cfg);
}

// Spin-resolved one- and two-body density matrices of a normalized sector
// vector: g1[s](i,j) = <c+_is c_js>, g2[s][t](i,j,k,l) = <c+_is c+_kt c_lt c_js>.
struct SpinRdms {
  int L = 0;
  std::array<Eigen::MatrixXd, 2> g1;
  std::array<std::array<std::vector<double>, 2>, 2> g2;

  double two(int s, int t, int i, int j, int k, int l) const {
    return g2[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)]
             [static_cast<std::size_t>(((i * L + j) * L + k) * L + l)];
  }
};

inline SpinRdms spin_rdms(const std::vector<Config>& sector, const Eigen::VectorXd& psi, int L) {
  SpinRdms out;
  out.L = L;
  for (auto& g : out.g1) g = Eigen::MatrixXd::Zero(L, L);
  for (auto& row : out.g2)
    for (auto& g : row) g.assign(static_cast<std::size_t>(L) * L * L * L, 0.0);
  const double norm2 = psi.squaredNorm();
  for (std::size_t col = 0; col < sector.size(); ++col) {
    const double c = psi(static_cast<Eigen::Index>(col));
    if (c == 0.0) continue;
    const Config& n = sector[col];
    for (int s = 0; s < 2; ++s)
      for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j) {
          const auto sp = static_cast<Spin>(s);
          const auto r = try_apply(n, Excitation::single(spin_orbital_index(i, sp, L), spin_orbital_index(j, sp, L)), L);
          if (!r) continue;
          const auto k = sector_index(sector, r->cfg);
          out.g1[static_cast<std::size_t>(s)](i, j) += psi(k) * c * r->parity / norm2;
        }
    for (int s = 0; s < 2; ++s)
      for (int t = 0; t < 2; ++t)
        for (int i = 0; i < L; ++i)
          for (int j = 0; j < L; ++j)
            for (int k = 0; k < L; ++k)
              for (int l = 0; l < L; ++l) {
                const auto ex = Excitation::pair(spin_orbital_index(i, static_cast<Spin>(s), L),
                                                 spin_orbital_index(k, static_cast<Spin>(t), L),
                                                 spin_orbital_index(l, static_cast<Spin>(t), L),
                                                 spin_orbital_index(j, static_cast<Spin>(s), L));
                const auto r = try_apply(n, ex, L);
                if (!r) continue;
                const auto idx = sector_index(sector, r->cfg);
                out.g2[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)]
                      [static_cast<std::size_t>(((i * L + j) * L + k) * L + l)] += psi(idx) * c * r->parity / norm2;
              }
  }
  return out;
}

// <S^z_a S^z_b> straight from the diagonal of the state.
inline double direct_szsz(const std::vector<Config>& sector, const Eigen::VectorXd& psi, int a, int b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < sector.size(); ++k) {
    const auto& n = sector[k];
    auto sz = [&](int x) {
      return 0.5 * (static_cast<double>((n.up >> x) & 1U) - static_cast<double>((n.dn >> x) & 1U));
    };
    acc += psi(static_cast<Eigen::Index>(k)) * psi(static_cast<Eigen::Index>(k)) * sz(a) * sz(b);
  }
  return acc / psi.squaredNorm();
}

}  // namespace cpdvmc::oracle
