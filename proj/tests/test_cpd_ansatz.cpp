#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "cpdvmc/cpd_ansatz.hpp"
#include "cpdvmc/eval_context.hpp"
#include "cpdvmc/fcidump.hpp"
#include "cpdvmc/hartree_fock.hpp"
#include "cpdvmc/oracle.hpp"
#include "helpers.hpp"

using namespace cpdvmc;
using testing_util::data_path;
using testing_util::random_params;
using testing_util::rel;

namespace {

ExchangeMatrix load_exchange(const std::string& name, int L) {
  std::ifstream in(data_path(name));
  ExchangeMatrix ex{Eigen::MatrixXd(L, L)};
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) in >> ex.K(i, j);
  return ex;
}

HFOrbitals hubbard_hf(const HubbardSpec& hs, const SystemSpec& spec) {
  return run_scf(to_ab_initio(HubbardHamiltonian(hs)), spec.n_up, spec.n_dn).orbitals;
}

double hf_det(const HFOrbitals& hf, const Config& c) { return oracle::slater_det(hf, c); }

// Random sector-preserving single excitation that is valid for c.
Excitation random_move(const Config& c, int L, std::mt19937_64& rng) {
  while (true) {
    const auto s = static_cast<Spin>(rng() % 2);
    const auto occ = set_bits(c.mask(s));
    const auto vir = set_bits(~c.mask(s) & low_mask(L));
    if (occ.empty() || vir.empty()) continue;
    const int i = occ[rng() % occ.size()], a = vir[rng() % vir.size()];
    return Excitation::single(spin_orbital_index(a, s, L), spin_orbital_index(i, s, L));
  }
}

}  // namespace

TEST(Lookup, FullAndTrivial) {
  const auto full = LookupTable::full(5);
  for (int mu = 0; mu < 5; ++mu) {
    std::set<int> row(full.row(mu).begin(), full.row(mu).end());
    EXPECT_EQ(row.size(), 5U);
    EXPECT_EQ(full.site(mu, 0), mu);
  }
  const Lattice lat({2, 2, 1.0, 0.0, false, false});
  const auto k1 = build_lookup(lat, 1);
  for (int mu = 0; mu < 4; ++mu) EXPECT_EQ(k1.row(mu).size(), 1U);
  const auto ex1 = build_lookup(ExchangeMatrix{Eigen::MatrixXd::Identity(3, 3)}, 1);
  EXPECT_EQ(ex1.data(), (std::vector<int>{0, 1, 2}));
}

TEST(Lookup, LatticeDistanceWithIndexTies) {
  // 4x2 lattice, sites 0..3 on the first row
  const Lattice lat({4, 2, 1.0, 0.0, false, false});
  const auto t = build_lookup(lat, 4);
  EXPECT_EQ(std::vector<int>(t.row(0).begin(), t.row(0).end()), (std::vector<int>{0, 1, 4, 2}));
  EXPECT_EQ(std::vector<int>(t.row(5).begin(), t.row(5).end()), (std::vector<int>{5, 1, 4, 6}));
}

TEST(Lookup, ExchangeRankingOnHydrogenSheet) {
  // bulk atoms of the 6x6 sheet: self plus the four nearest neighbours
  for (const auto* name : {"h36_sheet_exchange.txt", "h36_sheet_exchange_extended.txt"}) {
    const auto t = build_lookup(load_exchange(name, 36), 5);
    for (int mu : {14, 15, 20, 21}) {
      const int x = mu % 6, y = mu / 6;
      const std::set<int> expect{mu, mu - 1, mu + 1, (y - 1) * 6 + x, (y + 1) * 6 + x};
      const std::set<int> got(t.row(mu).begin(), t.row(mu).end());
      EXPECT_EQ(got, expect) << name << " row " << mu;
    }
  }
}

TEST(Lookup, ValidationAndSlots) {
  EXPECT_THROW(LookupTable(2, 2, {0, 0, 1, 0}), ContractError);
  EXPECT_THROW(LookupTable(2, 2, {1, 0, 1, 0}), ContractError);
  EXPECT_THROW(LookupTable(2, 3, {0, 1, 2, 1, 0, 2}), ContractError);
  const LookupTable t(3, 2, {0, 2, 1, 0, 2, 1});
  EXPECT_EQ(t.slot(0, 2), 1);
  EXPECT_EQ(t.slot(0, 1), -1);
  EXPECT_EQ(t.referrers(0).size(), 2U);
}

TEST(Orbital, ConstantAndOnes) {
  const SystemSpec spec{3, 1, 1};
  auto p = CpdParams::zeros(spec, 1, LookupTable(3, 1, {0, 1, 2}));
  for (int s = 0; s < 4; ++s) p.at(0, 1, 0, s, 0, 0) = 0.7;
  for (const auto& c : enumerate_sector(spec)) EXPECT_EQ(orbital_value(p, 1, 0, c), 0.7);
  auto q = CpdParams::zeros(spec, 3, LookupTable::full(3));
  std::fill(q.eps.begin(), q.eps.end(), 1.0);
  for (const auto& c : enumerate_sector(spec)) EXPECT_EQ(orbital_value(q, 4, 0, c), 3.0);
}

TEST(Orbital, MatchesBruteForce) {
  for (auto mode : {SpinMode::restricted, SpinMode::generalized}) {
    const SystemSpec spec{5, 2, 2, mode};
    const auto p = random_params(spec, 3, build_lookup(Lattice({5, 1, 1.0, 0.0, true, false}), 3), 17);
    for (const auto& c : enumerate_sector(spec))
      for (int b = 0; b < p.n_blocks(); ++b)
        for (int r = 0; r < p.rows(b); ++r)
          for (int i = 0; i < p.orbitals(b); ++i)
            EXPECT_NEAR(orbital_value(p, b, r, i, c), oracle::brute_orbital(p, b, r, i, c), 1e-14);
  }
}

TEST(Amplitude, MatchesBruteForce) {
  for (auto mode : {SpinMode::restricted, SpinMode::generalized}) {
    for (const SystemSpec spec : {SystemSpec{4, 2, 1, mode}, SystemSpec{4, 1, 1, mode}, SystemSpec{4, 2, 2, mode}}) {
      const auto p = random_params(spec, 2, LookupTable::full(4), 23);
      for (const auto& c : enumerate_sector(spec)) {
        const auto a = log_amplitude(p, c), b = oracle::brute_amplitude(p, c);
        EXPECT_EQ(a.sign, b.sign);
        EXPECT_NEAR(a.log_abs, b.log_abs, 1e-11);
      }
    }
  }
}

TEST(Amplitude, SingleElectronIsOrbital) {
  const SystemSpec spec{4, 1, 0};
  const auto p = random_params(spec, 2, LookupTable::full(4), 5);
  for (const auto& c : enumerate_sector(spec)) {
    const int mu = std::countr_zero(c.up);
    EXPECT_NEAR(log_amplitude(p, c).value(), orbital_value(p, mu, 0, c), 1e-14);
  }
}

TEST(Amplitude, SingularAndNonFinite) {
  const SystemSpec spec{2, 2, 0};
  auto p = CpdParams::zeros(spec, 1, LookupTable::full(2));
  std::fill(p.eps.begin(), p.eps.end(), 1.0);
  EXPECT_EQ(log_amplitude(p, Config{0b11, 0}).sign, 0);
  p.at(0, 0, 0, 1, 0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(log_amplitude(p, Config{0b11, 0}), ContractError);
}

TEST(HfInit, ReproducesHartreeFockDeterminant) {
  const HubbardSpec hs{4, 1, 1.0, 4.0, false, false};
  const SystemSpec spec{4, 2, 2};
  const auto hf = hubbard_hf(hs, spec);
  const auto p1 = init_from_hf(spec, hf, 1, LookupTable::full(4), 0.0, 0);
  const auto p3 = init_from_hf(spec, hf, 3, build_lookup(Lattice(hs), 2), 0.0, 0);
  for (const auto& c : enumerate_sector(spec)) {
    const double ref = hf_det(hf, c);
    EXPECT_NEAR(log_amplitude(p1, c).value(), ref, 1e-12 * std::max(1.0, std::abs(ref)));
    EXPECT_EQ(log_amplitude(p3, c).sign, log_amplitude(p1, c).sign);
    if (!log_amplitude(p1, c).is_zero()) {
      EXPECT_NEAR(log_amplitude(p3, c).log_abs, log_amplitude(p1, c).log_abs, 1e-12);
    }
  }
}

TEST(HfInit, GeneralizedModeMatchesRestricted) {
  const HubbardSpec hs{3, 1, 1.0, 2.0, true, false};
  const SystemSpec r{3, 2, 1}, g{3, 2, 1, SpinMode::generalized};
  const auto hf = hubbard_hf(hs, r);
  const auto pr = init_from_hf(r, hf, 1, LookupTable::full(3), 0.0, 0);
  const auto pg = init_from_hf(g, hf, 1, LookupTable::full(3), 0.0, 0);
  for (const auto& c : enumerate_sector(r)) {
    EXPECT_EQ(log_amplitude(pr, c).sign, log_amplitude(pg, c).sign);
    EXPECT_NEAR(log_amplitude(pr, c).log_abs, log_amplitude(pg, c).log_abs, 1e-12);
  }
}

TEST(HfInit, NoiseIsDeterministic) {
  const SystemSpec spec{4, 2, 2};
  const auto hf = hubbard_hf({4, 1, 1.0, 4.0, false, false}, spec);
  const auto a = init_from_hf(spec, hf, 2, LookupTable::full(4), 0.01, 42);
  const auto b = init_from_hf(spec, hf, 2, LookupTable::full(4), 0.01, 42);
  const auto c = init_from_hf(spec, hf, 2, LookupTable::full(4), 0.01, 43);
  EXPECT_EQ(a.eps, b.eps);
  EXPECT_NE(a.eps, c.eps);
  EXPECT_THROW(init_from_hf(SystemSpec{4, 1, 2}, hf, 1, LookupTable::full(4), 0.0, 0), ContractError);
}

TEST(Ansatz, RestrictedEmbedsInGeneralized) {
  const SystemSpec r{4, 2, 1}, g{4, 2, 1, SpinMode::generalized};
  const auto lookup = build_lookup(Lattice({4, 1, 1.0, 0.0, true, false}), 3);
  const auto pr = random_params(r, 2, lookup, 9);
  auto pg = CpdParams::zeros(g, 2, lookup);
  for (int row = 0; row < 8; ++row) {
    const int b = row / 4;
    for (int i = 0; i < pr.orbitals(b); ++i) {
      const int col = b == 0 ? i : 2 + i;
      for (int s = 0; s < 4; ++s)
        for (int nu = 0; nu < 3; ++nu)
          for (int m = 0; m < 2; ++m) pg.at(0, row, col, s, nu, m) = pr.at(b, row % 4, i, s, nu, m);
    }
  }
  for (const auto& c : enumerate_sector(r)) {
    const auto a = log_amplitude(pr, c), b = log_amplitude(pg, c);
    EXPECT_EQ(a.sign, b.sign);
    EXPECT_NEAR(a.log_abs, b.log_abs, 1e-12);
  }
}

TEST(Ansatz, LookupOrderingGauge) {
  const SystemSpec spec{5, 2, 2};
  const auto lookup = LookupTable::full(5);
  const auto p = random_params(spec, 2, lookup, 31);
  std::mt19937_64 rng(2);
  std::vector<int> sites = lookup.data();
  std::vector<std::vector<int>> perm(5);
  for (int mu = 0; mu < 5; ++mu) {
    perm[static_cast<std::size_t>(mu)] = {0, 1, 2, 3, 4};
    std::shuffle(perm[static_cast<std::size_t>(mu)].begin() + 1, perm[static_cast<std::size_t>(mu)].end(), rng);
    for (int nu = 0; nu < 5; ++nu)
      sites[static_cast<std::size_t>(mu * 5 + nu)] = lookup.site(mu, perm[static_cast<std::size_t>(mu)][static_cast<std::size_t>(nu)]);
  }
  auto q = CpdParams::zeros(spec, 2, LookupTable(5, 5, sites));
  for (int b = 0; b < 2; ++b)
    for (int r = 0; r < 5; ++r)
      for (int i = 0; i < 2; ++i)
        for (int s = 0; s < 4; ++s)
          for (int nu = 0; nu < 5; ++nu)
            for (int m = 0; m < 2; ++m)
              q.at(b, r, i, s, nu, m) = p.at(b, r, i, s, perm[static_cast<std::size_t>(r)][static_cast<std::size_t>(nu)], m);
  for (const auto& c : enumerate_sector(spec)) {
    EXPECT_EQ(log_amplitude(p, c).sign, log_amplitude(q, c).sign);
    EXPECT_NEAR(log_amplitude(p, c).log_abs, log_amplitude(q, c).log_abs, 1e-12);
  }
}

TEST(Derivatives, MatchFiniteDifferences) {
  const std::vector<std::pair<SystemSpec, int>> cases = {
      {SystemSpec{4, 2, 2}, 4}, {SystemSpec{5, 2, 1, SpinMode::generalized}, 3}, {SystemSpec{4, 1, 0}, 2}};
  std::mt19937_64 rng(12);
  for (const auto& [spec, K] : cases) {
    auto p = random_params(spec, 2, build_lookup(Lattice({spec.L, 1, 1.0, 0.0, true, false}), K), 77, 0.3, 1.2);
    for (const auto& c : enumerate_sector(spec)) {
      const auto a0 = log_amplitude(p, c);
      if (a0.is_zero()) continue;
      const auto d = log_derivatives(p, c);
      std::map<std::uint32_t, double> dm(d.begin(), d.end());
      EXPECT_EQ(dm.size(), d.size());
      for (int t = 0; t < 20; ++t) {
        const auto k = static_cast<std::uint32_t>(rng() % p.size());
        const double h = 1e-5, orig = p.eps[k];
        p.eps[k] = orig + h;
        const double up = log_amplitude(p, c).log_abs;
        p.eps[k] = orig - h;
        const double dn = log_amplitude(p, c).log_abs;
        p.eps[k] = orig;
        const double fd = (up - dn) / (2 * h);
        const auto it = dm.find(k);
        if (it == dm.end()) EXPECT_EQ(fd, 0.0);
        else EXPECT_LT(rel(it->second, fd, 1e-8), 1e-6) << "param " << k;
      }
    }
  }
}

TEST(Derivatives, SingleElectronChainRule) {
  const SystemSpec spec{3, 1, 0};
  const auto p = random_params(spec, 2, LookupTable::full(3), 4, 0.5, 1.5);
  const Config c{0b010, 0};
  const double phi = orbital_value(p, 1, 0, c);
  for (auto [k, v] : log_derivatives(p, c)) {
    // recover (nu, m) from the flat index
    const int m = static_cast<int>(k % 2), nu = static_cast<int>((k / 2) % 3);
    double prod = 1.0;
    for (int n2 = 0; n2 < 3; ++n2)
      if (n2 != nu) prod *= p.at(0, 1, 0, site_state(c, p.lookup.site(1, n2)), n2, m);
    EXPECT_NEAR(v, prod / phi, 1e-13);
  }
}

TEST(Derivatives, ZeroFactorsHandledExactly) {
  // HF start: the m=1 component has every factor zero, so only slots with a
  // single zero factor carry a derivative, and none at all for K >= 2.
  const SystemSpec spec{4, 2, 2};
  const auto hf = hubbard_hf({4, 1, 1.0, 4.0, false, false}, spec);
  auto p = init_from_hf(spec, hf, 2, LookupTable::full(4), 0.0, 0);
  const Config c{0b0011, 0b0011};
  for (auto [k, v] : log_derivatives(p, c))
    if (k % 2 == 1) {
      EXPECT_EQ(v, 0.0);
    }
  // make the m=1 component a single zero factor away from nonzero
  for (int b = 0; b < 2; ++b)
    for (int r = 0; r < 4; ++r)
      for (int i = 0; i < 2; ++i)
        for (int s = 0; s < 4; ++s)
          for (int nu = 1; nu < 4; ++nu) p.at(b, r, i, s, nu, 1) = 0.5;
  const auto d = log_derivatives(p, c);
  std::map<std::uint32_t, double> dm(d.begin(), d.end());
  const double h = 1e-6;
  for (int b = 0; b < 2; ++b)
    for (int r : {0, 1})
      for (int i = 0; i < 2; ++i) {
        const auto k = p.index(b, r, i, site_state(c, r), 0, 1);
        p.eps[k] = h;
        const double up = log_amplitude(p, c).log_abs;
        p.eps[k] = -h;
        const double dn = log_amplitude(p, c).log_abs;
        p.eps[k] = 0.0;
        EXPECT_LT(rel(dm.at(static_cast<std::uint32_t>(k)), (up - dn) / (2 * h), 1e-8), 1e-6);
        EXPECT_NE(dm.at(static_cast<std::uint32_t>(k)), 0.0);
      }
}

TEST(Derivatives, SingularThrows) {
  const SystemSpec spec{2, 2, 0};
  auto p = CpdParams::zeros(spec, 1, LookupTable::full(2));
  std::fill(p.eps.begin(), p.eps.end(), 1.0);
  EXPECT_THROW(log_derivatives(p, Config{0b11, 0}), NumericalError);
}

TEST(FastUpdate, TracksFromScratchOverManyMoves) {
  for (auto mode : {SpinMode::restricted, SpinMode::generalized}) {
    const SystemSpec spec{8, 3, 4, mode};
    const auto p = random_params(spec, 2, build_lookup(Lattice({4, 2, 1.0, 0.0, true, true}), 5), 101, 0.2, 1.5);
    std::mt19937_64 rng(7);
    EvalContext ctx(p, enumerate_sector(spec)[0]);
    int accepted = 0;
    double worst = 0.0;
    while (accepted < 10000) {
      const auto ex = random_move(ctx.config(), 8, rng);
      const auto pr = ctx.propose(ex);
      const auto ref = log_amplitude(p, pr.target);
      ASSERT_EQ(pr.amp.sign, ref.sign);
      if (ref.is_zero()) continue;
      worst = std::max(worst, std::abs(pr.amp.log_abs - ref.log_abs));
      if (rng() % 4 == 0) continue;  // rejected proposals leave the context untouched
      ctx.accept(pr);
      ++accepted;
      const auto now = log_amplitude(p, ctx.config());
      ASSERT_EQ(ctx.log_amplitude().sign, now.sign);
      worst = std::max(worst, std::abs(ctx.log_amplitude().log_abs - now.log_abs));
    }
    EXPECT_LT(worst, 1e-10);
  }
}

TEST(FastUpdate, IdentityAndInverseMoves) {
  const SystemSpec spec{4, 2, 2};
  const auto hf = hubbard_hf({4, 1, 1.0, 4.0, false, false}, spec);
  const auto p = init_from_hf(spec, hf, 3, LookupTable::full(4), 0.0, 0);
  const Config start{0b0011, 0b0101};
  EvalContext ctx(p, start, 1000);
  const auto a0 = ctx.log_amplitude();
  const auto same = ctx.update(Excitation::single(0, 0));
  EXPECT_EQ(same.sign, a0.sign);
  EXPECT_EQ(same.log_abs, a0.log_abs);
  const auto ex = Excitation::single(3, 1);
  ctx.update(ex);
  ctx.update(inverse(ex));
  EXPECT_EQ(ctx.config(), start);
  EXPECT_EQ(ctx.log_amplitude().sign, a0.sign);
  EXPECT_EQ(ctx.log_amplitude().log_abs, a0.log_abs);
  EXPECT_EQ(ctx.accepted_since_rebuild(), 2);
}

TEST(FastUpdate, ZeroFactorMoveAndInverseRestoreExactly) {
  // powers of two keep the divide/multiply arithmetic exact
  const SystemSpec spec{4, 2, 1};
  auto p = CpdParams::zeros(spec, 2, LookupTable::full(4));
  std::mt19937_64 rng(6);
  for (auto& e : p.eps) e = std::ldexp(1.0, static_cast<int>(rng() % 5) - 2) * (rng() % 2 ? 1 : -1);
  for (int r = 0; r < 4; ++r)
    for (int i = 0; i < 2; ++i) p.at(0, r, i, 0, p.lookup.slot(r, 3), 0) = 0.0;  // site 3 empty kills m=0
  const Config start{0b1001, 0b0010};
  EvalContext ctx(p, start, 1000);
  const auto a0 = ctx.log_amplitude();
  ASSERT_FALSE(a0.is_zero());
  const auto ex = Excitation::single(2, 3);  // empties site 3
  ctx.update(ex);
  ctx.update(inverse(ex));
  EXPECT_EQ(ctx.log_amplitude().sign, a0.sign);
  EXPECT_EQ(ctx.log_amplitude().log_abs, a0.log_abs);
}

TEST(FastUpdate, TinyFactorForcesRebuild) {
  const SystemSpec spec{4, 1, 1};
  auto p = random_params(spec, 1, LookupTable::full(4), 3, 0.5, 1.0);
  for (int b = 0; b < 2; ++b)
    for (int r = 0; r < 4; ++r) p.at(b, r, 0, 0, 1, 0) = 1e-305;
  std::mt19937_64 rng(1);
  EvalContext ctx(p, Config{0b0001, 0b0001});
  for (int t = 0; t < 500; ++t) {
    ctx.update(random_move(ctx.config(), 4, rng));
    const auto ref = log_amplitude(p, ctx.config());
    ASSERT_EQ(ctx.log_amplitude().sign, ref.sign);
    if (!ref.is_zero()) {
      EXPECT_NEAR(ctx.log_amplitude().log_abs, ref.log_abs, 1e-10);
    }
  }
}

TEST(Checkpoint, RoundTripAndLayout) {
  const SystemSpec spec{3, 2, 1, SpinMode::generalized};
  const auto p = random_params(spec, 2, build_lookup(Lattice({3, 1, 1.0, 0.0, false, false}), 2), 8);
  const auto bytes = save_checkpoint(p);
  const auto q = load_checkpoint(bytes);
  EXPECT_EQ(q.eps, p.eps);
  EXPECT_EQ(q.lookup, p.lookup);
  EXPECT_EQ(q.spec.spin_mode, SpinMode::generalized);
  EXPECT_EQ(save_checkpoint(q), bytes);
  const std::vector<std::uint8_t> head{'C', 'P', 'D', 'B', 1, 0, 0, 0, 1, 0, 0, 0, 3, 0, 0, 0, 2, 0, 0, 0};
  EXPECT_TRUE(std::equal(head.begin(), head.end(), bytes.begin()));
  EXPECT_EQ(bytes.size(), 32 + 4 * 6 + 8 * p.size());
  // eps[0] stored little-endian
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[56 + static_cast<std::size_t>(k)]) << (8 * k);
  EXPECT_EQ(std::bit_cast<double>(bits), p.eps[0]);
}

TEST(Checkpoint, RejectsCorruptInput) {
  const auto p = random_params(SystemSpec{2, 1, 1}, 1, LookupTable::full(2), 1);
  const auto bytes = save_checkpoint(p);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(load_checkpoint(truncated), ParseError);
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(load_checkpoint(extra), ParseError);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(load_checkpoint(magic), ParseError);
  auto version = bytes;
  version[4] = 2;
  EXPECT_THROW(load_checkpoint(version), ParseError);
  auto lookup = bytes;
  lookup[32] = 1;  // row 0 no longer starts with site 0
  EXPECT_THROW(load_checkpoint(lookup), ParseError);
  EXPECT_THROW(load_checkpoint(std::vector<std::uint8_t>(10, 0)), ParseError);
  EXPECT_THROW(read_checkpoint("/nonexistent/ckpt"), IoError);
}

TEST(LocalEnergy, FreeFermionHartreeFock) {
  const HubbardSpec hs{3, 2, 1.0, 0.0, true, false};
  const SystemSpec spec{6, 2, 1};
  const Hamiltonian H = HubbardHamiltonian(hs);
  const auto hf = hubbard_hf(hs, spec);
  const auto p = init_from_hf(spec, hf, 1, LookupTable::full(6), 0.0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(HubbardHamiltonian(hs).lattice().hopping());
  const double expect = es.eigenvalues()(0) + es.eigenvalues()(1) + es.eigenvalues()(0);
  for (const auto& c : enumerate_sector(spec)) {
    // determinants that vanish exactly come out of LU at roundoff level
    if (std::abs(log_amplitude(p, c).value()) < 1e-8) continue;
    const auto e = local_energy(H, c, [&](const Config& x) { return log_amplitude(p, x); });
    ASSERT_TRUE(e.has_value());
    EXPECT_NEAR(*e, expect, 1e-10);
  }
}
