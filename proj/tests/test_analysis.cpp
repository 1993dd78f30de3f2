#include <gtest/gtest.h>

#include <sstream>

#include "cpdvmc/analysis.hpp"

using namespace cpdvmc;

namespace {

std::vector<MorsePoint> synthetic(double De, double a, double re, double u, int n = 15) {
  std::vector<MorsePoint> pts;
  for (int k = 0; k < n; ++k) {
    const double r = 0.8 + 0.15 * k;
    pts.push_back({r, morse(r, De, a, re, u), 0.0});
  }
  return pts;
}

}  // namespace

TEST(Morse, RecoversSyntheticParameters) {
  const auto fit = fit_morse(synthetic(0.03, 1.1, 1.22, -15.3));
  EXPECT_TRUE(fit.bound);
  EXPECT_NEAR(fit.De, 0.03, 1e-8 * 0.03);
  EXPECT_NEAR(fit.a, 1.1, 1e-8 * 1.1);
  EXPECT_NEAR(fit.re, 1.22, 1e-8 * 1.22);
  EXPECT_NEAR(fit.u, -15.3, 1e-8 * 15.3);
  EXPECT_LT(fit.rms, 1e-10);
}

TEST(Morse, WeightedFitRecoversParameters) {
  auto pts = synthetic(0.5, 1.8, 0.74, -1.0);
  for (std::size_t k = 0; k < pts.size(); ++k) pts[k].err = 1e-3 * (1.0 + static_cast<double>(k % 3));
  const auto fit = fit_morse(pts);
  EXPECT_NEAR(fit.De, 0.5, 1e-8 * 0.5);
  EXPECT_NEAR(fit.re, 0.74, 1e-8);
}

TEST(Morse, EnergyShiftMovesOnlyOffset) {
  const auto a = fit_morse(synthetic(0.03, 1.1, 1.22, 0.0));
  const auto b = fit_morse(synthetic(0.03, 1.1, 1.22, 2.5));
  EXPECT_NEAR(b.u - a.u, 2.5, 1e-9);
  EXPECT_NEAR(a.De, b.De, 1e-10);
  EXPECT_NEAR(a.a, b.a, 1e-8);
  EXPECT_NEAR(a.re, b.re, 1e-8);
}

TEST(Morse, DistanceShiftMovesOnlyEquilibrium) {
  auto pts = synthetic(0.2, 1.3, 1.0, -3.0);
  const auto a = fit_morse(pts);
  for (auto& p : pts) p.r += 0.4;
  const auto b = fit_morse(pts);
  EXPECT_NEAR(b.re - a.re, 0.4, 1e-9);
  EXPECT_NEAR(a.De, b.De, 1e-10);
  EXPECT_NEAR(a.a, b.a, 1e-8);
  EXPECT_NEAR(a.u, b.u, 1e-10);
}

TEST(Morse, SpectroscopicConstantsAreConsistent) {
  // omega_e chi_e = h c omega_e^2 / (4 De) for any Morse curve
  const auto [w, wx] = morse_constants(0.2, 1.7, units::hydrogen_mass_amu);
  const double hc = 2.0 * std::numbers::pi * units::hbar * units::c_cm;
  EXPECT_NEAR(wx, hc * w * w / (4.0 * 0.2 * units::eV), 1e-9 * wx);
  // H2-like curve (De 4.75 eV, a 1.94/A, reduced mass m_H / 2) lands near 4400 cm^-1
  const auto [w2, wx2] = morse_constants(4.75, 1.94, units::hydrogen_mass_amu / 2.0);
  EXPECT_NEAR(w2, 4400.0, 150.0);
  EXPECT_GT(wx2, 0.0);
}

TEST(Morse, HarmonicLimit) {
  // k = 2 De a^2 fixed, a -> 0: omega_e -> sqrt(k / mu) / (2 pi c)
  const double k_eV_A2 = 2.0;
  const double mu = units::hydrogen_mass_amu * units::amu;
  const double harmonic = std::sqrt(k_eV_A2 * units::eV * 1e20 / mu) / (2.0 * std::numbers::pi * units::c_cm);
  for (double a : {1e-2, 1e-3, 1e-4}) {
    const double De = k_eV_A2 / (2.0 * a * a);
    const auto [w, wx] = morse_constants(De, a, units::hydrogen_mass_amu);
    EXPECT_NEAR(w, harmonic, 1e-9 * harmonic);
    EXPECT_LT(wx, 1e-3 * a * 1e4);
  }
}

TEST(Morse, UnboundDataIsFlagged) {
  std::vector<MorsePoint> pts;
  for (int k = 0; k < 8; ++k) {
    const double r = 1.0 + 0.2 * k;
    pts.push_back({r, 0.3 * std::exp(-r), 0.0});
  }
  try {
    const auto fit = fit_morse(pts);
    EXPECT_FALSE(fit.bound && fit.re > 0.9 && fit.re < 2.5 && fit.De > 1e-6);
  } catch (const NumericalError&) {
    SUCCEED();
  }
}

TEST(Morse, InputValidation) {
  EXPECT_THROW(fit_morse(synthetic(0.1, 1.0, 1.0, 0.0, 3)), ContractError);
  auto pts = synthetic(0.1, 1.0, 1.0, 0.0);
  pts[2].E = std::nan("");
  EXPECT_THROW(fit_morse(pts), ContractError);
}

TEST(MorseCsv, RoundTrip) {
  std::istringstream in("r,E,stderr\n0.9, -1.0, 0.01\n1.0,-1.2,0.01\n\n1.1,-1.1,0.02\n");
  const auto pts = parse_morse_csv(in);
  ASSERT_EQ(pts.size(), 3U);
  EXPECT_DOUBLE_EQ(pts[1].E, -1.2);
  EXPECT_DOUBLE_EQ(pts[2].err, 0.02);
  std::istringstream two("r,E\n1,2\n");
  EXPECT_EQ(parse_morse_csv(two).size(), 1U);
  std::istringstream bad_head("x,E,stderr\n");
  EXPECT_THROW(parse_morse_csv(bad_head), ParseError);
  std::istringstream bad_num("r,E,stderr\n1,abc,0\n");
  EXPECT_THROW(parse_morse_csv(bad_num), ParseError);
  std::istringstream bad_cols("r,E,stderr\n1,2\n");
  EXPECT_THROW(parse_morse_csv(bad_cols), ParseError);

  const auto fit = fit_morse(synthetic(0.03, 1.1, 1.22, -15.3));
  std::ostringstream os;
  write_morse_csv(os, fit);
  const auto text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "De_eV,a_per_A,re_A,u_eV,omega_e_cm,omega_e_chi_e_cm,rms_eV,bound");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
}
