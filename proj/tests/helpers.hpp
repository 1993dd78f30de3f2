#pragma once

#include <random>
#include <string>

#include "cpdvmc/cpd_ansatz.hpp"
#include "cpdvmc/fcidump.hpp"
#include "cpdvmc/fock.hpp"

namespace testing_util {

inline std::string data_path(const std::string& name) { return std::string(CPDVMC_TEST_DATA) + "/" + name; }

inline cpdvmc::Config random_config(const cpdvmc::SystemSpec& spec, std::mt19937_64& rng) {
  const auto sector = cpdvmc::enumerate_sector(spec);
  return sector[std::uniform_int_distribution<std::size_t>(0, sector.size() - 1)(rng)];
}

inline cpdvmc::CpdParams random_params(const cpdvmc::SystemSpec& spec, int M, cpdvmc::LookupTable lookup,
                                       std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  auto p = cpdvmc::CpdParams::zeros(spec, M, std::move(lookup));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& e : p.eps) e = u(rng);
  return p;
}

// Relative difference with an absolute floor.
inline double rel(double a, double b, double floor = 1e-300) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace testing_util
