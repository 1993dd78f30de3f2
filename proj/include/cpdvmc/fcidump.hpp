#pragma once

// FCIDUMP reader and writer. The header is a Fortran namelist
// (&FCI ... / or &END) carrying NORB, NELEC and MS2; every body line is
// `value i j k l` with 1-based indices:
//   i j k l > 0      two-electron integral (ij|kl), expanded 8-fold
//   i j > 0, k=l=0   one-electron integral h_ij (symmetric)
//   i > 0, j=k=l=0   orbital energy, ignored
//   all zero         core energy
// Later lines overwrite earlier ones.

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <regex>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "cpdvmc/ab_initio.hpp"

namespace cpdvmc {

namespace detail {

inline int namelist_int(const std::string& header, const std::string& key, bool required, int fallback) {
  const std::regex re("(^|[^A-Z0-9_])" + key + "\\s*=\\s*([+-]?[0-9]+)");
  std::smatch m;
  if (!std::regex_search(header, m, re)) {
    if (required) throw ParseError("namelist is missing " + key);
    return fallback;
  }
  return std::stoi(m[2].str());
}

inline double parse_real(std::string tok, std::size_t line) {
  for (auto& ch : tok)
    if (ch == 'D' || ch == 'd') ch = 'E';
  double v = 0.0;
  const char* first = tok.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError(line, "non-numeric value '" + tok + "'");
  return v;
}

inline int parse_index(const std::string& tok, std::size_t line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError(line, "non-integer index '" + tok + "'");
  return v;
}

}  // namespace detail

inline AbInitioHamiltonian parse_fcidump(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::string header;
  bool started = false, closed = false;
  while (!closed && std::getline(in, line)) {
    ++lineno;
    std::string upper = line;
    for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    const auto first = upper.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (!started) {
      if (upper[first] != '&') throw ParseError(lineno, "expected '&FCI' namelist header");
      started = true;
      upper = upper.substr(first + 1);
      const auto name_end = upper.find_first_of(" \t,");
      upper = name_end == std::string::npos ? std::string() : upper.substr(name_end);
    }
    if (auto p = upper.find("&END"); p != std::string::npos) {
      upper = upper.substr(0, p);
      closed = true;
    } else if (auto q = upper.find('/'); q != std::string::npos) {
      upper = upper.substr(0, q);
      closed = true;
    }
    header += ' ' + upper;
  }
  if (!started) throw ParseError("empty FCIDUMP stream");
  if (!closed) throw ParseError(lineno, "unterminated namelist");

  const int norb = detail::namelist_int(header, "NORB", true, 0);
  const int nelec = detail::namelist_int(header, "NELEC", true, 0);
  const int ms2 = detail::namelist_int(header, "MS2", false, 0);
  if (norb < 1 || norb > kMaxSites) throw ParseError("NORB=" + std::to_string(norb) + " outside [1, 64]");

  Eigen::MatrixXd h1 = Eigen::MatrixXd::Zero(norb, norb);
  std::vector<double> h2(static_cast<std::size_t>(norb) * norb * norb * norb, 0.0);
  double e_core = 0.0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> tok{std::istream_iterator<std::string>(ls), {}};
    if (tok.empty()) continue;
    if (tok.size() != 5) throw ParseError(lineno, "expected 'value i j k l'");
    const double v = detail::parse_real(tok[0], lineno);
    int idx[4];
    for (int k = 0; k < 4; ++k) {
      idx[k] = detail::parse_index(tok[static_cast<std::size_t>(k + 1)], lineno);
      if (idx[k] < 0 || idx[k] > norb)
        throw ParseError(lineno, "index " + std::to_string(idx[k]) + " outside [0, NORB]");
    }
    const auto [i, j, k, l] = std::tuple(idx[0], idx[1], idx[2], idx[3]);
    if (i == 0 && j == 0 && k == 0 && l == 0) {
      e_core = v;
    } else if (i > 0 && j > 0 && k == 0 && l == 0) {
      h1(i - 1, j - 1) = v;
      h1(j - 1, i - 1) = v;
    } else if (i > 0 && j == 0 && k == 0 && l == 0) {
      continue;
    } else if (i > 0 && j > 0 && k > 0 && l > 0) {
      set_eri_symmetric(h2, norb, i - 1, j - 1, k - 1, l - 1, v);
    } else {
      throw ParseError(lineno, "unsupported index pattern");
    }
  }
  try {
    return AbInitioHamiltonian(std::move(h1), std::move(h2), e_core, nelec, ms2);
  } catch (const ContractError& e) {
    throw ParseError(e.what());
  }
}

inline AbInitioHamiltonian parse_fcidump_text(const std::string& text) {
  std::istringstream in(text);
  return parse_fcidump(in);
}

inline AbInitioHamiltonian read_fcidump(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open FCIDUMP '" + path + "'");
  return parse_fcidump(in);
}

// Canonical entries only (i>=j, k>=l, ij>=kl), zeros omitted, values in
// 17-significant-digit scientific notation.
inline void write_fcidump(std::ostream& out, const AbInitioHamiltonian& H) {
  const int L = H.n_sites();
  out << " &FCI NORB=" << L << ",NELEC=" << H.nelec() << ",MS2=" << H.ms2() << ",\n  ORBSYM=";
  for (int i = 0; i < L; ++i) out << "1,";
  out << "\n  ISYM=1,\n &END\n";
  char buf[128];
  auto emit = [&](double v, int i, int j, int k, int l) {
    std::snprintf(buf, sizeof buf, "%24.16e %4d %4d %4d %4d\n", v, i, j, k, l);
    out << buf;
  };
  for (int i = 0; i < L; ++i)
    for (int j = 0; j <= i; ++j)
      for (int k = 0; k < L; ++k)
        for (int l = 0; l <= k; ++l) {
          if (i * (i + 1) / 2 + j < k * (k + 1) / 2 + l) continue;
          const double v = H.eri(i, j, k, l);
          if (v != 0.0) emit(v, i + 1, j + 1, k + 1, l + 1);
        }
  for (int i = 0; i < L; ++i)
    for (int j = 0; j <= i; ++j)
      if (H.h1()(i, j) != 0.0) emit(H.h1()(i, j), i + 1, j + 1, 0, 0);
  emit(H.e_core(), 0, 0, 0, 0);
}

inline std::string write_fcidump(const AbInitioHamiltonian& H) {
  std::ostringstream out;
  write_fcidump(out, H);
  return out.str();
}

}  // namespace cpdvmc
