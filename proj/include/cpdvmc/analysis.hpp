#pragma once

// Morse fit V(r) = De (1 - exp(-a (r - re)))^2 + u and the derived
// spectroscopic constants.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "cpdvmc/errors.hpp"
#include "cpdvmc/log.hpp"

namespace cpdvmc {

namespace units {
inline constexpr double eV = 1.602176634e-19;         // J
inline constexpr double amu = 1.66053906660e-27;      // kg
inline constexpr double c_cm = 2.99792458e10;         // cm / s
inline constexpr double hbar = 1.054571817e-34;       // J s
inline constexpr double hydrogen_mass_amu = 1.00782503223;
}  // namespace units

struct MorsePoint {
  double r = 0.0;
  double E = 0.0;
  double err = 0.0;
};

struct MorseOptions {
  double mass_amu = units::hydrogen_mass_amu;
  int max_iterations = 2000;
  double tolerance = 1e-10;
};

struct MorseFit {
  double De = 0.0;  // eV
  double a = 0.0;   // 1/Angstrom
  double re = 0.0;  // Angstrom
  double u = 0.0;   // eV
  double omega_e = 0.0;      // cm^-1
  double omega_e_chi_e = 0.0;  // cm^-1
  double rms = 0.0;          // eV
  int iterations = 0;
  bool bound = false;
};

inline double morse(double r, double De, double a, double re, double u) {
  const double x = 1.0 - std::exp(-a * (r - re));
  return De * x * x + u;
}

// omega_e = a / (2 pi c) sqrt(2 De / mu), omega_e chi_e = hbar a^2 / (4 pi mu c).
inline std::pair<double, double> morse_constants(double De_eV, double a_per_A, double mass_amu) {
  const double mu = mass_amu * units::amu;
  const double a = a_per_A * 1e10;
  const double De = De_eV * units::eV;
  const double omega = a / (2.0 * std::numbers::pi * units::c_cm) * std::sqrt(2.0 * De / mu);
  const double omega_chi = units::hbar * a * a / (4.0 * std::numbers::pi * mu * units::c_cm);
  return {omega, omega_chi};
}

namespace detail {

// Initial guess: re at the lowest point, u its energy, De from the largest
// r, a from the three-point curvature around the minimum.
inline std::array<double, 4> morse_guess(std::vector<MorsePoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& x, const auto& y) { return x.r < y.r; });
  const auto k = static_cast<std::size_t>(
      std::min_element(pts.begin(), pts.end(), [](const auto& x, const auto& y) { return x.E < y.E; }) - pts.begin());
  const double re = pts[k].r, u = pts[k].E;
  double De = pts.back().E - u;
  if (!(De > 0.0)) De = std::max(pts.front().E - u, 1e-6);
  const std::size_t c = std::clamp<std::size_t>(k, 1, pts.size() - 2);
  const double h1 = pts[c].r - pts[c - 1].r, h2 = pts[c + 1].r - pts[c].r;
  const double curv =
      2.0 * (h1 * pts[c + 1].E - (h1 + h2) * pts[c].E + h2 * pts[c - 1].E) / (h1 * h2 * (h1 + h2));
  double a = curv > 0.0 ? std::sqrt(curv / (2.0 * De)) : 1.0;
  if (!std::isfinite(a) || a <= 0.0) a = 1.0;
  return {De, a, re, u};
}

}  // namespace detail

// Levenberg-Marquardt least squares; points are weighted by 1/err^2 when
// every error is positive.
inline MorseFit fit_morse(const std::vector<MorsePoint>& pts, const MorseOptions& opt = {}) {
  if (pts.size() < 4) throw ContractError("a Morse fit needs at least 4 points");
  for (const auto& p : pts)
    if (!std::isfinite(p.r) || !std::isfinite(p.E) || !std::isfinite(p.err) || p.err < 0.0)
      throw ContractError("Morse input must be finite with non-negative errors");
  const bool weighted = std::all_of(pts.begin(), pts.end(), [](const auto& p) { return p.err > 0.0; });
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = weighted ? 1.0 / pts[static_cast<std::size_t>(i)].err : 1.0;

  auto g = detail::morse_guess(pts);
  Eigen::Vector4d x(g[0], g[1], g[2], g[3]);
  auto residual = [&](const Eigen::Vector4d& q) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = pts[static_cast<std::size_t>(i)];
      r(i) = w(i) * (morse(p.r, q(0), q(1), q(2), q(3)) - p.E);
    }
    return r;
  };
  auto jacobian = [&](const Eigen::Vector4d& q) {
    Eigen::MatrixXd J(n, 4);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dr = pts[static_cast<std::size_t>(i)].r - q(2);
      const double ex = std::exp(-q(1) * dr);
      const double one = 1.0 - ex;
      J(i, 0) = w(i) * one * one;
      J(i, 1) = w(i) * 2.0 * q(0) * one * ex * dr;
      J(i, 2) = w(i) * -2.0 * q(0) * one * ex * q(1);
      J(i, 3) = w(i);
    }
    return J;
  };

  double mu = 1e-3;
  Eigen::VectorXd r = residual(x);
  double cost = r.squaredNorm();
  MorseFit fit;
  bool converged = false;
  for (int it = 1; it <= opt.max_iterations && !converged; ++it) {
    fit.iterations = it;
    const Eigen::MatrixXd J = jacobian(x);
    const Eigen::Matrix4d A = J.transpose() * J;
    const Eigen::Vector4d b = -J.transpose() * r;
    bool stepped = false;
    for (int tries = 0; tries < 60; ++tries) {
      Eigen::Matrix4d Ad = A;
      Ad.diagonal() += mu * A.diagonal().cwiseMax(1e-300);
      const Eigen::Vector4d step = Ad.ldlt().solve(b);
      const Eigen::Vector4d xn = x + step;
      const Eigen::VectorXd rn = residual(xn);
      const double cn = rn.squaredNorm();
      if (std::isfinite(cn) && cn <= cost) {
        const double change = (step.cwiseAbs().array() / xn.cwiseAbs().array().max(1e-12)).maxCoeff();
        x = xn;
        r = rn;
        cost = cn;
        mu = std::max(mu / 3.0, 1e-15);
        stepped = true;
        if (change < opt.tolerance) converged = true;
        break;
      }
      mu *= 4.0;
    }
    // no downhill step at any damping: at a minimum to working precision
    if (!stepped) converged = true;
  }
  if (!converged) throw NumericalError("Morse fit did not converge in " + std::to_string(opt.max_iterations) + " iterations");
  fit.De = x(0);
  fit.a = x(1);
  fit.re = x(2);
  fit.u = x(3);
  fit.bound = fit.De > 0.0 && fit.a > 0.0;
  if (!fit.bound) log::warn("Morse fit is unbound (De <= 0 or a <= 0)");
  double ss = 0.0;
  for (const auto& p : pts) {
    const double d = morse(p.r, fit.De, fit.a, fit.re, fit.u) - p.E;
    ss += d * d;
  }
  fit.rms = std::sqrt(ss / static_cast<double>(pts.size()));
  if (fit.bound) std::tie(fit.omega_e, fit.omega_e_chi_e) = morse_constants(fit.De, fit.a, opt.mass_amu);
  return fit;
}

// CSV with header r,E,stderr (stderr column optional).
inline std::vector<MorsePoint> parse_morse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty Morse input");
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(0, cell.find_first_not_of(" \t\r"));
      cell.erase(cell.find_last_not_of(" \t\r") + 1);
      out.push_back(cell);
    }
    return out;
  };
  const auto head = split(line);
  if (head.size() < 2 || head[0] != "r" || head[1] != "E" || (head.size() > 2 && head[2] != "stderr") ||
      head.size() > 3)
    throw ParseError(1, "expected header 'r,E,stderr'");
  std::vector<MorsePoint> pts;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != head.size()) throw ParseError(lineno, "wrong number of columns");
    MorsePoint p;
    try {
      std::size_t pos = 0;
      p.r = std::stod(cells[0], &pos);
      p.E = std::stod(cells[1], &pos);
      if (cells.size() > 2) p.err = std::stod(cells[2], &pos);
    } catch (const std::exception&) {
      throw ParseError(lineno, "not a number");
    }
    pts.push_back(p);
  }
  return pts;
}

inline void write_morse_csv(std::ostream& os, const MorseFit& f) {
  os << "De_eV,a_per_A,re_A,u_eV,omega_e_cm,omega_e_chi_e_cm,rms_eV,bound\n";
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.6g,%d\n", f.De, f.a, f.re, f.u, f.omega_e,
                f.omega_e_chi_e, f.rms, f.bound ? 1 : 0);
  os << buf;
}

}  // namespace cpdvmc
