#pragma once

// Self-consistent field orbitals in the (orthonormal) sampling basis and
// single-determinant energies. Closed-shell sectors run restricted HF;
// otherwise unrestricted HF from a shared core guess.

#include <deque>
#include <string>

#include <Eigen/Dense>

#include "cpdvmc/ab_initio.hpp"
#include "cpdvmc/hamiltonian.hpp"
#include "cpdvmc/log.hpp"

namespace cpdvmc {

struct HFOrbitals {
  Eigen::MatrixXd up;  // L x n_up
  Eigen::MatrixXd dn;  // L x n_dn

  const Eigen::MatrixXd& block(Spin s) const { return s == Spin::up ? up : dn; }
};

struct ScfResult {
  HFOrbitals orbitals;
  double energy = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline Eigen::MatrixXd coulomb(const AbInitioHamiltonian& H, const Eigen::MatrixXd& D) {
  const int L = H.n_sites();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(L, L);
  for (int p = 0; p < L; ++p)
    for (int q = 0; q <= p; ++q) {
      double v = 0.0;
      for (int r = 0; r < L; ++r)
        for (int s = 0; s < L; ++s) v += H.eri(p, q, r, s) * D(r, s);
      J(p, q) = J(q, p) = v;
    }
  return J;
}

inline Eigen::MatrixXd exchange(const AbInitioHamiltonian& H, const Eigen::MatrixXd& D) {
  const int L = H.n_sites();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(L, L);
  for (int p = 0; p < L; ++p)
    for (int q = 0; q <= p; ++q) {
      double v = 0.0;
      for (int r = 0; r < L; ++r)
        for (int s = 0; s < L; ++s) v += H.eri(p, r, s, q) * D(r, s);
      K(p, q) = K(q, p) = v;
    }
  return K;
}

inline Eigen::MatrixXd lowest(const Eigen::MatrixXd& F, int n) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(F);
  return es.eigenvectors().leftCols(n);
}

}  // namespace detail

inline Eigen::MatrixXd density(const Eigen::MatrixXd& C) { return C * C.transpose(); }

// <Phi|H|Phi> for the determinant built from the given occupied orbitals.
inline double determinant_energy(const AbInitioHamiltonian& H, const HFOrbitals& orb) {
  const int L = H.n_sites();
  const Eigen::MatrixXd Da = density(orb.up), Db = density(orb.dn);
  const Eigen::MatrixXd D = Da + Db;
  double e = H.e_core() + (H.h1().cwiseProduct(D)).sum();
  double e2 = 0.0;
  for (int p = 0; p < L; ++p)
    for (int q = 0; q < L; ++q)
      for (int r = 0; r < L; ++r)
        for (int s = 0; s < L; ++s) {
          const double v = H.eri(p, q, r, s);
          if (v == 0.0) continue;
          e2 += v * (D(p, q) * D(r, s) - Da(p, s) * Da(r, q) - Db(p, s) * Db(r, q));
        }
  return e + 0.5 * e2;
}

inline ScfResult run_scf(const AbInitioHamiltonian& H, int n_up, int n_dn, int max_iter = 500,
                         double tol = 1e-11) {
  const int L = H.n_sites();
  const bool closed = n_up == n_dn;
  const Eigen::MatrixXd& h = H.h1();
  Eigen::MatrixXd Ca = detail::lowest(h, n_up), Cb = detail::lowest(h, n_dn);
  std::deque<Eigen::MatrixXd> focks, errors;
  constexpr std::size_t kDiis = 8;
  ScfResult res;
  double e_old = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::MatrixXd Da = density(Ca), Db = density(Cb);
    const Eigen::MatrixXd J = detail::coulomb(H, Da + Db);
    Eigen::MatrixXd Fa = h + J - detail::exchange(H, Da);
    Eigen::MatrixXd Fb = closed ? Fa : Eigen::MatrixXd(h + J - detail::exchange(H, Db));
    const double e = H.e_core() + 0.5 * ((h + Fa).cwiseProduct(Da).sum() + (h + Fb).cwiseProduct(Db).sum());

    // DIIS on the stacked (alpha, beta) Fock matrices.
    Eigen::MatrixXd F(L, 2 * L), err(L, 2 * L);
    F << Fa, Fb;
    err << Fa * Da - Da * Fa, Fb * Db - Db * Fb;
    const double err_norm = err.norm();
    res.iterations = it;
    if (it > 1 && std::abs(e - e_old) < tol && err_norm < std::sqrt(tol)) {
      res.converged = true;
      res.energy = e;
      break;
    }
    e_old = e;
    res.energy = e;
    focks.push_back(F);
    errors.push_back(err);
    if (focks.size() > kDiis) {
      focks.pop_front();
      errors.pop_front();
    }
    const auto n = static_cast<Eigen::Index>(focks.size());
    if (n >= 2) {
      Eigen::MatrixXd B = Eigen::MatrixXd::Constant(n + 1, n + 1, -1.0);
      B(n, n) = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
          B(i, j) = errors[static_cast<std::size_t>(i)].cwiseProduct(errors[static_cast<std::size_t>(j)]).sum();
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
      rhs(n) = -1.0;
      const Eigen::VectorXd c = B.completeOrthogonalDecomposition().solve(rhs);
      if (c.allFinite()) {
        F.setZero();
        for (Eigen::Index i = 0; i < n; ++i) F += c(i) * focks[static_cast<std::size_t>(i)];
      }
    }
    Ca = detail::lowest(F.leftCols(L), n_up);
    Cb = closed ? Ca : detail::lowest(F.rightCols(L), n_dn);
  }
  if (!res.converged)
    log::warn("SCF did not converge in " + std::to_string(max_iter) + " iterations");
  res.orbitals = {Ca, Cb};
  res.energy = determinant_energy(H, res.orbitals);
  return res;
}

inline ScfResult run_scf(const Hamiltonian& H, const SystemSpec& spec) {
  if (const auto* hub = std::get_if<HubbardHamiltonian>(&H)) return run_scf(to_ab_initio(*hub), spec.n_up, spec.n_dn);
  return run_scf(std::get<AbInitioHamiltonian>(H), spec.n_up, spec.n_dn);
}

inline double determinant_energy(const Hamiltonian& H, const HFOrbitals& orb) {
  if (const auto* hub = std::get_if<HubbardHamiltonian>(&H)) return determinant_energy(to_ab_initio(*hub), orb);
  return determinant_energy(std::get<AbInitioHamiltonian>(H), orb);
}

}  // namespace cpdvmc
