#pragma once

// Stochastic reconfiguration updates.
//
// With X the weighted, centered log-derivative matrix and e the centered
// local energies, S = X^T X and g = X^T e. The parameter-space solve
// (S + lambda I)^-1 g and the sample-space solve X^T (X X^T + lambda I)^-1 e
// coincide by the push-through identity. The RMSProp variant replaces the
// shift lambda I by lambda D with D = diag(max(sqrt(v), eps_v)) and reduces
// to the plain problem through the column rescaling Y = X D^-1/2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cpdvmc/sampler.hpp"

namespace cpdvmc {

enum class SrVariant { standard, kernel, rmsprop };
enum class SrSolver { automatic, parameter_space, sample_space, iterative };

inline SrVariant parse_sr_variant(const std::string& s) {
  if (s == "standard") return SrVariant::standard;
  if (s == "kernel") return SrVariant::kernel;
  if (s == "rmsprop") return SrVariant::rmsprop;
  throw ConfigError("unknown SR variant '" + s + "' (expected standard, kernel or rmsprop)");
}

inline SrSolver parse_sr_solver(const std::string& s) {
  if (s == "auto") return SrSolver::automatic;
  if (s == "parameter") return SrSolver::parameter_space;
  if (s == "sample") return SrSolver::sample_space;
  if (s == "cg") return SrSolver::iterative;
  throw ConfigError("unknown SR solver '" + s + "' (expected auto, parameter, sample or cg)");
}

struct SrConfig {
  SrVariant variant = SrVariant::rmsprop;
  SrSolver solver = SrSolver::automatic;
  double learning_rate = 0.02;
  double diagonal_shift = 1e-3;
  double rms_decay = 0.9;
  double rms_floor = 1e-8;
  double lr_decay = 0.0;  // eta_t = eta / (1 + lr_decay * t)
  int cg_max_iterations = 2000;
  double cg_tolerance = 1e-6;
  // dense solves above this matrix dimension switch to conjugate gradients
  int dense_limit = 1024;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(diagonal_shift >= 0.0)) throw ConfigError("diagonal_shift must be >= 0");
    if (!(rms_decay > 0.0 && rms_decay < 1.0)) throw ConfigError("rms_decay must lie in (0, 1)");
    if (!(rms_floor > 0.0)) throw ConfigError("rms_floor must be > 0");
    if (!(lr_decay >= 0.0)) throw ConfigError("lr_decay must be >= 0");
    if (cg_max_iterations < 1 || !(cg_tolerance > 0.0)) throw ConfigError("invalid CG settings");
  }

  double learning_rate_at(int iteration) const noexcept { return learning_rate / (1.0 + lr_decay * iteration); }
};

// Centered batch restricted to the parameters touched by at least one
// sample. X = diag(sqrt w) (O - 1 mean^T) is kept implicitly as a sparse
// scaled O plus the column means.
class CenteredBatch {
 public:
  using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  CenteredBatch() = default;

  explicit CenteredBatch(const SampleBatch& batch, std::size_t n_params) : n_params_(n_params) {
    const auto ns = batch.size();
    if (ns == 0) throw ContractError("empty sample batch");
    if (batch.derivatives.size() != ns) throw ContractError("sample batch carries no derivative rows");
    std::vector<char> touched(n_params, 0);
    for (const auto& row : batch.derivatives)
      for (const auto& [k, v] : row) {
        if (k >= n_params) throw ContractError("derivative index out of range");
        touched[k] = 1;
      }
    std::vector<int> local(n_params, -1);
    for (std::size_t k = 0; k < n_params; ++k)
      if (touched[k]) {
        local[k] = static_cast<int>(columns_.size());
        columns_.push_back(static_cast<std::uint32_t>(k));
      }
    const auto nc = static_cast<Eigen::Index>(columns_.size());
    sqrt_w_.resize(static_cast<Eigen::Index>(ns));
    mean_ = Eigen::VectorXd::Zero(nc);
    double e_mean = 0.0;
    for (std::size_t s = 0; s < ns; ++s) e_mean += batch.weight(s) * batch.local_energies[s];
    e_.resize(static_cast<Eigen::Index>(ns));
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t s = 0; s < ns; ++s) {
      const double w = batch.weight(s);
      const auto si = static_cast<Eigen::Index>(s);
      sqrt_w_(si) = std::sqrt(w);
      e_(si) = 2.0 * sqrt_w_(si) * (batch.local_energies[s] - e_mean);
      for (const auto& [k, v] : batch.derivatives[s]) {
        const int c = local[k];
        mean_(c) += w * v;
        trip.emplace_back(si, c, sqrt_w_(si) * v);
      }
    }
    o_.resize(static_cast<Eigen::Index>(ns), nc);
    o_.setFromTriplets(trip.begin(), trip.end());
    o_.makeCompressed();
  }

  // Dense X and e given directly; every column counts as touched.
  static CenteredBatch from_dense(const Eigen::MatrixXd& X, const Eigen::VectorXd& e) {
    if (X.rows() != e.size()) throw ContractError("X and e disagree on the sample count");
    CenteredBatch cb;
    cb.n_params_ = static_cast<std::size_t>(X.cols());
    for (Eigen::Index k = 0; k < X.cols(); ++k) cb.columns_.push_back(static_cast<std::uint32_t>(k));
    cb.o_ = X.sparseView(0.0, 0.0);
    cb.o_.makeCompressed();
    cb.sqrt_w_ = Eigen::VectorXd::Zero(X.rows());
    cb.mean_ = Eigen::VectorXd::Zero(X.cols());
    cb.e_ = e;
    return cb;
  }

  std::size_t n_params() const noexcept { return n_params_; }
  Eigen::Index n_samples() const noexcept { return e_.size(); }
  Eigen::Index n_columns() const noexcept { return static_cast<Eigen::Index>(columns_.size()); }
  const std::vector<std::uint32_t>& columns() const noexcept { return columns_; }
  const Eigen::VectorXd& e() const noexcept { return e_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return o_ * v - sqrt_w_ * mean_.dot(v); }
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& u) const {
    return o_.transpose() * u - mean_ * sqrt_w_.dot(u);
  }
  Eigen::VectorXd gradient() const { return apply_transpose(e_); }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd X = Eigen::MatrixXd(o_);
    X.noalias() -= sqrt_w_ * mean_.transpose();
    return X;
  }

  // Squared column norms of X.
  Eigen::VectorXd column_norms2() const {
    Eigen::VectorXd n2 = Eigen::VectorXd::Zero(n_columns());
    Eigen::VectorXd dot = Eigen::VectorXd::Zero(n_columns());
    for (Eigen::Index s = 0; s < o_.rows(); ++s)
      for (SparseRows::InnerIterator it(o_, s); it; ++it) {
        n2(it.col()) += it.value() * it.value();
        dot(it.col()) += it.value() * sqrt_w_(s);
      }
    const double w2 = sqrt_w_.squaredNorm();
    return n2 - 2.0 * mean_.cwiseProduct(dot) + mean_.cwiseAbs2() * w2;
  }

  // Local (touched-column) vector to a full parameter vector.
  Eigen::VectorXd expand(const Eigen::VectorXd& local) const {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params_));
    for (std::size_t c = 0; c < columns_.size(); ++c) full(columns_[c]) = local(static_cast<Eigen::Index>(c));
    return full;
  }

 private:
  std::size_t n_params_ = 0;
  std::vector<std::uint32_t> columns_;
  SparseRows o_;
  Eigen::VectorXd sqrt_w_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd e_;
};

inline CenteredBatch assemble_centered(const SampleBatch& batch, std::size_t n_params) {
  return CenteredBatch(batch, n_params);
}

namespace detail {

[[noreturn]] inline void singular_sr(const char* where) {
  throw NumericalError(std::string("SR matrix is singular in the ") + where +
                       " solve; use a positive diagonal_shift");
}

// Solves (Y^T Y + lambda I) x = Y^T e with Y = X diag(scale). scale empty
// means the identity.
inline Eigen::VectorXd sr_solve(const CenteredBatch& cb, const Eigen::VectorXd& scale, double lambda,
                                SrSolver solver, const SrConfig& cfg) {
  const Eigen::Index np = cb.n_columns(), ns = cb.n_samples();
  if (np == 0) return Eigen::VectorXd();
  const bool scaled = scale.size() > 0;
  if (solver == SrSolver::automatic) {
    const auto small = std::min(np, ns);
    if (small > cfg.dense_limit && lambda > 0.0) solver = SrSolver::iterative;
    else solver = np > ns && lambda > 0.0 ? SrSolver::sample_space : SrSolver::parameter_space;
  }
  switch (solver) {
    case SrSolver::parameter_space: {
      Eigen::MatrixXd Y = cb.dense();
      if (scaled) Y = Y * scale.asDiagonal();
      const Eigen::VectorXd g = Y.transpose() * cb.e();
      Eigen::MatrixXd S = Y.transpose() * Y;
      S.diagonal().array() += lambda;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
      const auto d = ldlt.vectorD().cwiseAbs();
      const double dmax = d.size() ? d.maxCoeff() : 0.0;
      if (ldlt.info() != Eigen::Success || d.minCoeff() <= 1e-13 * std::max(dmax, 1e-300)) {
        if (g.squaredNorm() == 0.0) return Eigen::VectorXd::Zero(np);
        singular_sr("parameter-space");
      }
      return ldlt.solve(g);
    }
    case SrSolver::sample_space: {
      Eigen::MatrixXd Y = cb.dense();
      if (scaled) Y = Y * scale.asDiagonal();
      Eigen::MatrixXd T = Y * Y.transpose();
      T.diagonal().array() += lambda;
      Eigen::LLT<Eigen::MatrixXd> llt(T);
      if (lambda <= 0.0 || llt.info() != Eigen::Success) {
        if (cb.e().squaredNorm() == 0.0) return Eigen::VectorXd::Zero(np);
        singular_sr("sample-space");
      }
      return Y.transpose() * llt.solve(cb.e());
    }
    case SrSolver::iterative:
    case SrSolver::automatic:
      break;
  }
  if (lambda <= 0.0) singular_sr("conjugate-gradient");
  auto op = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    const Eigen::VectorXd sv = scaled ? Eigen::VectorXd(scale.cwiseProduct(v)) : v;
    Eigen::VectorXd out = cb.apply_transpose(cb.apply(sv));
    if (scaled) out = out.cwiseProduct(scale);
    return out + lambda * v;
  };
  Eigen::VectorXd b = cb.gradient();
  if (scaled) b = b.cwiseProduct(scale);
  Eigen::VectorXd precond = cb.column_norms2();
  if (scaled) precond = precond.cwiseProduct(scale.cwiseAbs2());
  precond = (precond.array() + lambda).inverse().matrix();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(np);
  Eigen::VectorXd r = b;
  const double bnorm = b.norm();
  if (bnorm == 0.0) return x;
  Eigen::VectorXd z = precond.cwiseProduct(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  for (int it = 0; it < cfg.cg_max_iterations; ++it) {
    const Eigen::VectorXd Ap = op(p);
    const double alpha = rz / p.dot(Ap);
    x += alpha * p;
    r -= alpha * Ap;
    if (r.norm() <= cfg.cg_tolerance * bnorm) return x;
    z = precond.cwiseProduct(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "SR conjugate gradients stopped at %d iterations with relative residual %.3e",
                cfg.cg_max_iterations, r.norm() / bnorm);
  log::warn(buf);
  return x;
}

}  // namespace detail

// delta = -eta (S + lambda I)^-1 g, full parameter length.
inline Eigen::VectorXd sr_update_standard(const CenteredBatch& cb, double eta, double lambda,
                                          const SrConfig& cfg = {}) {
  const auto solver = cfg.solver == SrSolver::automatic ? SrSolver::parameter_space : cfg.solver;
  return cb.expand(-eta * detail::sr_solve(cb, {}, lambda, solver, cfg));
}

// delta = -eta X^T (X X^T + lambda I)^-1 e.
inline Eigen::VectorXd sr_update_kernel(const CenteredBatch& cb, double eta, double lambda,
                                        const SrConfig& cfg = {}) {
  if (!(lambda > 0.0)) throw ContractError("the kernel SR variant needs diagonal_shift > 0");
  const auto solver = cfg.solver == SrSolver::automatic ? SrSolver::sample_space : cfg.solver;
  return cb.expand(-eta * detail::sr_solve(cb, {}, lambda, solver, cfg));
}

struct RmsPropState {
  Eigen::VectorXd v;  // full parameter length; empty until first use
};

// v' = beta v + (1 - beta) g^2, delta = -eta (S + lambda diag(max(sqrt v', eps)))^-1 g.
inline Eigen::VectorXd sr_update_rmsprop(const CenteredBatch& cb, double eta, double lambda, RmsPropState& state,
                                         const SrConfig& cfg = {}) {
  const auto np = static_cast<Eigen::Index>(cb.n_params());
  if (state.v.size() == 0) state.v = Eigen::VectorXd::Zero(np);
  if (state.v.size() != np) throw ContractError("RMSProp state has the wrong length");
  const Eigen::VectorXd g = cb.gradient();
  const double beta = cfg.rms_decay;
  state.v *= beta;
  const auto& cols = cb.columns();
  Eigen::VectorXd scale(cb.n_columns());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const auto k = static_cast<Eigen::Index>(cols[c]);
    const auto ci = static_cast<Eigen::Index>(c);
    state.v(k) += (1.0 - beta) * g(ci) * g(ci);
    scale(ci) = 1.0 / std::sqrt(std::max(std::sqrt(state.v(k)), cfg.rms_floor));
  }
  const Eigen::VectorXd y = detail::sr_solve(cb, scale, lambda, cfg.solver, cfg);
  return cb.expand(-eta * scale.cwiseProduct(y));
}

class SrUpdater {
 public:
  explicit SrUpdater(SrConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const SrConfig& config() const noexcept { return cfg_; }
  RmsPropState& rmsprop_state() noexcept { return rms_; }

  Eigen::VectorXd operator()(const CenteredBatch& cb, int iteration) {
    const double eta = cfg_.learning_rate_at(iteration);
    const double lambda = cfg_.diagonal_shift;
    switch (cfg_.variant) {
      case SrVariant::standard: {
        auto c = cfg_;
        if (c.solver == SrSolver::automatic) {
          // kernel form whenever there are more parameters than samples
          return cb.expand(-eta * detail::sr_solve(cb, {}, lambda, SrSolver::automatic, c));
        }
        return sr_update_standard(cb, eta, lambda, c);
      }
      case SrVariant::kernel:
        return sr_update_kernel(cb, eta, lambda, cfg_);
      case SrVariant::rmsprop:
        return sr_update_rmsprop(cb, eta, lambda, rms_, cfg_);
    }
    return {};
  }

 private:
  SrConfig cfg_;
  RmsPropState rms_;
};

}  // namespace cpdvmc
