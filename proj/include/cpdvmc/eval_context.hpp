#pragma once

// Incremental amplitude evaluation along a Markov chain.
//
// For every (block, row, orbital, m) the context caches the product of the
// nonzero factors and the number of exactly-zero factors of the current
// configuration. A move touching sites nu* divides the old factor out and
// multiplies the new one in, so a row costs O(changed sites) instead of
// O(K). Proposals are evaluated without mutating the cache; only accept()
// commits.

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cpdvmc/cpd_ansatz.hpp"

namespace cpdvmc {

class EvalContext {
 public:
  static constexpr double kDivisionGuard = 1e-300;

  struct Proposal {
    Config target;
    LogAmp amp;
  };

  EvalContext(const CpdParams& p, const Config& cfg, int rebuild_interval = 0)
      : p_(&p), rebuild_interval_(rebuild_interval > 0 ? rebuild_interval : p.spec.L) {
    offsets_.push_back(0);
    for (int b = 0; b < p.n_blocks(); ++b)
      offsets_.push_back(offsets_.back() + static_cast<std::size_t>(p.rows(b)) * p.orbitals(b) * p.M);
    prod_.assign(offsets_.back(), 1.0);
    zeros_.assign(offsets_.back(), 0);
    reset(cfg);
  }

  const Config& config() const noexcept { return cfg_; }
  const LogAmp& log_amplitude() const noexcept { return amp_; }
  int accepted_since_rebuild() const noexcept { return accepted_; }
  int rebuild_interval() const noexcept { return rebuild_interval_; }
  const CpdParams& params() const noexcept { return *p_; }

  void reset(const Config& cfg) {
    if (!in_sector(cfg, p_->spec)) throw ContractError("configuration is outside the parameter sector");
    cfg_ = cfg;
    rebuild();
  }

  // Amplitude of an arbitrary sector configuration using the cached
  // products of the current one.
  LogAmp evaluate(const Config& target) const {
    const std::uint64_t mask = low_mask(p_->spec.L);
    const std::uint64_t diff = ((cfg_.up ^ target.up) | (cfg_.dn ^ target.dn)) & mask;
    if (diff == 0) return amp_;
    changes_.clear();
    for_each_set_bit(diff, [&](int x) { changes_.push_back({x, site_state(cfg_, x), site_state(target, x)}); });
    LogAmp out{1, 0.0};
    for (int b = 0; b < p_->n_blocks(); ++b) {
      const auto rows = p_->occupied_rows(b, target);
      const int n = p_->orbitals(b);
      Eigen::MatrixXd A(n, n);
      for (int a = 0; a < n; ++a) {
        const int r = rows[static_cast<std::size_t>(a)];
        for (int i = 0; i < n; ++i) A(a, i) = shifted_orbital(b, r, i, target);
      }
      out = out * log_det(A);
      if (out.is_zero()) break;
    }
    return out;
  }

  Proposal propose(const Excitation& ex) const {
    const auto applied = apply_excitation(cfg_, ex, p_->spec.L);
    return {applied.cfg, evaluate(applied.cfg)};
  }

  void accept(const Proposal& pr) {
    const std::uint64_t mask = low_mask(p_->spec.L);
    const std::uint64_t diff = ((cfg_.up ^ pr.target.up) | (cfg_.dn ^ pr.target.dn)) & mask;
    if (diff == 0) return;
    bool dirty = false;
    for_each_set_bit(diff, [&](int x) {
      const int s_old = site_state(cfg_, x), s_new = site_state(pr.target, x);
      for (auto [mu, slot] : p_->lookup.referrers(x))
        for (int b = 0; b < p_->n_blocks(); ++b)
          for (int r = mu; r < p_->rows(b); r += p_->spec.L)
            for (int i = 0; i < p_->orbitals(b); ++i)
              for (int m = 0; m < p_->M; ++m) {
                const auto c = cache_index(b, r, i, m);
                dirty |= !swap_factor(prod_[c], zeros_[c], p_->at(b, r, i, s_old, slot, m),
                                      p_->at(b, r, i, s_new, slot, m));
              }
    });
    cfg_ = pr.target;
    amp_ = pr.amp;
    if (dirty || ++accepted_ >= rebuild_interval_) rebuild();
  }

  LogAmp update(const Excitation& ex) {
    const auto pr = propose(ex);
    accept(pr);
    return amp_;
  }

  // Recompute every cache entry and the amplitude from the parameters.
  void rebuild() {
    const int K = p_->K();
    for (int b = 0; b < p_->n_blocks(); ++b)
      for (int r = 0; r < p_->rows(b); ++r) {
        const int mu = p_->row_site(r);
        for (int i = 0; i < p_->orbitals(b); ++i)
          for (int m = 0; m < p_->M; ++m) {
            double prod = 1.0;
            int zeros = 0;
            for (int nu = 0; nu < K; ++nu) {
              const double f = p_->at(b, r, i, site_state(cfg_, p_->lookup.site(mu, nu)), nu, m);
              if (f == 0.0)
                ++zeros;
              else
                prod *= f;
            }
            const auto c = cache_index(b, r, i, m);
            prod_[c] = prod;
            zeros_[c] = zeros;
          }
      }
    LogAmp out{1, 0.0};
    for (int b = 0; b < p_->n_blocks(); ++b) {
      const auto rows = p_->occupied_rows(b, cfg_);
      const int n = p_->orbitals(b);
      Eigen::MatrixXd A(n, n);
      for (int a = 0; a < n; ++a)
        for (int i = 0; i < n; ++i) A(a, i) = cached_orbital(b, rows[static_cast<std::size_t>(a)], i);
      out = out * log_det(A);
    }
    amp_ = out;
    accepted_ = 0;
  }

 private:
  struct Change {
    int site;
    int s_old;
    int s_new;
  };

  std::size_t cache_index(int b, int r, int i, int m) const noexcept {
    return offsets_[static_cast<std::size_t>(b)] +
           (static_cast<std::size_t>(r) * p_->orbitals(b) + static_cast<std::size_t>(i)) * p_->M +
           static_cast<std::size_t>(m);
  }

  // false when the outgoing factor is too small to divide out safely.
  static bool swap_factor(double& prod, int& zeros, double f_old, double f_new) noexcept {
    if (f_old == f_new) return true;
    bool ok = true;
    if (f_old == 0.0)
      --zeros;
    else if (std::abs(f_old) < kDivisionGuard)
      ok = false;
    else
      prod /= f_old;
    if (f_new == 0.0)
      ++zeros;
    else
      prod *= f_new;
    return ok;
  }

  double cached_orbital(int b, int r, int i) const noexcept {
    double sum = 0.0;
    for (int m = 0; m < p_->M; ++m) {
      const auto c = cache_index(b, r, i, m);
      if (zeros_[c] == 0) sum += prod_[c];
    }
    return sum;
  }

  double shifted_orbital(int b, int r, int i, const Config& target) const {
    const int mu = p_->row_site(r);
    double sum = 0.0;
    for (int m = 0; m < p_->M; ++m) {
      const auto c = cache_index(b, r, i, m);
      double prod = prod_[c];
      int zeros = zeros_[c];
      bool ok = true;
      for (const auto& ch : changes_) {
        const int slot = p_->lookup.slot(mu, ch.site);
        if (slot < 0) continue;
        ok &= swap_factor(prod, zeros, p_->at(b, r, i, ch.s_old, slot, m), p_->at(b, r, i, ch.s_new, slot, m));
      }
      if (!ok) {
        prod = 1.0;
        zeros = 0;
        for (int nu = 0; nu < p_->K(); ++nu) {
          const double f = p_->at(b, r, i, site_state(target, p_->lookup.site(mu, nu)), nu, m);
          if (f == 0.0)
            ++zeros;
          else
            prod *= f;
        }
      }
      if (zeros == 0) sum += prod;
    }
    return sum;
  }

  const CpdParams* p_;
  int rebuild_interval_;
  Config cfg_{};
  LogAmp amp_{1, 0.0};
  int accepted_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<double> prod_;
  std::vector<int> zeros_;
  mutable std::vector<Change> changes_;
};

}  // namespace cpdvmc
