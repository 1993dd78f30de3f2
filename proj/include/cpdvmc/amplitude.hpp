#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "cpdvmc/errors.hpp"

namespace cpdvmc {

// Signed amplitude carried as sign and log-magnitude. sign == 0 is an exact
// zero; log_abs is then -inf.
struct LogAmp {
  int sign = 0;
  double log_abs = -std::numeric_limits<double>::infinity();

  bool is_zero() const noexcept { return sign == 0; }
  double value() const noexcept { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }

  friend LogAmp operator*(LogAmp a, LogAmp b) noexcept {
    if (a.sign == 0 || b.sign == 0) return {};
    return {a.sign * b.sign, a.log_abs + b.log_abs};
  }
};

// psi(num) / psi(den); den must be nonzero.
inline double amplitude_ratio(const LogAmp& num, const LogAmp& den) noexcept {
  if (num.sign == 0) return 0.0;
  return num.sign * den.sign * std::exp(num.log_abs - den.log_abs);
}

inline LogAmp from_value(double v) noexcept {
  if (v == 0.0) return {};
  return {v > 0 ? 1 : -1, std::log(std::abs(v))};
}

// Determinant via partially pivoted LU. An exactly zero pivot gives sign 0.
inline LogAmp log_det(const Eigen::Ref<const Eigen::MatrixXd>& a) {
  if (a.rows() == 0) return {1, 0.0};
  if (!a.allFinite()) throw ContractError("non-finite entry in orbital matrix");
  if (a.rows() == 1) return from_value(a(0, 0));
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const auto& m = lu.matrixLU();
  int sign = static_cast<int>(lu.permutationP().determinant());
  double log_abs = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double d = m(i, i);
    if (d == 0.0 || !std::isfinite(d)) return {};
    if (d < 0) sign = -sign;
    log_abs += std::log(std::abs(d));
  }
  return {sign, log_abs};
}

}  // namespace cpdvmc
