#pragma once

#include <cmath>
#include <stdexcept>

namespace msna {

// Step sizes of the form scale / (n^exponent + shift), n >= 1.
// Strictly positive and non-increasing; exponent restricted to (1/2, 1].
struct StepSchedule {
  double exponent = 1.0;
  double scale = 1.0;
  double shift = 0.0;

  StepSchedule() = default;
  StepSchedule(double exponent_, double scale_, double shift_)
      : exponent(exponent_), scale(scale_), shift(shift_) {
    if (!(exponent > 0.5 && exponent <= 1.0))
      throw std::invalid_argument("StepSchedule: exponent must be in (1/2, 1]");
    if (!(scale > 0.0)) throw std::invalid_argument("StepSchedule: scale must be > 0");
    if (!(shift >= 0.0)) throw std::invalid_argument("StepSchedule: shift must be >= 0");
  }

  double operator()(long n) const {
    if (n < 1) throw std::invalid_argument("StepSchedule: n must be >= 1");
    return scale / (std::pow(static_cast<double>(n), exponent) + shift);
  }
};

// Ridge sequence paired with a step schedule of exponent alpha:
// nu / n^(1-alpha) for alpha < 1, nu / ln(n) for alpha = 1 (value(1) := nu).
// Identically zero when nu = 0.
struct RidgeSchedule {
  double nu = 0.0;
  double alpha_exponent = 1.0;

  RidgeSchedule() = default;
  RidgeSchedule(double nu_, double alpha_exponent_) : nu(nu_), alpha_exponent(alpha_exponent_) {
    if (!(nu >= 0.0)) throw std::invalid_argument("RidgeSchedule: nu must be >= 0");
    if (!(alpha_exponent > 0.5 && alpha_exponent <= 1.0))
      throw std::invalid_argument("RidgeSchedule: alpha exponent must be in (1/2, 1]");
  }

  double operator()(long n) const {
    if (n < 1) throw std::invalid_argument("RidgeSchedule: n must be >= 1");
    if (nu == 0.0) return 0.0;
    if (alpha_exponent < 1.0)
      return nu / std::pow(static_cast<double>(n), 1.0 - alpha_exponent);
    return n == 1 ? nu : nu / std::log(static_cast<double>(n));
  }
};

// Averaging weights (ln(k+1))^tau, k >= 0, with the 0^0 = 1 convention at
// k = 0. For tau > 0 the weight of the initial iterate is zero; averaged
// recursions keep theta_bar = theta until the cumulative weight is positive.
struct AveragingWeights {
  double tau = 0.0;

  AveragingWeights() = default;
  explicit AveragingWeights(double tau_) : tau(tau_) {
    if (!(tau >= 0.0)) throw std::invalid_argument("AveragingWeights: tau must be >= 0");
  }

  double operator()(long k) const {
    if (k < 0) throw std::invalid_argument("AveragingWeights: k must be >= 0");
    if (k == 0) return tau == 0.0 ? 1.0 : 0.0;
    return std::pow(std::log(static_cast<double>(k + 1)), tau);
  }
};

}  // namespace msna
