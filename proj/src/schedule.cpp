#include "sbd/schedule.hpp"

#include <cmath>

namespace sbd {

NoiseSchedule::NoiseSchedule(ScheduleKind kind, double p0, double p1, double horizon)
    : kind_(kind), p0_(p0), p1_(p1), horizon_(horizon) {
  if (horizon <= 0.0) throw std::domain_error("NoiseSchedule: horizon must be positive");
  if (p0 <= 0.0 || p1 <= p0) throw std::domain_error("NoiseSchedule: need 0 < min < max parameter");
}

NoiseSchedule NoiseSchedule::variance_preserving(double beta_min, double beta_max, double horizon) {
  return NoiseSchedule(ScheduleKind::kVariancePreserving, beta_min, beta_max, horizon);
}

NoiseSchedule NoiseSchedule::variance_exploding(double sigma_min, double sigma_max, double horizon) {
  return NoiseSchedule(ScheduleKind::kVarianceExploding, sigma_min, sigma_max, horizon);
}

void NoiseSchedule::check_tau(double tau) const {
  if (!(tau >= 0.0 && tau <= horizon_))
    throw std::domain_error("NoiseSchedule: tau outside [0, horizon]");
}

double NoiseSchedule::alpha(double tau) const {
  check_tau(tau);
  if (kind_ == ScheduleKind::kVarianceExploding) return 1.0;
  // integral of beta over [0, tau] with beta linear from beta_min to beta_max
  const double b = p0_ * tau + (p1_ - p0_) * tau * tau / (2.0 * horizon_);
  return std::exp(-0.5 * b);
}

double NoiseSchedule::sigma(double tau) const {
  check_tau(tau);
  if (kind_ == ScheduleKind::kVariancePreserving) {
    const double a = alpha(tau);
    return std::sqrt(std::max(0.0, 1.0 - a * a));
  }
  if (tau == 0.0) return 0.0;
  return p0_ * std::pow(p1_ / p0_, tau / horizon_);
}

std::pair<double, double> NoiseSchedule::rates(double tau) const {
  check_tau(tau);
  return {alpha(tau), sigma(tau)};
}

double NoiseSchedule::drift_coeff(double tau) const {
  check_tau(tau);
  if (kind_ == ScheduleKind::kVarianceExploding) return 0.0;
  const double beta = p0_ + (p1_ - p0_) * tau / horizon_;
  return -0.5 * beta;
}

double NoiseSchedule::diffusion_coeff(double tau) const {
  check_tau(tau);
  if (kind_ == ScheduleKind::kVariancePreserving) {
    const double beta = p0_ + (p1_ - p0_) * tau / horizon_;
    return std::sqrt(beta);
  }
  // d(sigma^2)/dtau for the geometric schedule
  const double s = sigma(std::max(tau, 1e-300));
  return s * std::sqrt(2.0 * std::log(p1_ / p0_) / horizon_);
}

double NoiseSchedule::terminal_std() const {
  if (kind_ == ScheduleKind::kVariancePreserving) return 1.0;
  return sigma(horizon_);
}

}  // namespace sbd
