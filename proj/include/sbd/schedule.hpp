#pragma once

#include "sbd/common.hpp"

namespace sbd {

enum class ScheduleKind { kVariancePreserving, kVarianceExploding };

/// Signal/noise-rate parameterization of the forward diffusion SDE
/// dx = f(tau) x dtau + g(tau) dw, exposed through the marginal rates
/// (alpha_tau, sigma_tau) with x_tau = alpha_tau x_0 + sigma_tau z.
///
/// Variance preserving: beta(tau) linear in tau, alpha^2 + sigma^2 = 1.
/// Variance exploding: geometric sigma from sigma_min to sigma_max, alpha = 1;
/// sigma(0) is pinned to 0 so tau=0 is exactly the clean-data endpoint.
class NoiseSchedule {
 public:
  static NoiseSchedule variance_preserving(double beta_min = 0.1, double beta_max = 20.0,
                                           double horizon = 1.0);
  static NoiseSchedule variance_exploding(double sigma_min = 0.01, double sigma_max = 10.0,
                                          double horizon = 1.0);

  ScheduleKind kind() const { return kind_; }
  double horizon() const { return horizon_; }

  double alpha(double tau) const;
  double sigma(double tau) const;

  /// (alpha_tau, sigma_tau); throws std::domain_error outside [0, horizon].
  std::pair<double, double> rates(double tau) const;

  /// Drift coefficient f(tau) of the forward SDE.
  double drift_coeff(double tau) const;
  /// Diffusion coefficient g(tau) of the forward SDE.
  double diffusion_coeff(double tau) const;

  /// Standard deviation of the terminal marginal for unit-variance data,
  /// used to draw fresh reverse-trajectory starting points.
  double terminal_std() const;

 private:
  NoiseSchedule(ScheduleKind kind, double p0, double p1, double horizon);
  void check_tau(double tau) const;

  ScheduleKind kind_;
  // VP: p0_ = beta_min, p1_ = beta_max. VE: p0_ = sigma_min, p1_ = sigma_max.
  double p0_;
  double p1_;
  double horizon_;
};

}  // namespace sbd
