#pragma once

#include <optional>

#include "sbd/companding.hpp"
#include "sbd/operators.hpp"

namespace sbd {

/// Forward acquisition y = A x + n + eps with optional mu-law companding
/// y = C(A x_rf + n_rf) + eps. For complex codomains (stacked layout) eps is
/// circularly symmetric with per-component variance noise_std^2 / 2.
struct MeasurementModel {
  LinearOperator op = LinearOperator::identity(0);
  double noise_std = 0.0;
  bool companded = false;
  CompandingParams companding{255.0};
  bool complex_codomain = false;

  MeasurementModel() = default;
  MeasurementModel(LinearOperator op_, double noise_std_, bool complex_codomain_ = false)
      : op(std::move(op_)), noise_std(noise_std_), complex_codomain(complex_codomain_) {
    if (noise_std < 0.0) throw std::domain_error("MeasurementModel: noise_std must be >= 0");
  }
};

/// Draws y = A x + n + eps (or the companded variant). n may be empty when
/// there is no structured-noise term.
Vec synthesize(const MeasurementModel& model, const Vec& x, const Vec& n, Rng& rng);

}  // namespace sbd
