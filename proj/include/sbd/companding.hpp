#pragma once

#include "sbd/common.hpp"

namespace sbd {

/// mu-law compression/expansion pair. Inputs live in [-1, 1]; both maps are
/// odd, strictly increasing, and mutually inverse.
struct CompandingParams {
  double mu = 255.0;

  explicit CompandingParams(double mu_ = 255.0) : mu(mu_) {
    if (!(mu > 0.0)) throw std::domain_error("CompandingParams: mu must be positive");
  }

  double compand_scalar(double x) const;
  double expand_scalar(double x) const;
  double compand_deriv(double x) const;  // dC/dx, even and positive
  double expand_deriv(double x) const;   // dC^{-1}/dx

  Vec compand(const Vec& x) const;
  Vec expand(const Vec& x) const;
};

}  // namespace sbd
