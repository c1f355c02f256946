#include "sbd/companding.hpp"

#include <cmath>

namespace sbd {

static void check_range(const Vec& x, const char* what) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(x[i] >= -1.0 && x[i] <= 1.0))
      throw std::domain_error(std::string(what) + ": entries must lie in [-1, 1]");
}

double CompandingParams::compand_scalar(double x) const {
  const double s = x < 0.0 ? -1.0 : 1.0;
  return s * std::log1p(mu * std::abs(x)) / std::log1p(mu);
}

double CompandingParams::expand_scalar(double x) const {
  const double s = x < 0.0 ? -1.0 : 1.0;
  return s * std::expm1(std::abs(x) * std::log1p(mu)) / mu;
}

double CompandingParams::compand_deriv(double x) const {
  return mu / ((1.0 + mu * std::abs(x)) * std::log1p(mu));
}

double CompandingParams::expand_deriv(double x) const {
  const double l = std::log1p(mu);
  return std::exp(std::abs(x) * l) * l / mu;
}

Vec CompandingParams::compand(const Vec& x) const {
  check_range(x, "compand");
  Vec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = compand_scalar(x[i]);
  return out;
}

Vec CompandingParams::expand(const Vec& x) const {
  check_range(x, "expand");
  Vec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = expand_scalar(x[i]);
  return out;
}

}  // namespace sbd
