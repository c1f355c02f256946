#include "sbd/measurement.hpp"

#include <cmath>

namespace sbd {

Vec synthesize(const MeasurementModel& model, const Vec& x, const Vec& n, Rng& rng) {
  Vec clean = model.op.apply(x);
  if (n.size() > 0) {
    if (n.size() != clean.size()) throw std::domain_error("synthesize: noise term shape mismatch");
    clean += n;
  }
  if (model.companded) clean = model.companding.compand(clean);
  if (model.noise_std > 0.0) {
    const double per_comp =
        model.complex_codomain ? model.noise_std / std::sqrt(2.0) : model.noise_std;
    clean += per_comp * gaussian_vec(static_cast<int>(clean.size()), rng);
  }
  return clean;
}

}  // namespace sbd
