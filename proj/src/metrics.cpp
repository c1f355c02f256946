#include "sbd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sbd {

double nmse(const Vec& estimate, const Vec& truth) {
  if (estimate.size() != truth.size()) throw std::domain_error("nmse: length mismatch");
  const double t = truth.squaredNorm();
  if (t == 0.0) throw std::domain_error("nmse: zero-norm truth");
  return (estimate - truth).squaredNorm() / t;
}

double psnr(const Vec& estimate, const Vec& truth, double peak) {
  if (estimate.size() != truth.size()) throw std::domain_error("psnr: length mismatch");
  const double mse = (estimate - truth).squaredNorm() / static_cast<double>(truth.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double gcnr(const std::vector<double>& region_a, const std::vector<double>& region_b, int bins) {
  if (region_a.empty() || region_b.empty()) throw std::domain_error("gcnr: empty region");
  if (bins < 1) throw std::domain_error("gcnr: bins must be >= 1");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : region_a) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double v : region_b) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo == hi) return 0.0;  // both regions collapse into the single shared bin

  std::vector<double> ha(bins, 0.0), hb(bins, 0.0);
  const double width = (hi - lo) / bins;
  auto bin_of = [&](double v) {
    int b = static_cast<int>((v - lo) / width);
    return std::clamp(b, 0, bins - 1);
  };
  for (double v : region_a) ha[bin_of(v)] += 1.0;
  for (double v : region_b) hb[bin_of(v)] += 1.0;
  // density normalization: each histogram integrates to one
  double overlap = 0.0;
  for (int b = 0; b < bins; ++b)
    overlap += std::min(ha[b] / region_a.size(), hb[b] / region_b.size());
  return 1.0 - overlap;
}

double noise_floor_db(const CVec& range_profile, const std::vector<int>& signal_bins) {
  std::vector<char> is_signal(range_profile.size(), 0);
  for (int b : signal_bins) {
    if (b < 0 || b >= range_profile.size()) throw std::domain_error("noise_floor: bin out of range");
    is_signal[b] = 1;
  }
  std::vector<double> powers;
  powers.reserve(range_profile.size());
  for (Eigen::Index i = 0; i < range_profile.size(); ++i)
    if (!is_signal[i]) powers.push_back(std::norm(range_profile[i]));
  if (powers.empty()) throw std::domain_error("noise_floor: all bins marked signal");
  const size_t mid = powers.size() / 2;
  std::nth_element(powers.begin(), powers.begin() + mid, powers.end());
  const double median = powers[mid];
  if (median == 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(median / std::log(2.0));
}

}  // namespace sbd
