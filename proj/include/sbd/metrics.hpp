#pragma once

#include <vector>

#include "sbd/common.hpp"

namespace sbd {

/// ||estimate - truth||^2 / ||truth||^2; domain error for zero-norm truth.
double nmse(const Vec& estimate, const Vec& truth);

/// 10 log10(peak^2 / MSE); +infinity when estimate == truth.
double psnr(const Vec& estimate, const Vec& truth, double peak);

/// Generalized contrast-to-noise ratio: 1 - sum_bins min(hist_a, hist_b) with
/// common equal-width bin edges over the pooled min-max and density
/// normalization. Always in [0, 1]; symmetric in its arguments.
double gcnr(const std::vector<double>& region_a, const std::vector<double>& region_b,
            int bins = 256);

/// Median power in dB over the non-signal bins of a range profile, corrected
/// for the median of the exponential power distribution (divided by ln 2), so
/// pure complex Gaussian noise of std sigma reports 10 log10(sigma^2).
/// Returns -infinity for an all-zero profile.
double noise_floor_db(const CVec& range_profile, const std::vector<int>& signal_bins);

}  // namespace sbd
