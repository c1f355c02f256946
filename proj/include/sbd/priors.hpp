#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "sbd/common.hpp"
#include "sbd/schedule.hpp"

namespace sbd {

/// Tweedie one-step denoising x_{0|tau} = (x_tau + sigma^2 score) / alpha.
Vec tweedie_denoise(const Vec& score, const Vec& x_tau, double tau, const NoiseSchedule& schedule);

/// Elementwise soft threshold sign(x) (|x| - lambda)_+ for real vectors.
Vec soft_threshold(const Vec& x, double lambda);
/// Magnitude shrinkage (x/|x|)(|x| - lambda)_+ for complex vectors; zero maps to zero.
CVec soft_threshold(const CVec& x, double lambda);
/// Stacked [Re; Im] variant; complex_pairs selects magnitude shrinkage.
Vec soft_threshold_stacked(const Vec& x, double lambda, bool complex_pairs);

/// Score-function provider for the perturbed marginals p(x_tau). Implementations
/// must keep score(), denoise() and denoise_vjp() algebraically consistent:
/// denoise == (x + sigma^2 score)/alpha and denoise_vjp is the exact transposed
/// Jacobian of denoise.
class ScorePrior {
 public:
  virtual ~ScorePrior() = default;
  virtual int dim() const = 0;
  virtual Vec score(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const = 0;
  /// Posterior mean E[x_0 | x_tau]; default goes through Tweedie's formula.
  virtual Vec denoise(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const;
  /// u -> J^T u with J the Jacobian of denoise at x_tau.
  virtual Vec denoise_vjp(const Vec& x_tau, double tau, const NoiseSchedule& schedule,
                          const Vec& u) const = 0;
};

/// Gaussian prior N(mean, cov); the perturbed marginal N(alpha mu, alpha^2 Sigma
/// + sigma^2 I) is evaluated exactly via an eigendecomposition of Sigma.
class GaussianPrior : public ScorePrior {
 public:
  GaussianPrior(Vec mean, Mat covariance);
  GaussianPrior(Vec mean, Vec diag_covariance);

  int dim() const override { return static_cast<int>(mean_.size()); }
  Vec score(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const override;
  Vec denoise_vjp(const Vec& x_tau, double tau, const NoiseSchedule& schedule,
                  const Vec& u) const override;

  /// Closed-form conjugate posterior mean E[x_0 | x_tau] (equals Tweedie).
  Vec posterior_mean(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const;
  const Vec& mean() const { return mean_; }
  Vec sample(Rng& rng) const;

 private:
  Vec effective_precision(double alpha, double sigma) const;  // 1/(alpha^2 lam + sigma^2)

  Vec mean_;
  bool diagonal_;
  Vec eigvals_;  // of Sigma
  Mat eigvecs_;  // empty when diagonal
};

/// Gaussian mixture with diagonal per-component covariances (isotropic as a
/// special case). Scores are computed with log-sum-exp stabilized
/// responsibilities; a total underflow raises NumericError rather than
/// returning a silently zero score.
class GmmPrior : public ScorePrior {
 public:
  GmmPrior(Vec weights, std::vector<Vec> means, std::vector<Vec> diag_covariances);

  int dim() const override { return static_cast<int>(means_[0].size()); }
  int num_components() const { return static_cast<int>(weights_.size()); }
  Vec score(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const override;
  Vec denoise_vjp(const Vec& x_tau, double tau, const NoiseSchedule& schedule,
                  const Vec& u) const override;

  /// Responsibilities of the perturbed mixture at x_tau.
  Vec responsibilities(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const;
  Vec sample(Rng& rng) const;
  int sample_component(Rng& rng) const;
  const Vec& weights() const { return weights_; }
  const std::vector<Vec>& means() const { return means_; }
  const std::vector<Vec>& diag_covariances() const { return covs_; }

 private:
  void perturbed_stats(const Vec& x_tau, double alpha, double sigma, Vec& resp,
                       std::vector<Vec>& comp_scores) const;

  Vec weights_;
  std::vector<Vec> means_;
  std::vector<Vec> covs_;
};

/// Degenerate prior concentrated at a single point; its perturbed marginal is
/// N(alpha p, sigma^2 I) and the denoiser is constant.
class PointMassPrior : public ScorePrior {
 public:
  explicit PointMassPrior(Vec point) : point_(std::move(point)) {}
  int dim() const override { return static_cast<int>(point_.size()); }
  Vec score(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const override;
  Vec denoise(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const override;
  Vec denoise_vjp(const Vec& x_tau, double tau, const NoiseSchedule& schedule,
                  const Vec& u) const override;

 private:
  Vec point_;
};

/// Model-based sparse prior. The posterior mean is the l1 proximal map
/// soft_threshold(x_tau, lambda_tau sigma_tau^2) and the score follows as
/// (alpha x_{0|tau} - x_tau) / sigma_tau^2.
///
/// The default threshold schedule is lambda_tau = lambda0 / sigma_tau, so the
/// effective threshold lambda_tau sigma_tau^2 = lambda0 sigma_tau anneals with
/// the noise scale. A custom lambda(tau) map can be supplied instead.
class SparsityPrior : public ScorePrior {
 public:
  SparsityPrior(int dim, double lambda0, bool complex_pairs = false);
  SparsityPrior(int dim, std::function<double(double)> lambda_of_tau, bool complex_pairs = false);

  int dim() const override { return dim_; }
  Vec score(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const override;
  Vec denoise(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const override;
  Vec denoise_vjp(const Vec& x_tau, double tau, const NoiseSchedule& schedule,
                  const Vec& u) const override;

  /// Effective threshold lambda_tau sigma_tau^2 at a given tau.
  double effective_threshold(double tau, const NoiseSchedule& schedule) const;
  bool complex_pairs() const { return complex_pairs_; }

 private:
  int dim_;
  double lambda0_ = 0.0;
  std::function<double(double)> lambda_of_tau_;  // empty -> default schedule
  bool complex_pairs_;
};

}  // namespace sbd
