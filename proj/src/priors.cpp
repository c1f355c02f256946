#include "sbd/priors.hpp"

#include <cmath>
#include <limits>

namespace sbd {

Vec tweedie_denoise(const Vec& score, const Vec& x_tau, double tau, const NoiseSchedule& schedule) {
  if (score.size() != x_tau.size()) throw std::domain_error("tweedie_denoise: length mismatch");
  const auto [a, s] = schedule.rates(tau);
  if (a <= 0.0) throw std::domain_error("tweedie_denoise: alpha_tau must be positive");
  return (x_tau + s * s * score) / a;
}

Vec soft_threshold(const Vec& x, double lambda) {
  Vec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double m = std::abs(x[i]) - lambda;
    out[i] = m > 0.0 ? (x[i] < 0.0 ? -m : m) : 0.0;
  }
  return out;
}

CVec soft_threshold(const CVec& x, double lambda) {
  CVec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double mag = std::abs(x[i]);
    out[i] = mag > lambda ? x[i] * ((mag - lambda) / mag) : std::complex<double>(0.0, 0.0);
  }
  return out;
}

Vec soft_threshold_stacked(const Vec& x, double lambda, bool complex_pairs) {
  if (!complex_pairs) return soft_threshold(x, lambda);
  return stack_complex(soft_threshold(unstack_complex(x), lambda));
}

Vec ScorePrior::denoise(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const {
  return tweedie_denoise(score(x_tau, tau, schedule), x_tau, tau, schedule);
}

// ---------------------------------------------------------------------------
// GaussianPrior

GaussianPrior::GaussianPrior(Vec mean, Mat covariance) : mean_(std::move(mean)), diagonal_(false) {
  if (covariance.rows() != covariance.cols() || covariance.rows() != mean_.size())
    throw std::domain_error("GaussianPrior: covariance shape mismatch");
  if (!covariance.isApprox(covariance.transpose(), 1e-12))
    throw std::domain_error("GaussianPrior: covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(covariance);
  eigvals_ = eig.eigenvalues();
  eigvecs_ = eig.eigenvectors();
  if (eigvals_.minCoeff() <= 0.0)
    throw std::domain_error("GaussianPrior: covariance must be positive definite");
}

GaussianPrior::GaussianPrior(Vec mean, Vec diag_covariance)
    : mean_(std::move(mean)), diagonal_(true), eigvals_(std::move(diag_covariance)) {
  if (eigvals_.size() != mean_.size())
    throw std::domain_error("GaussianPrior: covariance shape mismatch");
  if (eigvals_.minCoeff() <= 0.0)
    throw std::domain_error("GaussianPrior: covariance must be positive definite");
}

Vec GaussianPrior::effective_precision(double alpha, double sigma) const {
  return (alpha * alpha * eigvals_.array() + sigma * sigma).inverse().matrix();
}

Vec GaussianPrior::score(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const {
  if (x_tau.size() != mean_.size()) throw std::domain_error("GaussianPrior::score: dim mismatch");
  const auto [a, s] = schedule.rates(tau);
  const Vec prec = effective_precision(a, s);
  if (!prec.allFinite()) throw NumericError("GaussianPrior::score: singular effective covariance");
  const Vec centered = x_tau - a * mean_;
  if (diagonal_) return -(prec.array() * centered.array()).matrix();
  return -(eigvecs_ * (prec.array() * (eigvecs_.transpose() * centered).array()).matrix());
}

Vec GaussianPrior::denoise_vjp(const Vec& x_tau, double tau, const NoiseSchedule& schedule,
                               const Vec& u) const {
  (void)x_tau;  // the Gaussian denoiser is affine
  const auto [a, s] = schedule.rates(tau);
  if (a <= 0.0) throw std::domain_error("GaussianPrior::denoise_vjp: alpha must be positive");
  const Vec prec = effective_precision(a, s);
  // J = (I - sigma^2 P)/alpha with P the effective precision; symmetric.
  if (diagonal_) {
    const Vec diag = (1.0 - s * s * prec.array()).matrix() / a;
    return (diag.array() * u.array()).matrix();
  }
  const Vec proj = eigvecs_.transpose() * u;
  const Vec scaled = ((1.0 - s * s * prec.array()) / a * proj.array()).matrix();
  return eigvecs_ * scaled;
}

Vec GaussianPrior::posterior_mean(const Vec& x_tau, double tau,
                                  const NoiseSchedule& schedule) const {
  const auto [a, s] = schedule.rates(tau);
  const Vec prec = effective_precision(a, s);
  // mu + alpha Sigma (alpha^2 Sigma + sigma^2 I)^{-1} (x - alpha mu)
  const Vec centered = x_tau - a * mean_;
  if (diagonal_)
    return mean_ + a * (eigvals_.array() * prec.array() * centered.array()).matrix();
  const Vec proj = eigvecs_.transpose() * centered;
  return mean_ + a * (eigvecs_ * (eigvals_.array() * prec.array() * proj.array()).matrix());
}

Vec GaussianPrior::sample(Rng& rng) const {
  const Vec z = gaussian_vec(dim(), rng);
  if (diagonal_) return mean_ + (eigvals_.array().sqrt() * z.array()).matrix();
  return mean_ + eigvecs_ * (eigvals_.array().sqrt() * z.array()).matrix();
}

// ---------------------------------------------------------------------------
// GmmPrior

GmmPrior::GmmPrior(Vec weights, std::vector<Vec> means, std::vector<Vec> diag_covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covs_(std::move(diag_covariances)) {
  if (weights_.size() == 0 || means_.size() != static_cast<size_t>(weights_.size()) ||
      covs_.size() != means_.size())
    throw std::domain_error("GmmPrior: component count mismatch");
  if (std::abs(weights_.sum() - 1.0) > 1e-12 || weights_.minCoeff() < 0.0)
    throw std::domain_error("GmmPrior: weights must form a simplex");
  for (size_t i = 0; i < means_.size(); ++i) {
    if (means_[i].size() != means_[0].size() || covs_[i].size() != means_[0].size())
      throw std::domain_error("GmmPrior: component dimension mismatch");
    if (covs_[i].minCoeff() <= 0.0) throw std::domain_error("GmmPrior: covariances must be positive");
  }
}

void GmmPrior::perturbed_stats(const Vec& x_tau, double alpha, double sigma, Vec& resp,
                               std::vector<Vec>& comp_scores) const {
  const int c = num_components();
  const int d = dim();
  Vec logp(c);
  comp_scores.assign(c, Vec());
  for (int i = 0; i < c; ++i) {
    const Vec var = (alpha * alpha * covs_[i].array() + sigma * sigma).matrix();
    const Vec centered = x_tau - alpha * means_[i];
    double ll = std::log(weights_[i]);
    for (int j = 0; j < d; ++j)
      ll += -0.5 * std::log(2.0 * std::numbers::pi * var[j]) -
            0.5 * centered[j] * centered[j] / var[j];
    logp[i] = ll;
    comp_scores[i] = -(centered.array() / var.array()).matrix();
  }
  const double m = logp.maxCoeff();
  if (!std::isfinite(m))
    throw NumericError("GmmPrior: all component responsibilities underflowed");
  resp = (logp.array() - m).exp().matrix();
  resp /= resp.sum();
}

Vec GmmPrior::score(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const {
  if (x_tau.size() != dim()) throw std::domain_error("GmmPrior::score: dim mismatch");
  const auto [a, s] = schedule.rates(tau);
  Vec resp;
  std::vector<Vec> comp_scores;
  perturbed_stats(x_tau, a, s, resp, comp_scores);
  Vec out = Vec::Zero(dim());
  for (int i = 0; i < num_components(); ++i) out += resp[i] * comp_scores[i];
  return out;
}

Vec GmmPrior::responsibilities(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const {
  const auto [a, s] = schedule.rates(tau);
  Vec resp;
  std::vector<Vec> comp_scores;
  perturbed_stats(x_tau, a, s, resp, comp_scores);
  return resp;
}

Vec GmmPrior::denoise_vjp(const Vec& x_tau, double tau, const NoiseSchedule& schedule,
                          const Vec& u) const {
  const auto [a, s] = schedule.rates(tau);
  if (a <= 0.0) throw std::domain_error("GmmPrior::denoise_vjp: alpha must be positive");
  Vec resp;
  std::vector<Vec> comp_scores;
  perturbed_stats(x_tau, a, s, resp, comp_scores);
  // Hessian of the mixture log density:
  //   H = sum_i r_i (-P_i + g_i g_i^T) - s s^T, with P_i diagonal precisions.
  Vec score = Vec::Zero(dim());
  for (int i = 0; i < num_components(); ++i) score += resp[i] * comp_scores[i];
  Vec hu = Vec::Zero(dim());
  for (int i = 0; i < num_components(); ++i) {
    const Vec var = (a * a * covs_[i].array() + s * s).matrix();
    hu += resp[i] * (comp_scores[i] * comp_scores[i].dot(u) -
                     (u.array() / var.array()).matrix());
  }
  hu -= score * score.dot(u);
  // J^T u = (u + sigma^2 H u)/alpha
  return (u + s * s * hu) / a;
}

int GmmPrior::sample_component(Rng& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double r = unif(rng);
  for (int i = 0; i < num_components(); ++i) {
    r -= weights_[i];
    if (r <= 0.0) return i;
  }
  return num_components() - 1;
}

Vec GmmPrior::sample(Rng& rng) const {
  const int i = sample_component(rng);
  const Vec z = gaussian_vec(dim(), rng);
  return means_[i] + (covs_[i].array().sqrt() * z.array()).matrix();
}

// ---------------------------------------------------------------------------
// PointMassPrior

Vec PointMassPrior::score(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const {
  const auto [a, s] = schedule.rates(tau);
  if (s <= 0.0) throw std::domain_error("PointMassPrior::score: sigma_tau must be positive");
  return -(x_tau - a * point_) / (s * s);
}

Vec PointMassPrior::denoise(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const {
  (void)x_tau;
  (void)tau;
  (void)schedule;
  return point_;
}

Vec PointMassPrior::denoise_vjp(const Vec& x_tau, double tau, const NoiseSchedule& schedule,
                                const Vec& u) const {
  (void)x_tau;
  (void)tau;
  (void)schedule;
  return Vec::Zero(u.size());
}

// ---------------------------------------------------------------------------
// SparsityPrior

SparsityPrior::SparsityPrior(int dim, double lambda0, bool complex_pairs)
    : dim_(dim), lambda0_(lambda0), complex_pairs_(complex_pairs) {
  if (lambda0 <= 0.0) throw std::domain_error("SparsityPrior: lambda0 must be positive");
}

SparsityPrior::SparsityPrior(int dim, std::function<double(double)> lambda_of_tau,
                             bool complex_pairs)
    : dim_(dim), lambda_of_tau_(std::move(lambda_of_tau)), complex_pairs_(complex_pairs) {}

double SparsityPrior::effective_threshold(double tau, const NoiseSchedule& schedule) const {
  const double sig = schedule.sigma(tau);
  if (lambda_of_tau_) {
    const double lam = lambda_of_tau_(tau);
    if (!(lam > 0.0)) throw std::domain_error("SparsityPrior: lambda_tau must be positive");
    return lam * sig * sig;
  }
  // default lambda_tau = lambda0 / sigma_tau, so the product is lambda0 sigma_tau
  return lambda0_ * sig;
}

Vec SparsityPrior::denoise(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const {
  if (x_tau.size() != dim_) throw std::domain_error("SparsityPrior::denoise: dim mismatch");
  return soft_threshold_stacked(x_tau, effective_threshold(tau, schedule), complex_pairs_);
}

Vec SparsityPrior::score(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const {
  const auto [a, s] = schedule.rates(tau);
  if (s <= 0.0) throw std::domain_error("SparsityPrior::score: sigma_tau must be positive");
  return (a * denoise(x_tau, tau, schedule) - x_tau) / (s * s);
}

Vec SparsityPrior::denoise_vjp(const Vec& x_tau, double tau, const NoiseSchedule& schedule,
                               const Vec& u) const {
  const double t = effective_threshold(tau, schedule);
  Vec out = Vec::Zero(u.size());
  if (!complex_pairs_) {
    for (Eigen::Index i = 0; i < x_tau.size(); ++i)
      out[i] = std::abs(x_tau[i]) > t ? u[i] : 0.0;
    return out;
  }
  // Jacobian of magnitude shrinkage per complex pair:
  //   (1 - t/m) I + (t/m^3) x x^T on the (re, im) block when m > t, else 0.
  const Eigen::Index n = x_tau.size() / 2;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = x_tau[i], im = x_tau[n + i];
    const double m = std::hypot(re, im);
    if (m <= t) continue;
    const double ur = u[i], ui = u[n + i];
    const double dot = re * ur + im * ui;
    const double k = t / (m * m * m);
    out[i] = (1.0 - t / m) * ur + k * re * dot;
    out[n + i] = (1.0 - t / m) * ui + k * im * dot;
  }
  return out;
}

}  // namespace sbd
