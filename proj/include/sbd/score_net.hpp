#pragma once

#include <string>
#include <vector>

#include "sbd/priors.hpp"
#include "sbd/schedule.hpp"

namespace sbd {

/// Fully-connected score network with a sinusoidal time embedding. The score
/// is parameterized as a residual around the unit-data baseline
///   score(x, tau) = raw(x, tau) / sigma_tau - x / (alpha^2 + sigma^2),
/// so a zero network is exactly the N(0, alpha^2 + sigma^2) prior and the
/// far-field drift stays contractive no matter how little the network has
/// trained. Training targets for raw stay O(1) across noise levels.
class ScoreNet {
 public:
  struct Config {
    std::vector<int> hidden_widths{128, 128, 128};
    int time_embed_dim = 64;  // even
  };

  struct TrainConfig {
    int steps = 2000;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double momentum = 0.0;  // heavy-ball coefficient; 0 is plain SGD
    bool adam = false;      // diagonal moment rescaling on top of the fixed step
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 1.0;
    double tau_min_frac = 1e-3;  // training taus drawn from [frac*T, T]
    // tau importance sampling: tau = T u^p with matching weights keeps the
    // objective unchanged while spending more batches at low noise (p > 1).
    double tau_power = 1.0;
    // Polyak tail averaging: the returned parameters are the mean of the
    // iterates over the last fraction of steps (0 keeps the last iterate).
    double average_tail_fraction = 0.25;
    std::uint64_t seed = 0;
  };

  ScoreNet() = default;
  ScoreNet(int signal_dim, const Config& config, std::uint64_t init_seed);

  int signal_dim() const { return signal_dim_; }
  int time_embed_dim() const { return emb_dim_; }
  const std::vector<int>& hidden_widths() const { return hidden_; }
  long long train_step_count() const { return train_steps_; }
  const std::vector<double>& loss_history() const { return loss_history_; }

  /// Raw network output (the learned residual).
  Vec forward(const Vec& x, double tau) const;
  /// Score estimate raw/sigma - x/(alpha^2 + sigma^2); needs sigma_tau > 0.
  Vec score(const Vec& x, double tau, const NoiseSchedule& schedule) const;
  /// u -> (d forward / d x)^T u, the exact input VJP of the raw output.
  Vec input_vjp(const Vec& x, double tau, const Vec& u) const;

  // Parameter-space access (declared layer order W0, b0, W1, b1, ...; W
  // flattened row-major). Used by training, serialization and gradient checks.
  int num_params() const;
  Vec flatten_params() const;
  void set_params(const Vec& theta);

  /// Weighted batch mean of ||o(alpha x0 + sigma z, tau) + z||^2 and its
  /// parameter gradient (empty weights = uniform). Deterministic in its
  /// inputs.
  double dsm_loss_and_grad(const std::vector<Vec>& x0, const std::vector<double>& taus,
                           const std::vector<Vec>& noise, const NoiseSchedule& schedule,
                           Vec* grad, const std::vector<double>& weights = {}) const;

  void save(const std::string& path) const;
  static ScoreNet load(const std::string& path);

 private:
  friend ScoreNet& dsm_train(ScoreNet&, const std::vector<Vec>&, const NoiseSchedule&,
                             const ScoreNet::TrainConfig&);

  Vec time_embedding(double tau) const;
  int num_layers() const { return static_cast<int>(weights_.size()); }

  int signal_dim_ = 0;
  int emb_dim_ = 0;
  std::vector<int> hidden_;
  std::vector<Mat> weights_;
  std::vector<Vec> biases_;
  long long train_steps_ = 0;
  std::vector<double> loss_history_;
};

/// Denoising score-matching training: stochastic gradient descent with a
/// fixed step size and global-norm gradient clipping on the noise-prediction
/// surrogate E sigma^2 ||s_theta(alpha x0 + sigma z, tau) + z/sigma||^2.
/// Deterministic given config.seed; throws NumericError with the step index
/// if the loss goes non-finite.
ScoreNet& dsm_train(ScoreNet& net, const std::vector<Vec>& dataset, const NoiseSchedule& schedule,
                    const ScoreNet::TrainConfig& config);

/// Adapts a trained ScoreNet to the ScorePrior interface. Guidance gradients
/// flow through the network's true input Jacobian by default; the identity
/// mode substitutes J ~= I, the usual stabilization when a partially trained
/// network's Jacobian would otherwise amplify the data-consistency loop.
class ScoreNetPrior : public ScorePrior {
 public:
  enum class JacobianMode { kExact, kIdentity };

  explicit ScoreNetPrior(ScoreNet net, JacobianMode mode = JacobianMode::kExact)
      : net_(std::move(net)), mode_(mode) {}
  int dim() const override { return net_.signal_dim(); }
  Vec score(const Vec& x_tau, double tau, const NoiseSchedule& schedule) const override;
  Vec denoise_vjp(const Vec& x_tau, double tau, const NoiseSchedule& schedule,
                  const Vec& u) const override;
  const ScoreNet& net() const { return net_; }

 private:
  ScoreNet net_;
  JacobianMode mode_ = JacobianMode::kExact;
};

}  // namespace sbd
