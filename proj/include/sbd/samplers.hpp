#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "sbd/measurement.hpp"
#include "sbd/priors.hpp"
#include "sbd/sde.hpp"

namespace sbd {

/// Likelihood-guidance weighting. Fixed mode adds zeta * grad to the score
/// (so the drift scales it by g^2 dt); the residual-normalized mode further
/// divides by ||y - y_hat||; the step-scaled mode applies the likelihood
/// gradient as its own update of size zeta * dt after the predictor step,
/// which keeps the data-consistency contraction rate uniform across the
/// trajectory instead of being throttled by g(tau)^2.
struct GuidanceConfig {
  enum class Mode { kFixed, kResidualNormalized, kStepScaled };
  Mode mode = Mode::kFixed;
  double zeta = 1.0;
  // per-variable overrides for the joint sampler; <= 0 means "use zeta"
  double zeta_x = 0.0;
  double zeta_n = 0.0;
  // Guidance gating in the high-noise head: the Tweedie projection scales
  // like 1/alpha_tau, so likelihood gradients blow up where alpha is tiny and
  // carry no usable information. Guidance is off below alpha_floor and ramps
  // in linearly over [alpha_floor, 2 alpha_floor].
  double alpha_floor = 0.05;
  // Trust region: the guidance displacement of one predictor/corrector step
  // is clipped to this fraction of max(||x||, 1). 0 disables clipping.
  double guidance_trust = 0.5;
  double divergence_norm = 1e6;

  double weight_x() const { return zeta_x > 0.0 ? zeta_x : zeta; }
  double weight_n() const { return zeta_n > 0.0 ? zeta_n : zeta; }
};

/// Raised when a trajectory leaves the configured norm bound.
class SamplerDivergence : public NumericError {
 public:
  using NumericError::NumericError;
};

struct InverseProblem {
  Vec y;
  MeasurementModel model;
  std::shared_ptr<const ScorePrior> prior;
};

struct SeparationProblem {
  Vec y;
  MeasurementModel model;  // operator applies to the signal component only
  std::shared_ptr<const ScorePrior> prior_x;
  std::shared_ptr<const ScorePrior> prior_n;
};

struct PosteriorEnsemble {
  Mat samples;        // dim x N_s
  Mat noise_samples;  // dim_n x N_s (joint runs only, else 0 x 0)
  double tau_of_snapshot = 0.0;
  std::uint64_t seed = 0;
  long long nfe = 0;  // prior score-function evaluations
  long long clamp_events = 0;
  std::vector<double> residual_trace;  // mean relative residual per step

  int num_samples() const { return static_cast<int>(samples.cols()); }
  Vec mean() const { return samples.rowwise().mean(); }
  Vec noise_mean() const { return noise_samples.rowwise().mean(); }
  Vec coordinate_variance() const;
};

/// DPS gradient of ||y - A x_{0|tau}||^2 with respect to x_tau, flowing
/// through the prior's exact denoiser Jacobian. The model must not be
/// companded (the companded path needs the joint variant below).
Vec dps_grad(const Vec& x_tau, double tau, const Vec& y, const MeasurementModel& model,
             const ScorePrior& prior, const NoiseSchedule& schedule);

/// Gradient of the companded data-consistency term
/// ||y - C(C^{-1}(A x_{0|tau}) + C^{-1}(n_{0|tau}))||^2 with respect to
/// (x_tau, n_tau). Companded-domain operands are clamped to +-(1 - 1e-6)
/// before expansion; the number of clamped entries is reported.
struct CompandedGrad {
  Vec grad_x;
  Vec grad_n;
  long long clamp_events = 0;
  double residual_norm = 0.0;
};
CompandedGrad companded_dc_grad(const Vec& x_tau, const Vec& n_tau, double tau, const Vec& y,
                                const MeasurementModel& model, const ScorePrior& prior_x,
                                const ScorePrior& prior_n, const NoiseSchedule& schedule);

/// Conditional reverse diffusion with the posterior score
/// s_prior(x_tau) - zeta * grad ||y - A x_{0|tau}||^2.
PosteriorEnsemble dps_sample(const InverseProblem& problem, const GuidanceConfig& guidance,
                             const TrajectoryConfig& traj, int num_chains,
                             const NoiseSchedule& schedule);

/// Coupled reverse diffusion over (x, n) with per-variable prior scores and
/// the shared likelihood gradient (companded when the model says so). The two
/// updates at each step are computed from the same snapshot and applied
/// together.
PosteriorEnsemble joint_separate(const SeparationProblem& problem, const GuidanceConfig& guidance,
                                 const TrajectoryConfig& traj, int num_chains,
                                 const NoiseSchedule& schedule);

struct SequentialOptions {
  double tau_prime = 0.2;           // warm-start diffusion time
  int transition_history = 1;       // 1: carry posterior mean; 2: linear extrapolation
  double fallback_residual = 0.3;   // relative residual above which a frame re-runs fully
};

struct SequentialFrameInfo {
  int steps_used = 0;
  bool fallback = false;
  double relative_residual = 0.0;
};

struct SequentialResult {
  std::vector<PosteriorEnsemble> ensembles;
  std::vector<SequentialFrameInfo> frames;
  int fallback_count = 0;
};

/// Warm-started sequential inference: frame 0 runs a full trajectory, later
/// frames restart from the transition prediction at tau_prime with
/// proportionally fewer steps, falling back to a full run when the data
/// residual exceeds the threshold.
SequentialResult sequential_pipeline(const std::vector<Vec>& frames, const InverseProblem& tmpl,
                                     const SequentialOptions& options,
                                     const GuidanceConfig& guidance, const TrajectoryConfig& traj,
                                     int num_chains, const NoiseSchedule& schedule);

namespace detail {
/// Shared lockstep chain loop used by dps_sample, the sequential pipeline and
/// active-sampling runs. The hook runs once per step after all chain scores
/// and Tweedie projections are computed and before the EM update; it may
/// mutate y and the model (measurement augmentation).
struct StepContext {
  int step = 0;
  double tau = 0.0;
  const Mat& x0_snapshot;   // dim x N_s Tweedie projections
  const Mat& chains;        // current states
  Vec& y;
  MeasurementModel& model;
};
using StepHook = std::function<void(StepContext&)>;

PosteriorEnsemble run_dps_chains(Vec y, MeasurementModel model,
                                 const std::shared_ptr<const ScorePrior>& prior,
                                 const GuidanceConfig& guidance, const TrajectoryConfig& traj,
                                 int num_chains, const NoiseSchedule& schedule, double tau_start,
                                 int num_steps, std::optional<Mat> init_chains,
                                 std::uint64_t stream_offset, const StepHook& hook);
}  // namespace detail

}  // namespace sbd
