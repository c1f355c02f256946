#pragma once

#include <map>
#include <string>
#include <vector>

#include "sbd/active.hpp"
#include "sbd/samplers.hpp"
#include "sbd/scenario.hpp"
#include "sbd/score_net.hpp"

namespace sbd {

// ---------------------------------------------------------------------------
// Conjugate linear-Gaussian bookkeeping used by experiment harnesses (the
// independently coded oracles for these formulas live in the test suite).

struct GaussianConjugate {
  Vec mean;
  Mat covariance;

  static GaussianConjugate from_prior(const Vec& mean, const Mat& covariance);
  /// Posterior after observing y = R x + eps, eps ~ N(0, noise_std^2 I).
  GaussianConjugate condition(const Mat& rows, const Vec& y, double noise_std) const;
  Vec sample(Rng& rng) const;
  double trace() const { return covariance.trace(); }
};

// ---------------------------------------------------------------------------
// CSV / manifest emission. Columns carry unit suffixes; doubles print with
// "%.17g" so replays are byte-identical.

struct MetricTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

std::string format_double(double v);
void write_csv(const std::string& path, const MetricTable& table);
MetricTable read_csv(const std::string& path);
/// metric,mean,std aggregate over rows (sample std, zero for a single row).
MetricTable aggregate_table(const MetricTable& per_run);

void append_manifest_line(const std::string& path, const std::string& json_line);

// ---------------------------------------------------------------------------
// Radar interference separation (joint posterior sampling with a sparse
// range-domain prior and a trained fast-time interference score).

struct RadarSeparationConfig {
  int n_fast_time = 1024;
  int num_targets = 3;
  int num_events = 2;
  double duty = 0.5;
  double interference_amplitude = 0.8;
  double noise_std = 1e-3;
  double lambda0 = 1.8;
  int steps = 600;
  int num_chains = 4;
  double zeta = 30.0;
  double zeta_noise = 60.0;
  double alpha_floor = 0.3;
  enum class GuidanceMode { kFixed, kResidualNormalized, kStepScaled };
  GuidanceMode guidance_mode = GuidanceMode::kStepScaled;
  int num_seeds = 20;
  std::uint64_t base_seed = 11;
};

struct ChirpTrainConfig {
  int n_fast_time = 1024;
  int dataset_size = 768;
  int num_events = 2;
  double duty = 0.5;
  double amplitude = 0.8;
  std::vector<int> hidden{512, 512, 512};
  int time_embed_dim = 64;
  int steps = 2500;
  int batch = 24;
  double learning_rate = 1e-3;
  bool adam = true;
  double clip_norm = 10.0;
  std::uint64_t seed = 7;
};

ScoreNet train_chirp_scorenet(const ChirpTrainConfig& cfg);

struct RadarSeparationRow {
  std::uint64_t seed = 0;
  double floor_unmitigated_db = 0.0;
  double floor_mitigated_db = 0.0;
  double improvement_db = 0.0;
  double oracle_improvement_db = 0.0;
  double residual_rel = 0.0;
  double nmse = 0.0;
  long long nfe = 0;
};

struct RadarSeparationResult {
  std::vector<RadarSeparationRow> rows;
  double mean_improvement_db = 0.0;
  double mean_residual_rel = 0.0;
};

RadarSeparationResult run_radar_separation(const RadarSeparationConfig& cfg, const ScoreNet& net);

// ---------------------------------------------------------------------------
// 1-D GMM denoising-score-matching study.

struct GmmDsmConfig {
  Vec weights = (Vec(2) << 0.45, 0.55).finished();
  Vec means = (Vec(2) << -2.0, 2.0).finished();
  Vec stds = (Vec(2) << 1.1, 1.3).finished();
  int dataset_size = 10000;
  int steps = 8000;
  int batch = 384;
  double learning_rate = 1e-3;
  double momentum = 0.0;
  bool adam = true;
  double clip_norm = 10.0;
  double tau_power = 2.0;
  std::vector<int> hidden{128, 128, 128};
  int time_embed_dim = 64;
  std::uint64_t seed = 3;
};

struct GmmDsmResult {
  ScoreNet net;
  double score_mse = 0.0;        // vs analytic score, grid x tau protocol
  double sign_agreement = 0.0;   // excluding near-zero-score bands
  double loss_first = 0.0;
  double loss_last = 0.0;
};

std::shared_ptr<const GmmPrior> gmm_dsm_prior(const GmmDsmConfig& cfg);
GmmDsmResult run_gmm_dsm(const GmmDsmConfig& cfg);

// ---------------------------------------------------------------------------
// Phantom active compressed sensing (k-space line selection).

enum class ActiveRule { kRandom, kGas, kEntropy, kAdasense, kAds };

ActiveRule active_rule_from_string(const std::string& name);
std::string to_string(ActiveRule rule);

struct PhantomActiveConfig {
  int side = 32;
  int num_components = 4;
  double component_std = 0.12;
  std::uint64_t prior_seed = 2;
  double kspace_noise_std = 0.08;
  int budget = 8;
  std::vector<int> initial_lines{12};
  int steps = 64;
  int num_chains = 16;
  double zeta = 10.0;  // step-scaled likelihood weight
  double entropy_sigma_factor = 0.1;
  double ads_checkpoint_head = 0.2;
  int num_seeds = 50;
  std::uint64_t base_seed = 101;
};

struct PhantomActiveRow {
  std::uint64_t seed = 0;
  double mse_final = 0.0;
  long long nfe = 0;
  std::vector<double> mse_per_step;  // after 0..budget acquired lines
  std::vector<int> selected_lines;
};

PhantomActiveRow run_phantom_active_single(const PhantomActiveConfig& cfg, ActiveRule rule,
                                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Warm-started sequential inference on a slowly varying scene.

struct SequentialExpConfig {
  int dim = 64;
  int num_frames = 10;
  double drift_angle = 0.08;  // AR(1) rotation per frame
  int meas_rows = 32;
  double noise_std = 0.35;
  int steps = 200;
  double tau_prime = 0.2;
  int num_chains = 8;
  double zeta = 0.0;  // 0 -> 1/(2 noise_std^2)
  int num_seeds = 20;
  std::uint64_t base_seed = 51;
  int abrupt_frame = -1;     // inject a scene discontinuity at this frame
  double abrupt_scale = 3.0;
};

struct SequentialExpRow {
  std::uint64_t seed = 0;
  double nmse_warm = 0.0;
  double nmse_full = 0.0;
  int warm_steps_per_frame = 0;
  int full_steps_per_frame = 0;
  int fallback_count = 0;
};

SequentialExpRow run_sequential_single(const SequentialExpConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// AdaSense free-design sequential run on a linear-Gaussian ground truth. The
// posterior is conjugate, so ensembles are exact posterior draws and the
// achieved mean-squared error per step is trace of the analytic posterior
// covariance under the chosen rows.

struct AdasenseGaussianConfig {
  int dim = 16;
  int budget = 8;
  int ensemble_size = 4096;
  double noise_std = 0.3;
  std::uint64_t seed = 9;
};

struct AdasenseGaussianResult {
  std::vector<double> achieved_mse;  // trace after each designed row
  std::vector<Vec> rows;
};

AdasenseGaussianResult run_adasense_gaussian_sequential(const AdasenseGaussianConfig& cfg,
                                                        const Vec& prior_mean,
                                                        const Mat& prior_cov);

}  // namespace sbd
