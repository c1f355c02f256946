#include "sbd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "sbd/config.hpp"
#include "sbd/metrics.hpp"

namespace sbd {

// ---------------------------------------------------------------------------
// conjugate bookkeeping

GaussianConjugate GaussianConjugate::from_prior(const Vec& mean, const Mat& covariance) {
  return GaussianConjugate{mean, covariance};
}

GaussianConjugate GaussianConjugate::condition(const Mat& rows, const Vec& y,
                                               double noise_std) const {
  // Woodbury downdate: S = R Sigma R^T + sigma^2 I
  const Mat cross = covariance * rows.transpose();
  Mat s = rows * cross;
  s.diagonal().array() += noise_std * noise_std;
  const Mat gain = cross * s.inverse();
  GaussianConjugate out;
  out.mean = mean + gain * (y - rows * mean);
  out.covariance = covariance - gain * cross.transpose();
  return out;
}

Vec GaussianConjugate::sample(Rng& rng) const {
  Eigen::SelfAdjointEigenSolver<Mat> eig(covariance);
  const Vec z = gaussian_vec(static_cast<int>(mean.size()), rng);
  return mean + eig.eigenvectors() *
                    (eig.eigenvalues().array().max(0.0).sqrt() * z.array()).matrix();
}

// ---------------------------------------------------------------------------
// CSV / manifest

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::string& path, const MetricTable& table) {
  std::ofstream f(path);
  if (!f) throw IoError("write_csv: cannot open " + path);
  f << "# schema=1\n";
  for (size_t c = 0; c < table.columns.size(); ++c)
    f << table.columns[c] << (c + 1 < table.columns.size() ? "," : "\n");
  for (const auto& row : table.rows) {
    for (size_t c = 0; c < row.size(); ++c)
      f << format_double(row[c]) << (c + 1 < row.size() ? "," : "\n");
  }
  if (!f) throw IoError("write_csv: write failed for " + path);
}

MetricTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("read_csv: cannot open " + path);
  MetricTable table;
  std::string line;
  bool header_done = false;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header_done) {
      table.columns = cells;
      header_done = true;
      continue;
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& c : cells) row.push_back(std::strtod(c.c_str(), nullptr));
    table.rows.push_back(std::move(row));
  }
  return table;
}

MetricTable aggregate_table(const MetricTable& per_run) {
  MetricTable agg;
  agg.columns = {"metric_index", "mean", "std"};
  const size_t n = per_run.rows.size();
  for (size_t c = 0; c < per_run.columns.size(); ++c) {
    double mean = 0.0;
    for (const auto& row : per_run.rows) mean += row[c];
    mean /= std::max<size_t>(1, n);
    double var = 0.0;
    for (const auto& row : per_run.rows) var += (row[c] - mean) * (row[c] - mean);
    var = n > 1 ? var / (n - 1) : 0.0;
    agg.rows.push_back({static_cast<double>(c), mean, std::sqrt(var)});
  }
  return agg;
}

void append_manifest_line(const std::string& path, const std::string& json_line) {
  std::ofstream f(path, std::ios::app);
  if (!f) throw IoError("append_manifest_line: cannot open " + path);
  f << json_line << "\n";
}

// ---------------------------------------------------------------------------
// radar separation

ScoreNet train_chirp_scorenet(const ChirpTrainConfig& cfg) {
  const std::vector<Vec> dataset = make_interference_dataset(
      cfg.n_fast_time, cfg.dataset_size, cfg.num_events, cfg.duty, cfg.amplitude, cfg.seed);
  ScoreNet::Config nc;
  nc.hidden_widths = cfg.hidden;
  nc.time_embed_dim = cfg.time_embed_dim;
  ScoreNet net(2 * cfg.n_fast_time, nc, cfg.seed);
  ScoreNet::TrainConfig tc;
  tc.steps = cfg.steps;
  tc.batch_size = cfg.batch;
  tc.learning_rate = cfg.learning_rate;
  tc.adam = cfg.adam;
  tc.clip_norm = cfg.clip_norm;
  tc.seed = cfg.seed + 1;
  const NoiseSchedule schedule = NoiseSchedule::variance_preserving();
  dsm_train(net, dataset, schedule, tc);
  return net;
}

RadarSeparationResult run_radar_separation(const RadarSeparationConfig& cfg, const ScoreNet& net) {
  const NoiseSchedule schedule = NoiseSchedule::variance_preserving();
  const int n = cfg.n_fast_time;
  auto prior_x = std::make_shared<SparsityPrior>(2 * n, cfg.lambda0, /*complex_pairs=*/true);
  // identity-Jacobian guidance: a desk-scale network's exact Jacobian
  // amplifies the data-consistency loop beyond stability
  auto prior_n =
      std::make_shared<ScoreNetPrior>(net, ScoreNetPrior::JacobianMode::kIdentity);

  RadarSeparationResult result;
  for (int s = 0; s < cfg.num_seeds; ++s) {
    Rng rng = make_stream(cfg.base_seed, 1000 + static_cast<std::uint64_t>(s));
    RadarScene scene = make_random_radar_scene(n, cfg.num_targets, cfg.num_events, cfg.duty,
                                               cfg.interference_amplitude, cfg.noise_std, rng);
    const RadarDraw draw = gen_radar(scene, rng);

    SeparationProblem problem;
    problem.y = stack_complex(draw.y);
    problem.model = MeasurementModel(LinearOperator::adjoint_dft(n), cfg.noise_std, true);
    problem.prior_x = prior_x;
    problem.prior_n = prior_n;

    GuidanceConfig guidance;
    guidance.zeta = cfg.zeta;
    guidance.zeta_x = cfg.zeta;
    guidance.zeta_n = cfg.zeta_noise;
    guidance.alpha_floor = cfg.alpha_floor;
    switch (cfg.guidance_mode) {
      case RadarSeparationConfig::GuidanceMode::kFixed:
        guidance.mode = GuidanceConfig::Mode::kFixed;
        break;
      case RadarSeparationConfig::GuidanceMode::kResidualNormalized:
        guidance.mode = GuidanceConfig::Mode::kResidualNormalized;
        break;
      case RadarSeparationConfig::GuidanceMode::kStepScaled:
        guidance.mode = GuidanceConfig::Mode::kStepScaled;
        break;
    }
    TrajectoryConfig traj;
    traj.num_steps = cfg.steps;
    traj.seed = splitmix64(cfg.base_seed ^ (0x5E9A12 + static_cast<std::uint64_t>(s)));

    const PosteriorEnsemble ens = joint_separate(problem, guidance, traj, cfg.num_chains, schedule);
    const CVec x_hat = unstack_complex(ens.mean());
    const Vec n_hat = ens.noise_mean();

    std::vector<int> signal_bins;
    for (const auto& [bin, amp] : scene.targets) {
      (void)amp;
      signal_bins.push_back(bin);
    }

    RadarSeparationRow row;
    row.seed = traj.seed;
    row.floor_unmitigated_db = noise_floor_db(fft::dft(draw.y), signal_bins);
    row.floor_mitigated_db = noise_floor_db(x_hat, signal_bins);
    row.improvement_db = row.floor_unmitigated_db - row.floor_mitigated_db;
    row.oracle_improvement_db =
        row.floor_unmitigated_db - noise_floor_db(fft::dft(CVec(draw.y - draw.n)), signal_bins);
    const Vec consist = problem.y - problem.model.op.apply(ens.mean()) - n_hat;
    row.residual_rel = consist.norm() / problem.y.norm();
    row.nmse = nmse(ens.mean(), stack_complex(draw.x));
    row.nfe = ens.nfe;
    result.rows.push_back(row);
  }
  for (const auto& row : result.rows) {
    result.mean_improvement_db += row.improvement_db;
    result.mean_residual_rel += row.residual_rel;
  }
  result.mean_improvement_db /= std::max<size_t>(1, result.rows.size());
  result.mean_residual_rel /= std::max<size_t>(1, result.rows.size());
  return result;
}

// ---------------------------------------------------------------------------
// 1-D GMM DSM study

std::shared_ptr<const GmmPrior> gmm_dsm_prior(const GmmDsmConfig& cfg) {
  std::vector<Vec> means, covs;
  for (int i = 0; i < cfg.means.size(); ++i) {
    means.push_back(Vec::Constant(1, cfg.means[i]));
    covs.push_back(Vec::Constant(1, cfg.stds[i] * cfg.stds[i]));
  }
  return std::make_shared<GmmPrior>(cfg.weights, means, covs);
}

GmmDsmResult run_gmm_dsm(const GmmDsmConfig& cfg) {
  const NoiseSchedule schedule = NoiseSchedule::variance_preserving();
  const auto prior = gmm_dsm_prior(cfg);

  std::vector<Vec> dataset;
  dataset.reserve(cfg.dataset_size);
  Rng data_rng = make_stream(cfg.seed, 0xDA7A);
  for (int i = 0; i < cfg.dataset_size; ++i) dataset.push_back(prior->sample(data_rng));

  ScoreNet::Config nc;
  nc.hidden_widths = cfg.hidden;
  nc.time_embed_dim = cfg.time_embed_dim;
  GmmDsmResult result{ScoreNet(1, nc, cfg.seed), 0.0, 0.0, 0.0, 0.0};
  ScoreNet::TrainConfig tc;
  tc.steps = cfg.steps;
  tc.batch_size = cfg.batch;
  tc.learning_rate = cfg.learning_rate;
  tc.momentum = cfg.momentum;
  tc.adam = cfg.adam;
  tc.clip_norm = cfg.clip_norm;
  tc.tau_power = cfg.tau_power;
  tc.seed = cfg.seed + 1;
  dsm_train(result.net, dataset, schedule, tc);
  result.loss_first = result.net.loss_history().front();
  result.loss_last = result.net.loss_history().back();

  // protocol: grid on [-5, 5], taus {0.1, 0.3, 0.5} of the horizon
  const std::vector<double> taus{0.1 * schedule.horizon(), 0.3 * schedule.horizon(),
                                 0.5 * schedule.horizon()};
  const int grid_n = 256;
  double mse = 0.0;
  int count = 0;
  int sign_hits = 0, sign_total = 0;
  for (double tau : taus) {
    for (int g = 0; g < grid_n; ++g) {
      const double xv = -5.0 + 10.0 * g / (grid_n - 1);
      const Vec x = Vec::Constant(1, xv);
      const double s_true = prior->score(x, tau, schedule)[0];
      const double s_net = result.net.score(x, tau, schedule)[0];
      mse += (s_net - s_true) * (s_net - s_true);
      ++count;
      if (std::abs(s_true) > 0.5) {
        ++sign_total;
        if ((s_true > 0.0) == (s_net > 0.0)) ++sign_hits;
      }
    }
  }
  result.score_mse = mse / count;
  result.sign_agreement = sign_total > 0 ? static_cast<double>(sign_hits) / sign_total : 1.0;
  return result;
}

// ---------------------------------------------------------------------------
// phantom active CS

ActiveRule active_rule_from_string(const std::string& name) {
  if (name == "random") return ActiveRule::kRandom;
  if (name == "gas") return ActiveRule::kGas;
  if (name == "entropy") return ActiveRule::kEntropy;
  if (name == "adasense") return ActiveRule::kAdasense;
  if (name == "ads") return ActiveRule::kAds;
  throw ConfigError("unknown active rule '" + name + "'", "rule");
}

std::string to_string(ActiveRule rule) {
  switch (rule) {
    case ActiveRule::kRandom: return "random";
    case ActiveRule::kGas: return "gas";
    case ActiveRule::kEntropy: return "entropy";
    case ActiveRule::kAdasense: return "adasense";
    case ActiveRule::kAds: return "ads";
  }
  return "?";
}

namespace {

std::vector<int> line_coeffs(int side, int line) {
  std::vector<int> coeffs(side);
  for (int c = 0; c < side; ++c) coeffs[c] = line * side + c;
  return coeffs;
}

double entropy_sigma_for(const PosteriorEnsemble& ensemble, const LinearOperator& full_op,
                         const CandidateSet& candidates, double factor) {
  Mat pushed(full_op.codomain_dim(), ensemble.num_samples());
  for (int c = 0; c < ensemble.num_samples(); ++c)
    pushed.col(c) = full_op.apply(ensemble.samples.col(c));
  const Vec mean = pushed.rowwise().mean();
  const int m = full_op.codomain_dim() / 2;
  double acc = 0.0;
  int n = 0;
  for (const auto& group : candidates.coeff_groups) {
    for (int j : group) {
      for (int coord : {j, m + j}) {
        double v = 0.0;
        for (Eigen::Index c = 0; c < pushed.cols(); ++c) {
          const double d = pushed(coord, c) - mean[coord];
          v += d * d;
        }
        acc += v / std::max(1, ensemble.num_samples() - 1);
        ++n;
      }
    }
  }
  return std::max(factor * std::sqrt(acc / std::max(1, n)), 1e-9);
}

}  // namespace

PhantomActiveRow run_phantom_active_single(const PhantomActiveConfig& cfg, ActiveRule rule,
                                           std::uint64_t seed) {
  const NoiseSchedule schedule = NoiseSchedule::variance_preserving();
  const auto prior = make_phantom_prior(cfg.side, cfg.num_components, cfg.component_std,
                                        cfg.prior_seed);
  PhantomSpec spec;
  spec.side = cfg.side;
  spec.prior = prior;
  spec.kspace_noise_std = cfg.kspace_noise_std;

  Rng scene_rng = make_stream(cfg.base_seed, seed * 8 + 1);
  const PhantomDraw draw = gen_phantom(spec, scene_rng);
  const int n_coeff = cfg.side * cfg.side;

  Vec y_full = stack_complex(draw.kspace);
  if (cfg.kspace_noise_std > 0.0) {
    const double per_comp = cfg.kspace_noise_std / std::sqrt(2.0);
    y_full += per_comp * gaussian_vec(2 * n_coeff, scene_rng);
  }

  std::vector<std::uint8_t> mask(n_coeff, 0);
  for (int line : cfg.initial_lines)
    for (int c : line_coeffs(cfg.side, line)) mask[c] = 1;

  CandidateSet candidates;
  for (int line = 0; line < cfg.side; ++line) {
    if (std::find(cfg.initial_lines.begin(), cfg.initial_lines.end(), line) !=
        cfg.initial_lines.end())
      continue;
    candidates.ids.push_back(line);
    candidates.coeff_groups.push_back(line_coeffs(cfg.side, line));
  }

  auto make_op = [&](const std::vector<std::uint8_t>& m) {
    return LinearOperator::masked_dft2(cfg.side, cfg.side, m, /*real_domain=*/true);
  };
  const LinearOperator full_op =
      LinearOperator::masked_dft2(cfg.side, cfg.side, std::vector<std::uint8_t>(n_coeff, 1), true);

  GuidanceConfig guidance;
  guidance.zeta = cfg.zeta;
  guidance.mode = GuidanceConfig::Mode::kStepScaled;
  auto traj_for = [&](int t) {
    TrajectoryConfig traj;
    traj.num_steps = cfg.steps;
    traj.seed = splitmix64(splitmix64(cfg.base_seed ^ 0xAC7157EULL) ^ (seed * 64 + t));
    return traj;
  };

  PhantomActiveRow row;
  row.seed = seed;
  const double dim = static_cast<double>(n_coeff);

  if (rule == ActiveRule::kAds) {
    AdsProblem problem;
    problem.n_coeff = n_coeff;
    problem.mask0 = mask;
    problem.y0 = extract_masked(y_full, mask);
    problem.full_op = full_op;
    problem.make_op = make_op;
    problem.acquire = [&](const std::vector<int>& coeffs) {
      Vec out(2 * coeffs.size());
      for (size_t q = 0; q < coeffs.size(); ++q) {
        out[static_cast<Eigen::Index>(q)] = y_full[coeffs[q]];
        out[static_cast<Eigen::Index>(coeffs.size() + q)] = y_full[n_coeff + coeffs[q]];
      }
      return out;
    };
    problem.prior = prior;
    problem.candidates = candidates;
    problem.entropy_sigma = cfg.entropy_sigma_factor;

    const AdsResult ads = ads_run(problem, guidance, traj_for(0), cfg.num_chains, schedule,
                                  cfg.budget, SelectionRule::kEntropy, cfg.ads_checkpoint_head);
    row.mse_final = (ads.ensemble.mean() - draw.image).squaredNorm() / dim;
    row.nfe = ads.ensemble.nfe;
    row.selected_lines = ads.design.selected;
    return row;
  }

  Rng random_rule_rng = make_stream(cfg.base_seed, seed * 8 + 5);
  CandidateSet remaining = candidates;
  for (int t = 0; t <= cfg.budget; ++t) {
    InverseProblem problem;
    problem.y = extract_masked(y_full, mask);
    problem.model = MeasurementModel(make_op(mask), cfg.kspace_noise_std, true);
    problem.prior = prior;
    const PosteriorEnsemble ens =
        dps_sample(problem, guidance, traj_for(t), cfg.num_chains, schedule);
    row.nfe += ens.nfe;
    row.mse_per_step.push_back((ens.mean() - draw.image).squaredNorm() / dim);
    if (t == cfg.budget) break;

    int pick = -1;
    switch (rule) {
      case ActiveRule::kRandom: {
        std::uniform_int_distribution<int> d(0, remaining.size() - 1);
        pick = remaining.ids[d(random_rule_rng)];
        break;
      }
      case ActiveRule::kGas:
        pick = gas_select(ens, full_op, remaining);
        break;
      case ActiveRule::kEntropy:
        pick = entropy_select(ens, full_op, remaining,
                              entropy_sigma_for(ens, full_op, remaining,
                                                cfg.entropy_sigma_factor));
        break;
      case ActiveRule::kAdasense:
        pick = adasense_constrained(ens, full_op, remaining);
        break;
      case ActiveRule::kAds:
        break;  // handled above
    }
    row.selected_lines.push_back(pick);
    for (int c : line_coeffs(cfg.side, pick)) mask[c] = 1;
    remaining.remove(pick);
  }
  row.mse_final = row.mse_per_step.back();
  return row;
}

// ---------------------------------------------------------------------------
// sequential warm-start study

SequentialExpRow run_sequential_single(const SequentialExpConfig& cfg, std::uint64_t seed) {
  const NoiseSchedule schedule = NoiseSchedule::variance_preserving();
  const int d = cfg.dim;

  Vec mu(d), var(d);
  for (int i = 0; i < d; ++i) {
    mu[i] = std::sin(2.0 * std::numbers::pi * i / d);
    var[i] = 0.4 + 0.8 * (i % 5) / 4.0;
  }
  auto prior = std::make_shared<GaussianPrior>(mu, var);

  Rng op_rng = make_stream(cfg.base_seed, 0xA0);
  Mat a(cfg.meas_rows, d);
  for (int r = 0; r < cfg.meas_rows; ++r) a.row(r) = gaussian_vec(d, op_rng).transpose();
  a /= std::sqrt(static_cast<double>(d));

  Rng rng = make_stream(cfg.base_seed, seed * 16 + 2);
  std::vector<Vec> truths, measurements;
  Vec x = prior->sample(rng);
  const double c0 = std::cos(cfg.drift_angle), s0 = std::sin(cfg.drift_angle);
  for (int t = 0; t < cfg.num_frames; ++t) {
    if (t > 0) {
      if (t == cfg.abrupt_frame) {
        const Vec z = gaussian_vec(d, rng);
        x = mu + cfg.abrupt_scale * (var.array().sqrt() * z.array()).matrix();
      } else {
        const Vec z = gaussian_vec(d, rng);
        x = mu + c0 * (x - mu) + s0 * (var.array().sqrt() * z.array()).matrix();
      }
    }
    truths.push_back(x);
    measurements.push_back(a * x + cfg.noise_std * gaussian_vec(cfg.meas_rows, rng));
  }

  InverseProblem tmpl;
  tmpl.model = MeasurementModel(LinearOperator::dense(a), cfg.noise_std, false);
  tmpl.prior = prior;

  GuidanceConfig guidance;
  guidance.zeta = cfg.zeta > 0.0 ? cfg.zeta : 1.0 / (2.0 * cfg.noise_std * cfg.noise_std);

  SequentialExpRow row;
  row.seed = seed;
  row.full_steps_per_frame = cfg.steps;

  // full-trajectory baseline, fresh start every frame
  double nmse_full = 0.0;
  for (int t = 1; t < cfg.num_frames; ++t) {
    InverseProblem p = tmpl;
    p.y = measurements[t];
    TrajectoryConfig traj;
    traj.num_steps = cfg.steps;
    traj.seed = splitmix64(cfg.base_seed ^ (seed * 977 + t));
    const PosteriorEnsemble ens = dps_sample(p, guidance, traj, cfg.num_chains, schedule);
    nmse_full += nmse(ens.mean(), truths[t]);
  }
  row.nmse_full = nmse_full / (cfg.num_frames - 1);

  // warm-started pipeline
  SequentialOptions opt;
  opt.tau_prime = cfg.tau_prime * schedule.horizon();
  TrajectoryConfig traj;
  traj.num_steps = cfg.steps;
  traj.seed = splitmix64(cfg.base_seed ^ (seed * 977));
  const SequentialResult seq =
      sequential_pipeline(measurements, tmpl, opt, guidance, traj, cfg.num_chains, schedule);
  double nmse_warm = 0.0;
  for (int t = 1; t < cfg.num_frames; ++t)
    nmse_warm += nmse(seq.ensembles[t].mean(), truths[t]);
  row.nmse_warm = nmse_warm / (cfg.num_frames - 1);
  row.warm_steps_per_frame = seq.frames[1].steps_used;
  row.fallback_count = seq.fallback_count;
  return row;
}

// ---------------------------------------------------------------------------
// adasense on a conjugate ground truth

AdasenseGaussianResult run_adasense_gaussian_sequential(const AdasenseGaussianConfig& cfg,
                                                        const Vec& prior_mean,
                                                        const Mat& prior_cov) {
  Rng rng = make_stream(cfg.seed, 0xADA);
  GaussianConjugate state = GaussianConjugate::from_prior(prior_mean, prior_cov);
  const Vec x_true = state.sample(rng);

  AdasenseGaussianResult result;
  for (int t = 0; t < cfg.budget; ++t) {
    PosteriorEnsemble ens;
    ens.samples.resize(prior_mean.size(), cfg.ensemble_size);
    for (int c = 0; c < cfg.ensemble_size; ++c) ens.samples.col(c) = state.sample(rng);
    const std::vector<Vec> new_rows = adasense_free(ens, 1, result.rows);
    const Vec& row = new_rows[0];
    std::normal_distribution<double> normal(0.0, 1.0);
    const double y = row.dot(x_true) + cfg.noise_std * normal(rng);
    Mat r(1, prior_mean.size());
    r.row(0) = row.transpose();
    state = state.condition(r, Vec::Constant(1, y), cfg.noise_std);
    result.rows.push_back(row);
    result.achieved_mse.push_back(state.trace());
  }
  return result;
}

}  // namespace sbd
