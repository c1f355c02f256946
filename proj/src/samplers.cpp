#include "sbd/samplers.hpp"

#include <cmath>

namespace sbd {

Vec PosteriorEnsemble::coordinate_variance() const {
  const Vec m = mean();
  Vec v = Vec::Zero(samples.rows());
  for (Eigen::Index c = 0; c < samples.cols(); ++c) {
    const Vec d = samples.col(c) - m;
    v += d.cwiseProduct(d);
  }
  return v / std::max<Eigen::Index>(1, samples.cols() - 1);
}

namespace {

double effective_zeta(const GuidanceConfig& guidance, double zeta, double residual_norm) {
  if (guidance.mode == GuidanceConfig::Mode::kResidualNormalized)
    return zeta / std::max(residual_norm, 1e-12);
  return zeta;
}

bool step_scaled(const GuidanceConfig& guidance) {
  return guidance.mode == GuidanceConfig::Mode::kStepScaled;
}

double head_attenuation(const GuidanceConfig& guidance, double alpha) {
  if (guidance.alpha_floor <= 0.0) return 1.0;
  return std::clamp(alpha / guidance.alpha_floor - 1.0, 0.0, 1.0);
}

// Clips zeta so one step's guidance displacement stays inside the trust
// region: step_scale * zeta * ||grad|| <= trust * sqrt(dim). The cap is a
// fixed scale (unit-variance states have norm ~ sqrt(dim)), so clipped
// dynamics cannot ratchet the state norm upward.
double trusted_zeta(const GuidanceConfig& guidance, double zeta, double step_scale,
                    double grad_norm, double dim_scale) {
  if (guidance.guidance_trust <= 0.0 || zeta == 0.0) return zeta;
  const double limit = guidance.guidance_trust * dim_scale;
  const double displacement = step_scale * zeta * grad_norm;
  if (displacement <= limit) return zeta;
  return zeta * limit / displacement;
}

void check_divergence(const Vec& x, double bound, int step, double tau, const char* who) {
  if (!x.allFinite() || x.norm() > bound)
    throw SamplerDivergence(std::string(who) + ": trajectory diverged at step " +
                            std::to_string(step) + ", tau=" + std::to_string(tau));
}

struct ClampStats {
  long long events = 0;
};

// Clamps companded-domain operands to +-(1 - 1e-6) before expansion.
Vec clamp_companded(Vec v, ClampStats& stats) {
  constexpr double kLimit = 1.0 - 1e-6;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] > kLimit) {
      v[i] = kLimit;
      ++stats.events;
    } else if (v[i] < -kLimit) {
      v[i] = -kLimit;
      ++stats.events;
    }
  }
  return v;
}

// Companded data-consistency gradient from precomputed Tweedie projections.
// Gradients are with respect to the projections; the caller chains through
// the prior Jacobians.
struct CompandedCore {
  Vec d_x0;  // gradient w.r.t. A x_{0|tau} (codomain side, pre-adjoint)
  Vec d_n0;  // gradient w.r.t. n_{0|tau}
  double residual_norm = 0.0;
  long long clamp_events = 0;
};

CompandedCore companded_core(const Vec& ax0, const Vec& n0, const Vec& y,
                             const CompandingParams& comp) {
  ClampStats stats;
  const Vec a = clamp_companded(ax0, stats);
  const Vec b = clamp_companded(n0, stats);
  Vec u(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    u[i] = comp.expand_scalar(a[i]) + comp.expand_scalar(b[i]);
  Vec r(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) r[i] = y[i] - comp.compand_scalar(u[i]);
  CompandedCore core;
  core.residual_norm = r.norm();
  core.clamp_events = stats.events;
  core.d_x0.resize(a.size());
  core.d_n0.resize(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double w = -2.0 * r[i] * comp.compand_deriv(u[i]);
    core.d_x0[i] = w * comp.expand_deriv(a[i]);
    core.d_n0[i] = w * comp.expand_deriv(b[i]);
  }
  return core;
}

}  // namespace

Vec dps_grad(const Vec& x_tau, double tau, const Vec& y, const MeasurementModel& model,
             const ScorePrior& prior, const NoiseSchedule& schedule) {
  if (model.companded)
    throw std::domain_error("dps_grad: companded models require the joint gradient");
  const Vec x0 = prior.denoise(x_tau, tau, schedule);
  const Vec r = y - model.op.apply(x0);
  return -2.0 * prior.denoise_vjp(x_tau, tau, schedule, model.op.adjoint(r));
}

CompandedGrad companded_dc_grad(const Vec& x_tau, const Vec& n_tau, double tau, const Vec& y,
                                const MeasurementModel& model, const ScorePrior& prior_x,
                                const ScorePrior& prior_n, const NoiseSchedule& schedule) {
  if (!model.companded) throw std::domain_error("companded_dc_grad: model is not companded");
  const Vec x0 = prior_x.denoise(x_tau, tau, schedule);
  const Vec n0 = prior_n.denoise(n_tau, tau, schedule);
  const CompandedCore core = companded_core(model.op.apply(x0), n0, y, model.companding);
  CompandedGrad out;
  out.grad_x = prior_x.denoise_vjp(x_tau, tau, schedule, model.op.adjoint(core.d_x0));
  out.grad_n = prior_n.denoise_vjp(n_tau, tau, schedule, core.d_n0);
  out.clamp_events = core.clamp_events;
  out.residual_norm = core.residual_norm;
  return out;
}

namespace detail {

PosteriorEnsemble run_dps_chains(Vec y, MeasurementModel model,
                                 const std::shared_ptr<const ScorePrior>& prior,
                                 const GuidanceConfig& guidance, const TrajectoryConfig& traj,
                                 int num_chains, const NoiseSchedule& schedule, double tau_start,
                                 int num_steps, std::optional<Mat> init_chains,
                                 std::uint64_t stream_offset, const StepHook& hook) {
  if (num_chains < 1) throw std::domain_error("run_dps_chains: need at least one chain");
  if (num_steps < 1) throw std::domain_error("run_dps_chains: need at least one step");
  const int dim = prior->dim();

  std::vector<Rng> streams;
  streams.reserve(num_chains);
  for (int c = 0; c < num_chains; ++c)
    streams.push_back(make_stream(traj.seed, stream_offset + static_cast<std::uint64_t>(c) * 4));

  Mat chains(dim, num_chains);
  if (init_chains) {
    if (init_chains->rows() != dim || init_chains->cols() != num_chains)
      throw std::domain_error("run_dps_chains: init chain shape mismatch");
    chains = *init_chains;
  } else {
    for (int c = 0; c < num_chains; ++c) chains.col(c) = sample_terminal(schedule, dim, streams[c]);
  }

  PosteriorEnsemble ensemble;
  ensemble.seed = traj.seed;
  ensemble.residual_trace.reserve(num_steps);
  const double dt = tau_start / num_steps;
  const double y_norm_floor = 1e-12;

  Mat x0s(dim, num_chains);
  Mat scores(dim, num_chains);
  double tau = tau_start;
  for (int step = 0; step < num_steps; ++step) {
    const auto [alpha, sigma] = schedule.rates(tau);
    for (int c = 0; c < num_chains; ++c) {
      scores.col(c) = prior->score(chains.col(c), tau, schedule);
      ++ensemble.nfe;
      x0s.col(c) = (chains.col(c) + sigma * sigma * scores.col(c)) / alpha;
    }
    if (hook) {
      StepContext ctx{step, tau, x0s, chains, y, model};
      hook(ctx);
    }
    const double f = schedule.drift_coeff(tau);
    const double g = schedule.diffusion_coeff(tau);
    double residual_sum = 0.0;
    for (int c = 0; c < num_chains; ++c) {
      const Vec r = y - model.op.apply(x0s.col(c));
      const double rnorm = r.norm();
      residual_sum += rnorm / std::max(y.norm(), y_norm_floor);
      const Vec grad = -2.0 * prior->denoise_vjp(chains.col(c), tau, schedule, model.op.adjoint(r));
      double zeta =
          effective_zeta(guidance, guidance.weight_x(), rnorm) * head_attenuation(guidance, alpha);
      const double step_scale = step_scaled(guidance) ? dt : g * g * dt;
      zeta = trusted_zeta(guidance, zeta, step_scale, grad.norm(), std::sqrt(double(dim)));
      const Vec total =
          step_scaled(guidance) ? Vec(scores.col(c)) : Vec(scores.col(c) - zeta * grad);
      chains.col(c) = detail::em_step(chains.col(c), total, f, g, dt, streams[c], true);
      if (step_scaled(guidance)) chains.col(c) -= (zeta * dt) * grad;
      check_divergence(chains.col(c), guidance.divergence_norm, step, tau, "dps_sample");
    }
    ensemble.residual_trace.push_back(residual_sum / num_chains);
    tau -= dt;
    if (tau > 1e-12 && traj.corrector_steps > 0) {
      const double sig_c = schedule.sigma(tau);
      const double eps = traj.corrector_step_scale * sig_c * sig_c;
      for (int k = 0; k < traj.corrector_steps; ++k) {
        for (int c = 0; c < num_chains; ++c) {
          const Vec s = prior->score(chains.col(c), tau, schedule);
          ++ensemble.nfe;
          const Vec x0 = tweedie_denoise(s, chains.col(c), tau, schedule);
          const Vec r = y - model.op.apply(x0);
          const Vec grad =
              -2.0 * prior->denoise_vjp(chains.col(c), tau, schedule, model.op.adjoint(r));
          double zeta = effective_zeta(guidance, guidance.weight_x(), r.norm()) *
                        head_attenuation(guidance, schedule.alpha(tau));
          zeta = trusted_zeta(guidance, zeta, eps, grad.norm(), std::sqrt(double(dim)));
          const Vec total = s - zeta * grad;
          chains.col(c) += eps * total + std::sqrt(2.0 * eps) * gaussian_vec(dim, streams[c]);
          check_divergence(chains.col(c), guidance.divergence_norm, step, tau, "dps_sample");
        }
      }
    }
  }
  ensemble.samples = std::move(chains);
  ensemble.tau_of_snapshot = 0.0;
  return ensemble;
}

}  // namespace detail

PosteriorEnsemble dps_sample(const InverseProblem& problem, const GuidanceConfig& guidance,
                             const TrajectoryConfig& traj, int num_chains,
                             const NoiseSchedule& schedule) {
  if (!problem.prior) throw std::domain_error("dps_sample: missing prior");
  if (problem.model.companded)
    throw std::domain_error("dps_sample: companded models require joint_separate");
  if (problem.model.op.codomain_dim() != problem.y.size())
    throw std::domain_error("dps_sample: operator/measurement shape mismatch");
  return detail::run_dps_chains(problem.y, problem.model, problem.prior, guidance, traj,
                                num_chains, schedule, schedule.horizon(), traj.num_steps,
                                std::nullopt, 0, nullptr);
}

PosteriorEnsemble joint_separate(const SeparationProblem& problem, const GuidanceConfig& guidance,
                                 const TrajectoryConfig& traj, int num_chains,
                                 const NoiseSchedule& schedule) {
  if (!problem.prior_x || !problem.prior_n)
    throw std::domain_error("joint_separate: both priors must be set");
  if (problem.model.op.codomain_dim() != problem.y.size() ||
      problem.prior_n->dim() != problem.y.size())
    throw std::domain_error("joint_separate: dimension mismatch");
  if (num_chains < 1) throw std::domain_error("joint_separate: need at least one chain");

  const int dim_x = problem.prior_x->dim();
  const int dim_n = problem.prior_n->dim();
  const Vec& y = problem.y;

  std::vector<Rng> streams_x, streams_n;
  for (int c = 0; c < num_chains; ++c) {
    streams_x.push_back(make_stream(traj.seed, static_cast<std::uint64_t>(c) * 4 + 0));
    streams_n.push_back(make_stream(traj.seed, static_cast<std::uint64_t>(c) * 4 + 1));
  }

  Mat xs(dim_x, num_chains), ns(dim_n, num_chains);
  for (int c = 0; c < num_chains; ++c) {
    xs.col(c) = sample_terminal(schedule, dim_x, streams_x[c]);
    ns.col(c) = sample_terminal(schedule, dim_n, streams_n[c]);
  }

  PosteriorEnsemble ensemble;
  ensemble.seed = traj.seed;
  const int num_steps = traj.num_steps;
  const double dt = schedule.horizon() / num_steps;
  double tau = schedule.horizon();

  for (int step = 0; step < num_steps; ++step) {
    const auto [alpha, sigma] = schedule.rates(tau);
    const double f = schedule.drift_coeff(tau);
    const double g = schedule.diffusion_coeff(tau);
    double residual_sum = 0.0;
    for (int c = 0; c < num_chains; ++c) {
      // same-snapshot evaluation for both variables, then a joint update
      const Vec sx = problem.prior_x->score(xs.col(c), tau, schedule);
      const Vec sn = problem.prior_n->score(ns.col(c), tau, schedule);
      ensemble.nfe += 2;
      const Vec x0 = (xs.col(c) + sigma * sigma * sx) / alpha;
      const Vec n0 = (ns.col(c) + sigma * sigma * sn) / alpha;

      Vec grad_x, grad_n;
      double rnorm = 0.0;
      if (problem.model.companded) {
        const CompandedCore core =
            companded_core(problem.model.op.apply(x0), n0, y, problem.model.companding);
        grad_x = problem.prior_x->denoise_vjp(xs.col(c), tau, schedule,
                                              problem.model.op.adjoint(core.d_x0));
        grad_n = problem.prior_n->denoise_vjp(ns.col(c), tau, schedule, core.d_n0);
        rnorm = core.residual_norm;
        ensemble.clamp_events += core.clamp_events;
      } else {
        const Vec r = y - problem.model.op.apply(x0) - n0;
        rnorm = r.norm();
        grad_x = -2.0 * problem.prior_x->denoise_vjp(xs.col(c), tau, schedule,
                                                     problem.model.op.adjoint(r));
        grad_n = -2.0 * problem.prior_n->denoise_vjp(ns.col(c), tau, schedule, r);
      }
      residual_sum += rnorm / std::max(y.norm(), 1e-12);

      const double atten = head_attenuation(guidance, alpha);
      double zx = atten * effective_zeta(guidance, guidance.weight_x(), rnorm);
      double zn = atten * effective_zeta(guidance, guidance.weight_n(), rnorm);
      const double step_scale = step_scaled(guidance) ? dt : g * g * dt;
      zx = trusted_zeta(guidance, zx, step_scale, grad_x.norm(), std::sqrt(double(dim_x)));
      zn = trusted_zeta(guidance, zn, step_scale, grad_n.norm(), std::sqrt(double(dim_n)));
      const Vec total_x = step_scaled(guidance) ? sx : Vec(sx - zx * grad_x);
      const Vec total_n = step_scaled(guidance) ? sn : Vec(sn - zn * grad_n);
      xs.col(c) = detail::em_step(xs.col(c), total_x, f, g, dt, streams_x[c], true);
      ns.col(c) = detail::em_step(ns.col(c), total_n, f, g, dt, streams_n[c], true);
      if (step_scaled(guidance)) {
        xs.col(c) -= (zx * dt) * grad_x;
        ns.col(c) -= (zn * dt) * grad_n;
      }
      check_divergence(xs.col(c), guidance.divergence_norm, step, tau, "joint_separate(x)");
      check_divergence(ns.col(c), guidance.divergence_norm, step, tau, "joint_separate(n)");
    }
    ensemble.residual_trace.push_back(residual_sum / num_chains);
    tau -= dt;
  }
  ensemble.samples = std::move(xs);
  ensemble.noise_samples = std::move(ns);
  ensemble.tau_of_snapshot = 0.0;
  return ensemble;
}

SequentialResult sequential_pipeline(const std::vector<Vec>& frames, const InverseProblem& tmpl,
                                     const SequentialOptions& options,
                                     const GuidanceConfig& guidance, const TrajectoryConfig& traj,
                                     int num_chains, const NoiseSchedule& schedule) {
  if (frames.empty()) throw std::domain_error("sequential_pipeline: no frames");
  const double tau_prime = options.tau_prime;
  if (!(tau_prime > 0.0 && tau_prime <= schedule.horizon()))
    throw std::domain_error("sequential_pipeline: tau_prime outside (0, horizon]");

  SequentialResult result;
  const int dim = tmpl.prior->dim();
  for (size_t t = 0; t < frames.size(); ++t) {
    InverseProblem prob = tmpl;
    prob.y = frames[t];
    const std::uint64_t frame_offset = static_cast<std::uint64_t>(t) << 32;
    SequentialFrameInfo info;
    PosteriorEnsemble ens;
    if (t == 0) {
      ens = detail::run_dps_chains(prob.y, prob.model, prob.prior, guidance, traj, num_chains,
                                   schedule, schedule.horizon(), traj.num_steps, std::nullopt, 0,
                                   nullptr);
      info.steps_used = traj.num_steps;
    } else {
      Vec x_pred = result.ensembles[t - 1].mean();
      if (options.transition_history >= 2 && t >= 2)
        x_pred = 2.0 * result.ensembles[t - 1].mean() - result.ensembles[t - 2].mean();
      const int warm_steps = std::max(
          1, static_cast<int>(std::llround(traj.num_steps * tau_prime / schedule.horizon())));
      Mat init(dim, num_chains);
      for (int c = 0; c < num_chains; ++c) {
        Rng rng = make_stream(traj.seed, frame_offset + static_cast<std::uint64_t>(c) * 4 + 3);
        init.col(c) = warm_start(x_pred, tau_prime, schedule, rng).x;
      }
      ens = detail::run_dps_chains(prob.y, prob.model, prob.prior, guidance, traj, num_chains,
                                   schedule, tau_prime, warm_steps, init, frame_offset, nullptr);
      info.steps_used = warm_steps;

      const Vec r = prob.y - prob.model.op.apply(ens.mean());
      info.relative_residual = r.norm() / std::max(prob.y.norm(), 1e-12);
      if (info.relative_residual > options.fallback_residual) {
        info.fallback = true;
        ++result.fallback_count;
        ens = detail::run_dps_chains(prob.y, prob.model, prob.prior, guidance, traj, num_chains,
                                     schedule, schedule.horizon(), traj.num_steps, std::nullopt,
                                     frame_offset + 2, nullptr);
        info.steps_used += traj.num_steps;
      }
    }
    const Vec r = prob.y - prob.model.op.apply(ens.mean());
    info.relative_residual = r.norm() / std::max(prob.y.norm(), 1e-12);
    result.ensembles.push_back(std::move(ens));
    result.frames.push_back(info);
  }
  return result;
}

}  // namespace sbd
