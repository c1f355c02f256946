#include "sbd/sde.hpp"

#include <cmath>

namespace sbd {

Vec perturb(const Vec& x0, double tau, const NoiseSchedule& schedule, Rng& rng) {
  require_finite(x0, "perturb: x0");
  const auto [a, s] = schedule.rates(tau);
  if (s == 0.0) return a * x0;
  return a * x0 + s * gaussian_vec(static_cast<int>(x0.size()), rng);
}

namespace detail {

Vec em_step(const Vec& x, const Vec& score, double f, double g, double dt, Rng& rng,
            bool inject_noise) {
  Vec next = x - (f * x - g * g * score) * dt;
  if (inject_noise && g != 0.0)
    next += g * std::sqrt(dt) * gaussian_vec(static_cast<int>(x.size()), rng);
  return next;
}

}  // namespace detail

DiffusionState reverse_step(const DiffusionState& state, const Vec& score,
                            const NoiseSchedule& schedule, double dt, Rng& rng) {
  if (dt <= 0.0) throw std::domain_error("reverse_step: dt must be positive");
  if (score.size() != state.x.size()) throw std::domain_error("reverse_step: score length mismatch");
  if (!score.allFinite())
    throw NumericError("reverse_step: non-finite score at tau=" + std::to_string(state.tau));
  DiffusionState next;
  next.x = detail::em_step(state.x, score, schedule.drift_coeff(state.tau),
                           schedule.diffusion_coeff(state.tau), dt, rng, true);
  next.tau = state.tau - dt;
  return next;
}

DiffusionState reverse_step(const DiffusionState& state, const ScoreFn& score_fn,
                            const NoiseSchedule& schedule, double dt,
                            const TrajectoryConfig& config, Rng& rng) {
  DiffusionState next = reverse_step(state, score_fn(state.x, state.tau), schedule, dt, rng);
  if (next.tau > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sig = schedule.sigma(next.tau);
    const double eps = config.corrector_step_scale * sig * sig;
    for (int c = 0; c < config.corrector_steps; ++c) {
      const Vec s = score_fn(next.x, next.tau);
      if (!s.allFinite())
        throw NumericError("reverse_step: non-finite corrector score at tau=" +
                           std::to_string(next.tau));
      next.x += eps * s + std::sqrt(2.0 * eps) * gaussian_vec(static_cast<int>(next.x.size()), rng);
    }
  }
  return next;
}

DiffusionState warm_start(const Vec& x_prev_estimate, double tau_prime,
                          const NoiseSchedule& schedule, Rng& rng) {
  if (!(tau_prime > 0.0 && tau_prime <= schedule.horizon()))
    throw std::domain_error("warm_start: tau_prime outside (0, horizon]");
  DiffusionState state;
  state.x = perturb(x_prev_estimate, tau_prime, schedule, rng);
  state.tau = tau_prime;
  return state;
}

Vec sample_terminal(const NoiseSchedule& schedule, int dim, Rng& rng) {
  return schedule.terminal_std() * gaussian_vec(dim, rng);
}

Vec integrate_reverse(Vec x_init, double tau_start, const ScoreFn& score_fn,
                      const NoiseSchedule& schedule, const TrajectoryConfig& config, Rng& rng,
                      bool inject_noise) {
  if (config.num_steps < 1) throw std::domain_error("integrate_reverse: num_steps must be >= 1");
  const double dt = tau_start / config.num_steps;
  DiffusionState state{std::move(x_init), tau_start};
  for (int k = 0; k < config.num_steps; ++k) {
    const Vec score = score_fn(state.x, state.tau);
    if (!score.allFinite())
      throw NumericError("integrate_reverse: non-finite score at step " + std::to_string(k));
    const double g = schedule.diffusion_coeff(state.tau);
    const double gsq_scale = inject_noise ? 1.0 : 0.5;  // probability flow when deterministic
    Vec drift_score = score * (gsq_scale * g * g);
    state.x -= (schedule.drift_coeff(state.tau) * state.x - drift_score) * dt;
    if (inject_noise && g != 0.0)
      state.x += g * std::sqrt(dt) * gaussian_vec(static_cast<int>(state.x.size()), rng);
    state.tau -= dt;
    if (inject_noise && state.tau > 0.0 && config.corrector_steps > 0) {
      const double sig = schedule.sigma(state.tau);
      const double eps = config.corrector_step_scale * sig * sig;
      for (int c = 0; c < config.corrector_steps; ++c) {
        const Vec s = score_fn(state.x, state.tau);
        state.x += eps * s + std::sqrt(2.0 * eps) * gaussian_vec(static_cast<int>(state.x.size()), rng);
      }
    }
  }
  return state.x;
}

}  // namespace sbd
