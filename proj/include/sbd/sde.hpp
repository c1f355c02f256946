#pragma once

#include <functional>

#include "sbd/common.hpp"
#include "sbd/schedule.hpp"

namespace sbd {

struct DiffusionState {
  Vec x;
  double tau = 0.0;
};

struct TrajectoryConfig {
  int num_steps = 200;
  int corrector_steps = 0;
  double corrector_step_scale = 0.1;
  std::uint64_t seed = 0;
};

/// Score field evaluated during reverse integration: (x, tau) -> score.
using ScoreFn = std::function<Vec(const Vec&, double)>;

/// Forward perturbation x_tau = alpha_tau x0 + sigma_tau z, z ~ N(0, I).
/// Complex signals pass through in stacked [Re; Im] form, which injects
/// independent unit-variance noise per real component.
Vec perturb(const Vec& x0, double tau, const NoiseSchedule& schedule, Rng& rng);

namespace detail {
/// One Euler-Maruyama step of the reverse SDE with explicit coefficients:
/// x <- x - [f x - g^2 score] dt + g sqrt(dt) xi.
Vec em_step(const Vec& x, const Vec& score, double f, double g, double dt, Rng& rng,
            bool inject_noise);
}  // namespace detail

/// Predictor-only reverse step; score must be evaluated at state.tau.
DiffusionState reverse_step(const DiffusionState& state, const Vec& score,
                            const NoiseSchedule& schedule, double dt, Rng& rng);

/// Predictor step followed by config.corrector_steps annealed-Langevin sweeps
/// at the new tau (step size corrector_step_scale * sigma_tau^2). Correctors
/// need to re-evaluate the score, hence the callable form.
DiffusionState reverse_step(const DiffusionState& state, const ScoreFn& score_fn,
                            const NoiseSchedule& schedule, double dt,
                            const TrajectoryConfig& config, Rng& rng);

/// Shortened-trajectory initialization: x ~ N(alpha_{tau'} x_est, sigma_{tau'}^2 I).
DiffusionState warm_start(const Vec& x_prev_estimate, double tau_prime,
                          const NoiseSchedule& schedule, Rng& rng);

/// Fresh trajectory start: N(0, I) for variance preserving, N(0, sigma_T^2 I)
/// for variance exploding.
Vec sample_terminal(const NoiseSchedule& schedule, int dim, Rng& rng);

/// Integrates the reverse dynamics from tau_start down to 0 on a uniform grid
/// of config.num_steps steps. With inject_noise = false the deterministic
/// probability-flow ODE (drift with g^2/2) is integrated instead.
Vec integrate_reverse(Vec x_init, double tau_start, const ScoreFn& score_fn,
                      const NoiseSchedule& schedule, const TrajectoryConfig& config, Rng& rng,
                      bool inject_noise = true);

}  // namespace sbd
