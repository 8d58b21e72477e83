#pragma once

#include <span>

#include "difflab/gaussian.hpp"
#include "difflab/linalg.hpp"
#include "difflab/rng.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

/// One reparameterised draw from q(x_t | x_0) together with everything
/// needed to reconstruct it: x_t = sqrt(ab_t) x0 + sqrt(1-ab_t) eps.
struct NoisedSample {
    Vec x_t;
    int t = 0;
    Vec eps;
    Vec x0;
};

/// Parameters of the exact reverse posterior q(x_{t-1} | x_t, x_0):
/// isotropic with variance tilde_beta_t.
struct PosteriorParams {
    Vec mean;
    double var = 0.0;
};

/// Single forward kernel draw: sqrt(alpha_t) x_prev + sqrt(beta_t) z.
Vec forward_step(std::span<const double> x_prev, int t, const Schedule& sched, Seed seed);
Vec forward_step(std::span<const double> x_prev, int t, const Schedule& sched, Rng& rng);

/// Closed-form marginal q(x_t | x_0) = N(sqrt(ab_t) x0, (1-ab_t) I).
/// t = 0 returns the degenerate point mass at x0.
Gaussian marginal(std::span<const double> x0, int t, const Schedule& sched);

NoisedSample sample_noised(std::span<const double> x0, int t, const Schedule& sched, Seed seed);
NoisedSample sample_noised(std::span<const double> x0, int t, const Schedule& sched, Rng& rng);

/// Exact posterior in x0-form. At t = 1 collapses to mean = x0, var = 0.
PosteriorParams posterior(std::span<const double> x_t, std::span<const double> x0, int t,
                          const Schedule& sched);

/// Posterior mean in the eps-form: (x_t - beta_t/sqrt(1-ab_t) eps) / sqrt(alpha_t).
Vec posterior_mean_eps_form(std::span<const double> x_t, std::span<const double> eps, int t,
                            const Schedule& sched);

}  // namespace difflab
