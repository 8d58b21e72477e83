#include "difflab/forward.hpp"

#include <cmath>
#include <stdexcept>

namespace difflab {

Vec forward_step(std::span<const double> x_prev, int t, const Schedule& sched, Rng& rng) {
    const double a = std::sqrt(sched.alpha(t));
    const double s = std::sqrt(sched.beta(t));
    Vec out(x_prev.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x_prev[i] + s * rng.normal();
    return out;
}

Vec forward_step(std::span<const double> x_prev, int t, const Schedule& sched, Seed seed) {
    Rng rng(seed);
    return forward_step(x_prev, t, sched, rng);
}

Gaussian marginal(std::span<const double> x0, int t, const Schedule& sched) {
    const double ab = sched.alpha_bar(t);
    const double a = std::sqrt(ab);
    Vec mean(x0.size());
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] = a * x0[i];
    return Gaussian::isotropic(std::move(mean), 1.0 - ab);
}

NoisedSample sample_noised(std::span<const double> x0, int t, const Schedule& sched, Rng& rng) {
    const double a = std::sqrt(sched.alpha_bar(t));
    const double s = std::sqrt(1.0 - sched.alpha_bar(t));
    NoisedSample ns;
    ns.t = t;
    ns.x0.assign(x0.begin(), x0.end());
    ns.eps = rng.normal_vec(x0.size());
    ns.x_t.resize(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) ns.x_t[i] = a * x0[i] + s * ns.eps[i];
    return ns;
}

NoisedSample sample_noised(std::span<const double> x0, int t, const Schedule& sched, Seed seed) {
    Rng rng(seed);
    return sample_noised(x0, t, sched, rng);
}

PosteriorParams posterior(std::span<const double> x_t, std::span<const double> x0, int t,
                          const Schedule& sched) {
    if (x_t.size() != x0.size()) throw std::invalid_argument("posterior: dimension mismatch");
    const double ab_prev = sched.alpha_bar(t - 1);
    const double one_m_ab = sched.one_minus_alpha_bar(t);
    const double c_xt = std::sqrt(sched.alpha(t)) * (1.0 - ab_prev) / one_m_ab;
    const double c_x0 = std::sqrt(ab_prev) * sched.beta(t) / one_m_ab;
    PosteriorParams pp;
    pp.var = sched.tilde_beta(t);
    pp.mean.resize(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) pp.mean[i] = c_xt * x_t[i] + c_x0 * x0[i];
    return pp;
}

Vec posterior_mean_eps_form(std::span<const double> x_t, std::span<const double> eps, int t,
                            const Schedule& sched) {
    if (x_t.size() != eps.size())
        throw std::invalid_argument("posterior_mean_eps_form: dimension mismatch");
    const double inv_sqrt_a = 1.0 / std::sqrt(sched.alpha(t));
    const double c = sched.beta(t) / std::sqrt(sched.one_minus_alpha_bar(t));
    Vec mean(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) mean[i] = inv_sqrt_a * (x_t[i] - c * eps[i]);
    return mean;
}

}  // namespace difflab
