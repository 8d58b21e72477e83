#include "difflab/predictor.hpp"

#include <cmath>
#include <stdexcept>

namespace difflab {

Vec Predictor::x0_from_eps(std::span<const double> x, std::span<const double> eps, int t,
                           const Schedule& sched) {
    const double a = std::sqrt(sched.alpha_bar(t));
    const double s = std::sqrt(sched.one_minus_alpha_bar(t));
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - s * eps[i]) / a;
    return out;
}

Vec Predictor::eps_from_x0(std::span<const double> x, std::span<const double> x0, int t,
                           const Schedule& sched) {
    const double a = std::sqrt(sched.alpha_bar(t));
    const double s = std::sqrt(sched.one_minus_alpha_bar(t));
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - a * x0[i]) / s;
    return out;
}

Vec Predictor::x0_hat(std::span<const double> x, int t, std::optional<int> cond) const {
    return x0_from_eps(x, eps_hat(x, t, cond), t, schedule());
}

Vec Predictor::velocity(std::span<const double> x, int t, std::optional<int> cond) const {
    Vec e = eps_hat(x, t, cond);
    for (std::size_t i = 0; i < x.size(); ++i) e[i] = -(x[i] - e[i]);
    return e;
}

AnalyticOracle::AnalyticOracle(GaussianMixture mixture, std::shared_ptr<const Schedule> sched)
    : mixture_(std::move(mixture)), sched_(std::move(sched)) {
    for (int label : mixture_.labels())
        conditionals_.emplace_back(label, mixture_.conditioned(label));
}

Vec AnalyticOracle::eps_hat(std::span<const double> x, int t, std::optional<int> cond) const {
    if (!cond.has_value()) return mixture_.optimal_eps(t, *sched_, x);
    for (const auto& [label, sub] : conditionals_)
        if (label == *cond) return sub.optimal_eps(t, *sched_, x);
    throw std::invalid_argument("AnalyticOracle: unknown condition label");
}

}  // namespace difflab
