#pragma once

#include <optional>
#include <span>
#include <vector>

#include "difflab/linalg.hpp"
#include "difflab/rng.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

struct MixtureComponent {
    double weight = 1.0;
    Vec mean;
    double var = 1.0;  // isotropic per component
    int label = 0;
};

/// Noise level at which mixture quantities are evaluated: the state is
/// mean_scale * X0 + sqrt(noise_var) * eps. The discrete VP chain uses
/// (sqrt(ab_t), 1 - ab_t); the flow module supplies its own clocks.
struct NoiseLevel {
    double mean_scale = 1.0;
    double noise_var = 0.0;

    static NoiseLevel at(const Schedule& s, int t) {
        const double ab = s.alpha_bar(t);
        return {std::sqrt(ab), 1.0 - ab};
    }
};

/// Isotropic Gaussian mixture with integer class labels: the closed-form
/// data model. Marginals under VP noising stay mixtures, so scores,
/// optimal predictors and label posteriors are all exact.
class GaussianMixture {
public:
    explicit GaussianMixture(std::vector<MixtureComponent> comps);

    [[nodiscard]] std::size_t dim() const { return dim_; }
    [[nodiscard]] const std::vector<MixtureComponent>& components() const { return comps_; }
    [[nodiscard]] std::vector<int> labels() const;

    /// Test fixtures used throughout the suite.
    static GaussianMixture standard_normal(std::size_t dim);
    /// Two components at (+-2, 0), var 0.25, equal weights, labels {0, 1}.
    static GaussianMixture two_modes();
    /// n equally spaced components on a circle; var 0.09, radius 4 by default.
    static GaussianMixture ring(int n = 8, double radius = 4.0, double var = 0.09);

    /// Sub-mixture of the components with the given label, weights renormalised.
    [[nodiscard]] GaussianMixture conditioned(int label) const;

    /// Component-wise pushforward under x -> a*x + sqrt(s2)*eps.
    [[nodiscard]] GaussianMixture noised(NoiseLevel lv) const;
    /// Discrete-time marginal: t = 0 returns the mixture unchanged.
    [[nodiscard]] GaussianMixture marginal_at(int t, const Schedule& sched) const;

    [[nodiscard]] Vec draw(Rng& rng) const;
    [[nodiscard]] std::pair<Vec, int> draw_labeled(Rng& rng) const;
    [[nodiscard]] std::vector<Vec> draw_n(Seed seed, std::size_t n) const;

    /// Exact mean and covariance-matrix entries of the mixture.
    [[nodiscard]] Vec moments_mean() const;
    [[nodiscard]] Mat moments_cov() const;

    /// Index of the component whose mean is nearest to x.
    [[nodiscard]] int nearest_component(std::span<const double> x) const;

    // --- log-domain evaluations at a noise level ---
    [[nodiscard]] double log_pt(NoiseLevel lv, std::span<const double> x) const;
    [[nodiscard]] Vec score(NoiseLevel lv, std::span<const double> x) const;
    /// E[eps | state = x] = -sqrt(s2) * score; requires s2 > 0.
    [[nodiscard]] Vec optimal_eps(NoiseLevel lv, std::span<const double> x) const;
    /// E[X0 | state = x] = (x + s2 * score) / a.
    [[nodiscard]] Vec optimal_x0(NoiseLevel lv, std::span<const double> x) const;

    // --- discrete-time wrappers ---
    [[nodiscard]] double log_pt(int t, const Schedule& s, std::span<const double> x) const;
    [[nodiscard]] Vec score(int t, const Schedule& s, std::span<const double> x) const;
    [[nodiscard]] Vec optimal_eps(int t, const Schedule& s, std::span<const double> x) const;
    [[nodiscard]] Vec optimal_x0(int t, const Schedule& s, std::span<const double> x) const;

    struct ClassPosterior {
        std::vector<int> labels;
        Vec probs;               // same order as labels
        [[nodiscard]] double prob_of(int label) const;
    };
    /// Exact Bayes posterior over labels at the given noise level.
    [[nodiscard]] ClassPosterior class_posterior(NoiseLevel lv, std::span<const double> x) const;
    [[nodiscard]] ClassPosterior class_posterior(int t, const Schedule& s,
                                                 std::span<const double> x) const;
    /// Gradient of log p(y | x) at the given noise level.
    [[nodiscard]] Vec class_log_posterior_grad(NoiseLevel lv, int label,
                                               std::span<const double> x) const;
    [[nodiscard]] Vec class_log_posterior_grad(int t, const Schedule& s, int label,
                                               std::span<const double> x) const;

private:
    struct Responsibilities;
    Responsibilities resp(NoiseLevel lv, std::span<const double> x) const;

    std::vector<MixtureComponent> comps_;
    std::size_t dim_ = 0;
};

}  // namespace difflab
