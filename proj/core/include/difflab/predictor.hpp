#pragma once

#include <memory>
#include <optional>
#include <span>

#include "difflab/linalg.hpp"
#include "difflab/mixture.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

/// Uniform denoiser interface. Implementations supply eps_hat; the x0 and
/// velocity views are derived through the fixed linear identities
///   x0_hat = (x - sqrt(1-ab_t) eps_hat) / sqrt(ab_t)
///   velocity = -(x - eps_hat)            (rectified form)
class Predictor {
public:
    virtual ~Predictor() = default;

    [[nodiscard]] virtual Vec eps_hat(std::span<const double> x, int t,
                                      std::optional<int> cond = std::nullopt) const = 0;
    [[nodiscard]] virtual std::size_t dim() const = 0;
    [[nodiscard]] virtual const Schedule& schedule() const = 0;

    [[nodiscard]] Vec x0_hat(std::span<const double> x, int t,
                             std::optional<int> cond = std::nullopt) const;
    [[nodiscard]] Vec velocity(std::span<const double> x, int t,
                               std::optional<int> cond = std::nullopt) const;

    /// x0 view from an already-computed eps_hat (shared by all implementations).
    static Vec x0_from_eps(std::span<const double> x, std::span<const double> eps, int t,
                           const Schedule& sched);
    static Vec eps_from_x0(std::span<const double> x, std::span<const double> x0, int t,
                           const Schedule& sched);
};

/// Exact Bayes predictor backed by the analytic mixture. Conditioning on a
/// label evaluates the label's sub-mixture, so conditional predictions are
/// exact as well.
class AnalyticOracle final : public Predictor {
public:
    AnalyticOracle(GaussianMixture mixture, std::shared_ptr<const Schedule> sched);

    [[nodiscard]] Vec eps_hat(std::span<const double> x, int t,
                              std::optional<int> cond = std::nullopt) const override;
    [[nodiscard]] std::size_t dim() const override { return mixture_.dim(); }
    [[nodiscard]] const Schedule& schedule() const override { return *sched_; }

    [[nodiscard]] const GaussianMixture& mixture() const { return mixture_; }

private:
    GaussianMixture mixture_;
    std::vector<std::pair<int, GaussianMixture>> conditionals_;
    std::shared_ptr<const Schedule> sched_;
};

/// Predictor with eps_hat frozen to a constant vector; used by the
/// characteristic-line and sampler-identity checks.
class FrozenPredictor final : public Predictor {
public:
    FrozenPredictor(Vec eps, std::shared_ptr<const Schedule> sched)
        : eps_(std::move(eps)), sched_(std::move(sched)) {}

    [[nodiscard]] Vec eps_hat(std::span<const double>, int, std::optional<int>) const override {
        return eps_;
    }
    [[nodiscard]] std::size_t dim() const override { return eps_.size(); }
    [[nodiscard]] const Schedule& schedule() const override { return *sched_; }

private:
    Vec eps_;
    std::shared_ptr<const Schedule> sched_;
};

}  // namespace difflab
