#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "difflab/linalg.hpp"
#include "difflab/mixture.hpp"
#include "difflab/predictor.hpp"
#include "difflab/rng.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

/// How path endpoints are drawn: independently (data x noise) or with the
/// terminal point set equal to the data point (zero-target sanity case).
enum class Coupling { Independent, Degenerate };

/// Two-scale interpolation state = m(t) x0 + n(t) xT on the unit interval.
/// Linear clock: m = 1-t, n = t (the straight-line path). VP clock:
/// m = sqrt(alpha_bar(t)), n = sqrt(1 - alpha_bar(t)) through the schedule
/// bridge, i.e. rho(t) = sqrt(1 - alpha_bar(t)).
class Interpolant {
public:
    enum class Kind { Linear, Vp };

    static Interpolant linear();
    static Interpolant vp(std::shared_ptr<const ScheduleBridge> bridge);

    [[nodiscard]] Kind kind() const { return kind_; }

    [[nodiscard]] double rho(double t) const;        // noise scale n(t)
    [[nodiscard]] double rho_dot(double t) const;
    [[nodiscard]] double mean_scale(double t) const; // m(t)
    [[nodiscard]] double mean_scale_dot(double t) const;

    /// Time-only factor kappa(t) = -m'(t)/m(t); equals rho_dot/(1-rho) on
    /// the linear clock and beta(t)/2 on the VP clock.
    [[nodiscard]] double kappa(double t) const;

    /// Mixture noise level matching this clock: (m(t), n(t)^2).
    [[nodiscard]] NoiseLevel noise_level(double t) const;

private:
    explicit Interpolant(Kind k) : kind_(k) {}
    void check_t(double t) const;

    Kind kind_;
    std::shared_ptr<const ScheduleBridge> bridge_;
};

/// Endpoints, interpolated state and per-path velocity at one time.
struct PathSample {
    Vec x0;
    Vec xT;
    double t = 0.0;
    Vec z;  // m(t) x0 + n(t) xT
    Vec u;  // m'(t) x0 + n'(t) xT
};

PathSample sample_path(const GaussianMixture& data, const Interpolant& interp, double t, Rng& rng,
                       Coupling coupling = Coupling::Independent);

/// Conditional-expectation (marginal) velocity u_t(x) = E[d/dt state | state = x],
/// assembled from the mixture score at the interpolant's noise level:
///   u = (m'/m) x + ((m'/m) n^2 - n' n) score(x).
/// Singular as m(t) -> 0 (rho -> 1 on the linear clock).
Vec marginal_velocity(const GaussianMixture& data, const Interpolant& interp, double t,
                      std::span<const double> x);

/// Rectified velocity -(x + n(t) score(x)) = -(x - E[eps | x]); no singular factor.
Vec rectified_velocity(const GaussianMixture& data, const Interpolant& interp, double t,
                       std::span<const double> x);

/// Rectified velocity from a predictor at a discrete step: -(x - eps_hat).
Vec rectified_velocity(const Predictor& pred, int t, std::span<const double> x,
                       std::optional<int> cond = std::nullopt);

/// Cumulative clock s(t) = int_0^t kappa and its inverse, tabulated on a grid.
class TimeChange {
public:
    TimeChange(std::vector<double> t_grid, std::vector<double> s_grid);

    [[nodiscard]] const std::vector<double>& t_grid() const { return t_; }
    [[nodiscard]] const std::vector<double>& s_grid() const { return s_; }
    [[nodiscard]] double s_of_t(double t) const;
    [[nodiscard]] double t_of_s(double s) const;

private:
    std::vector<double> t_;
    std::vector<double> s_;
};

/// Composite-trapezoid quadrature of kappa over the grid; each grid cell is
/// refined into panels of width at most max_panel. kappa must be positive
/// at every quadrature node.
TimeChange time_change(const std::function<double(double)>& kappa,
                       std::span<const double> t_grid, double max_panel = 2e-5);

}  // namespace difflab
