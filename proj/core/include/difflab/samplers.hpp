#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "difflab/linalg.hpp"
#include "difflab/mixture.hpp"
#include "difflab/predictor.hpp"
#include "difflab/rng.hpp"
#include "difflab/schedule.hpp"

namespace difflab {

/// Flat row-major batch of states: n vectors of dimension d.
struct Batch {
    int n = 0;
    int d = 0;
    std::vector<double> a;

    Batch() = default;
    Batch(int n_, int d_) : n(n_), d(d_), a(static_cast<std::size_t>(n_) * d_, 0.0) {}

    [[nodiscard]] std::span<double> row(int i) {
        return {a.data() + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)};
    }
    [[nodiscard]] std::span<const double> row(int i) const {
        return {a.data() + static_cast<std::size_t>(i) * d, static_cast<std::size_t>(d)};
    }
    [[nodiscard]] Vec row_vec(int i) const {
        auto r = row(i);
        return {r.begin(), r.end()};
    }
};

enum class SamplerKind { Ddpm, Ddim, PfOde, RectifiedOde };
enum class Stepper { Euler, Heun };

/// Per-step variance policy for the DDIM family. Eta scales the exact
/// posterior width: sigma_t = eta * sqrt(tilde_beta); eta = 1 is DDPM,
/// eta = 0 the deterministic sampler.
struct SigmaMode {
    enum class Kind { TildeBeta, Zero, Scaled };
    Kind kind = Kind::TildeBeta;
    double eta = 1.0;

    static SigmaMode tilde_beta() { return {Kind::TildeBeta, 1.0}; }
    static SigmaMode zero() { return {Kind::Zero, 0.0}; }
    static SigmaMode scaled(double eta) { return {Kind::Scaled, eta}; }

    [[nodiscard]] double sigma2(const Schedule& s, int t_from, int t_to) const;
    [[nodiscard]] bool deterministic() const { return kind == Kind::Zero || eta == 0.0; }
};

struct SamplerConfig {
    SamplerKind kind = SamplerKind::Ddpm;
    std::vector<int> grid;      // discrete kinds; empty -> full grid
    int ode_steps = 256;        // ODE kinds
    SigmaMode sigma = SigmaMode::tilde_beta();
    Stepper stepper = Stepper::Heun;
    std::uint64_t seed = 0;
    std::optional<int> cond;    // label passed to the predictor
    int threads = 0;            // 0 -> hardware concurrency
    int record_every = 1;       // thin recorded grid times (first/last always kept)
    bool clip_x0 = false;       // optional x0_hat clamp inside ddim steps
    double clip_box = 3.0;
};

struct StepDiag {
    double t_from = 0.0;
    double t_to = 0.0;
    double mean_shift_norm = 0.0;  // average ||x_next - x|| over chains
    double mean_eps_norm = 0.0;    // average ||eps_hat|| over chains
};

/// Seeded trajectory record shared by every sampler kind; states are stored
/// for each recorded grid time, batch size constant across times.
struct SamplerRun {
    std::vector<double> times;   // recorded grid times, decreasing, last = 0
    std::vector<Batch> states;   // one batch per recorded time
    std::vector<StepDiag> diagnostics;

    [[nodiscard]] const Batch& terminal() const { return states.back(); }
};

/// Extra reverse-mean shift hook (classifier guidance): called with the
/// current state, the step time and the step variance actually used.
using MeanShiftFn =
    std::function<Vec(std::span<const double> x, int t, double sigma2, std::optional<int> cond)>;

/// Score field over the continuous clock t in [0, 1].
using ScoreFn = std::function<Vec(std::span<const double> x, double t)>;

/// One ancestral DDPM step with sigma_t^2 = tilde_beta_t; adds no noise at t = 1.
Vec ddpm_step(std::span<const double> x_t, int t, const Predictor& pred, const Schedule& sched,
              Rng& rng, std::optional<int> cond = std::nullopt);

/// One DDIM-family step t_from -> t_to with per-step variance sigma2.
/// Requires sigma2 <= 1 - alpha_bar(t_to).
Vec ddim_step(std::span<const double> x_t, int t_from, int t_to, const Predictor& pred,
              const Schedule& sched, double sigma2, Rng& rng,
              std::optional<int> cond = std::nullopt);

/// Endpoint of the straight-line characteristic through (x, t_from) defined by
/// a frozen eps estimate: sqrt(ab_to) x0_hat + sqrt(1-ab_to) eps. This is the
/// exact one-step rectified-flow integration with piecewise-constant control.
Vec characteristic_jump(std::span<const double> x, int t_from, int t_to,
                        std::span<const double> eps, const Schedule& sched);

/// VP probability-flow velocity -beta(t)/2 (x + score).
Vec pf_ode_velocity(std::span<const double> x, double t, const ScoreFn& score,
                    const ScheduleBridge& bridge);

/// Score fields for the PF-ODE: exact mixture score, or predictor-backed via
/// score = -eps_hat / sqrt(1-ab) with t quantised to the discrete grid.
ScoreFn analytic_score_field(const GaussianMixture& data, const ScheduleBridge& bridge);
ScoreFn predictor_score_field(const Predictor& pred, const ScheduleBridge& bridge,
                              std::optional<int> cond = std::nullopt);

using OdeField = std::function<Vec(std::span<const double> x, double t)>;

/// Explicit Euler / Heun integration over a strictly monotone time grid.
/// Throws (reporting the step time) if the state becomes non-finite.
std::vector<Vec> integrate_ode(const OdeField& field, std::span<const double> x_start,
                               std::span<const double> times, Stepper stepper);

/// Decreasing ODE time grid from t = 1 to t = 0 with interior nodes uniform
/// in bridged log-SNR.
std::vector<double> ode_grid_log_snr(const ScheduleBridge& bridge, int steps);

/// Full generation loop. Initialises x ~ N(0, I) per chain (counter-based
/// per-chain streams), iterates the configured step and records states.
/// score_override supplies the exact score for ODE kinds; when absent the
/// predictor is used.
SamplerRun run_sampler(const SamplerConfig& cfg, const Predictor& pred, const Schedule& sched,
                       int n_chains, const ScoreFn& score_override = nullptr,
                       const MeanShiftFn& mean_shift = nullptr);

}  // namespace difflab
