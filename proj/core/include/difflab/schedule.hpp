#pragma once

#include <vector>

namespace difflab {

/// Discrete noise schedule beta_1..beta_T with cached derived quantities.
/// Indexing is 1-based at the interface; alpha_bar(0) == 1 is stored so
/// t = 1 formulas need no special-casing (tilde_beta(1) == 0 exactly).
class Schedule {
public:
    static Schedule from_betas(std::vector<double> betas);
    static Schedule linear(int T, double beta_start, double beta_end);
    static Schedule constant(int T, double beta);
    /// Squared-cosine alpha_bar profile, betas clipped to (0, 0.999].
    static Schedule cosine(int T);

    [[nodiscard]] int steps() const { return static_cast<int>(betas_.size()); }
    [[nodiscard]] const std::vector<double>& betas() const { return betas_; }

    [[nodiscard]] double beta(int t) const;        // t in 1..T
    [[nodiscard]] double alpha(int t) const;       // 1 - beta_t
    [[nodiscard]] double alpha_bar(int t) const;   // t in 0..T, alpha_bar(0) = 1
    [[nodiscard]] double tilde_beta(int t) const;  // posterior variance, t in 1..T
    [[nodiscard]] double snr(int t) const;         // alpha_bar / (1 - alpha_bar)
    [[nodiscard]] double log_snr(int t) const;

    /// 1 - alpha_bar(t) clamped below at 1e-12 (used before divisions/roots).
    [[nodiscard]] double one_minus_alpha_bar(int t) const;

    /// Full reverse grid [T, T-1, ..., 1].
    [[nodiscard]] std::vector<int> full_grid() const;
    /// Arithmetic subsequence T, T-stride, ...; the endpoints T and 1 are forced.
    [[nodiscard]] std::vector<int> subgrid_stride(int stride) const;
    /// Validates a caller-supplied strictly decreasing grid starting at T, ending at 1.
    [[nodiscard]] std::vector<int> subgrid(std::vector<int> indices) const;
    /// S indices chosen so log-SNR is approximately equidistant; endpoints forced.
    [[nodiscard]] std::vector<int> subgrid_log_snr(int S) const;

    /// Generalised posterior variance for a grid jump t_from -> t_to;
    /// reduces to tilde_beta(t) for the adjacent jump t -> t-1.
    [[nodiscard]] double tilde_beta_jump(int t_from, int t_to) const;

private:
    void check_t(int t, int lo) const;

    std::vector<double> betas_;
    std::vector<double> alphas_;
    std::vector<double> alpha_bars_;   // size T+1, [0] = 1
    std::vector<double> tilde_betas_;  // size T, [t-1] = tilde_beta_t
};

/// Continuous-time view of a discrete schedule on [0, 1].
/// beta(t) is the piecewise-constant interpolation of the discrete betas
/// scaled by T; alpha_bar(t) := exp(-int_0^t beta) so that the identity
/// d/dt alpha_bar = -beta(t) alpha_bar(t) holds exactly.
class ScheduleBridge {
public:
    explicit ScheduleBridge(const Schedule& s);

    [[nodiscard]] double beta(double t) const;
    [[nodiscard]] double alpha_bar(double t) const;
    [[nodiscard]] double alpha_bar_dot(double t) const;  // -beta(t) * alpha_bar(t)

    /// VP interpolant scales: mean m(t) = sqrt(alpha_bar), noise n(t) = sqrt(1 - alpha_bar).
    [[nodiscard]] double mean_scale(double t) const;
    [[nodiscard]] double mean_scale_dot(double t) const;
    [[nodiscard]] double noise_scale(double t) const;
    [[nodiscard]] double noise_scale_dot(double t) const;

    [[nodiscard]] double log_snr(double t) const;

    [[nodiscard]] int steps() const { return T_; }

private:
    [[nodiscard]] double cum_beta(double t) const;  // int_0^t beta

    int T_;
    std::vector<double> betas_;     // discrete, unscaled
    std::vector<double> cum_;       // cum_[i] = sum_{j<=i} beta_j
};

}  // namespace difflab
