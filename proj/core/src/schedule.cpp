#include "difflab/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace difflab {

namespace {
constexpr double kFloor = 1e-12;
}

Schedule Schedule::from_betas(std::vector<double> betas) {
    if (betas.empty()) throw std::invalid_argument("Schedule: T must be >= 1");
    for (std::size_t i = 0; i < betas.size(); ++i) {
        if (!(betas[i] > 0.0) || !(betas[i] < 1.0))
            throw std::invalid_argument("Schedule: betas must lie in (0, 1)");
        if (i > 0 && betas[i] < betas[i - 1])
            throw std::invalid_argument("Schedule: betas must be nondecreasing");
    }
    Schedule s;
    s.betas_ = std::move(betas);
    const int T = s.steps();
    s.alphas_.resize(T);
    s.alpha_bars_.resize(T + 1);
    s.tilde_betas_.resize(T);
    s.alpha_bars_[0] = 1.0;
    for (int t = 1; t <= T; ++t) {
        s.alphas_[t - 1] = 1.0 - s.betas_[t - 1];
        s.alpha_bars_[t] = s.alpha_bars_[t - 1] * s.alphas_[t - 1];
        const double denom = std::max(1.0 - s.alpha_bars_[t], kFloor);
        s.tilde_betas_[t - 1] = (1.0 - s.alpha_bars_[t - 1]) / denom * s.betas_[t - 1];
    }
    return s;
}

Schedule Schedule::linear(int T, double beta_start, double beta_end) {
    if (T < 1) throw std::invalid_argument("Schedule::linear: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw std::invalid_argument("Schedule::linear: need 0 < beta_start <= beta_end < 1");
    std::vector<double> b(T);
    for (int t = 0; t < T; ++t)
        b[t] = T == 1 ? beta_start
                      : beta_start + (beta_end - beta_start) * static_cast<double>(t) /
                                         static_cast<double>(T - 1);
    return from_betas(std::move(b));
}

Schedule Schedule::constant(int T, double beta) { return linear(T, beta, beta); }

Schedule Schedule::cosine(int T) {
    if (T < 1) throw std::invalid_argument("Schedule::cosine: T must be >= 1");
    auto f = [T](int t) {
        const double x = (static_cast<double>(t) / T + 0.008) / 1.008 * 1.5707963267948966;
        const double c = std::cos(x);
        return c * c;
    };
    std::vector<double> b(T);
    for (int t = 1; t <= T; ++t) {
        const double beta = 1.0 - f(t) / f(t - 1);
        b[t - 1] = std::clamp(beta, 1e-8, 0.999);
    }
    // clipping can break monotonicity at the tail; enforce nondecreasing
    for (int t = 1; t < T; ++t) b[t] = std::max(b[t], b[t - 1]);
    return from_betas(std::move(b));
}

void Schedule::check_t(int t, int lo) const {
    if (t < lo || t > steps()) throw std::out_of_range("Schedule: time index out of range");
}

double Schedule::beta(int t) const {
    check_t(t, 1);
    return betas_[t - 1];
}

double Schedule::alpha(int t) const {
    check_t(t, 1);
    return alphas_[t - 1];
}

double Schedule::alpha_bar(int t) const {
    check_t(t, 0);
    return alpha_bars_[t];
}

double Schedule::tilde_beta(int t) const {
    check_t(t, 1);
    return tilde_betas_[t - 1];
}

double Schedule::one_minus_alpha_bar(int t) const {
    check_t(t, 0);
    return std::max(1.0 - alpha_bars_[t], kFloor);
}

double Schedule::snr(int t) const {
    check_t(t, 1);
    return alpha_bars_[t] / one_minus_alpha_bar(t);
}

double Schedule::log_snr(int t) const { return std::log(snr(t)); }

std::vector<int> Schedule::full_grid() const {
    std::vector<int> g(steps());
    for (int i = 0; i < steps(); ++i) g[i] = steps() - i;
    return g;
}

std::vector<int> Schedule::subgrid_stride(int stride) const {
    if (stride < 1) throw std::invalid_argument("subgrid_stride: stride must be >= 1");
    std::vector<int> g;
    for (int t = steps(); t > 1; t -= stride) g.push_back(t);
    g.push_back(1);
    return subgrid(std::move(g));
}

std::vector<int> Schedule::subgrid(std::vector<int> indices) const {
    if (indices.empty()) throw std::invalid_argument("subgrid: empty index list");
    if (indices.front() != steps() || indices.back() != 1)
        throw std::invalid_argument("subgrid: grid must start at T and end at 1");
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 1 || indices[i] > steps())
            throw std::invalid_argument("subgrid: index out of range");
        if (i > 0 && indices[i] >= indices[i - 1])
            throw std::invalid_argument("subgrid: indices must be strictly decreasing");
    }
    return indices;
}

std::vector<int> Schedule::subgrid_log_snr(int S) const {
    if (S < 2 || S > steps()) throw std::invalid_argument("subgrid_log_snr: need 2 <= S <= T");
    const double l_hi = log_snr(1);   // data end, largest
    const double l_lo = log_snr(steps());
    std::vector<int> g(S);
    g[0] = steps();
    g[S - 1] = 1;
    for (int k = 1; k < S - 1; ++k) {
        const double target = l_lo + (l_hi - l_lo) * static_cast<double>(k) / (S - 1);
        // log-SNR is decreasing in t; binary search for nearest index
        int lo = 1, hi = steps();
        while (hi - lo > 1) {
            const int mid = (lo + hi) / 2;
            if (log_snr(mid) >= target)
                lo = mid;
            else
                hi = mid;
        }
        const int pick = std::abs(log_snr(lo) - target) <= std::abs(log_snr(hi) - target) ? lo : hi;
        g[k] = std::min(pick, g[k - 1] - 1);  // keep strictly decreasing
        g[k] = std::max(g[k], S - k);         // leave room to reach 1
    }
    return subgrid(std::move(g));
}

double Schedule::tilde_beta_jump(int t_from, int t_to) const {
    check_t(t_from, 1);
    check_t(t_to, 0);
    if (t_to >= t_from) throw std::invalid_argument("tilde_beta_jump: need t_to < t_from");
    const double ab_from = alpha_bar(t_from);
    const double ab_to = alpha_bar(t_to);
    return (1.0 - ab_to) / one_minus_alpha_bar(t_from) * (1.0 - ab_from / ab_to);
}

ScheduleBridge::ScheduleBridge(const Schedule& s)
    : T_(s.steps()), betas_(s.betas()), cum_(s.steps() + 1, 0.0) {
    for (int i = 1; i <= T_; ++i) cum_[i] = cum_[i - 1] + betas_[i - 1];
}

double ScheduleBridge::beta(double t) const {
    if (t < 0.0 || t > 1.0) throw std::out_of_range("ScheduleBridge: t must be in [0, 1]");
    int cell = static_cast<int>(std::ceil(t * T_));
    cell = std::clamp(cell, 1, T_);
    return static_cast<double>(T_) * betas_[cell - 1];
}

double ScheduleBridge::cum_beta(double t) const {
    const double u = t * T_;
    int cell = std::clamp(static_cast<int>(std::ceil(u)), 1, T_);
    return cum_[cell - 1] + betas_[cell - 1] * (u - (cell - 1));
}

double ScheduleBridge::alpha_bar(double t) const {
    if (t < 0.0 || t > 1.0) throw std::out_of_range("ScheduleBridge: t must be in [0, 1]");
    return std::exp(-cum_beta(t));
}

double ScheduleBridge::alpha_bar_dot(double t) const { return -beta(t) * alpha_bar(t); }

double ScheduleBridge::mean_scale(double t) const { return std::sqrt(alpha_bar(t)); }

double ScheduleBridge::mean_scale_dot(double t) const {
    // d/dt sqrt(ab) = ab_dot / (2 sqrt(ab))
    return alpha_bar_dot(t) / (2.0 * mean_scale(t));
}

double ScheduleBridge::noise_scale(double t) const {
    return std::sqrt(std::max(1.0 - alpha_bar(t), 0.0));
}

double ScheduleBridge::noise_scale_dot(double t) const {
    const double n = noise_scale(t);
    const double denom = std::max(n, 1e-12);
    return -alpha_bar_dot(t) / (2.0 * denom);
}

double ScheduleBridge::log_snr(double t) const {
    const double ab = alpha_bar(t);
    return std::log(ab / std::max(1.0 - ab, 1e-12));
}

}  // namespace difflab
