#include "difflab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace difflab {

namespace {
constexpr double kSingularEps = 1e-9;
}

Interpolant Interpolant::linear() { return Interpolant(Kind::Linear); }

Interpolant Interpolant::vp(std::shared_ptr<const ScheduleBridge> bridge) {
    Interpolant i(Kind::Vp);
    i.bridge_ = std::move(bridge);
    if (!i.bridge_) throw std::invalid_argument("Interpolant::vp: null bridge");
    return i;
}

void Interpolant::check_t(double t) const {
    if (t < 0.0 || t > 1.0) throw std::out_of_range("Interpolant: t must be in [0, 1]");
}

double Interpolant::rho(double t) const {
    check_t(t);
    return kind_ == Kind::Linear ? t : bridge_->noise_scale(t);
}

double Interpolant::rho_dot(double t) const {
    check_t(t);
    return kind_ == Kind::Linear ? 1.0 : bridge_->noise_scale_dot(t);
}

double Interpolant::mean_scale(double t) const {
    check_t(t);
    return kind_ == Kind::Linear ? 1.0 - t : bridge_->mean_scale(t);
}

double Interpolant::mean_scale_dot(double t) const {
    check_t(t);
    return kind_ == Kind::Linear ? -1.0 : bridge_->mean_scale_dot(t);
}

double Interpolant::kappa(double t) const {
    const double m = mean_scale(t);
    if (m < kSingularEps) throw std::domain_error("Interpolant::kappa: singular (rho ~ 1)");
    return -mean_scale_dot(t) / m;
}

NoiseLevel Interpolant::noise_level(double t) const {
    const double n = rho(t);
    return {mean_scale(t), n * n};
}

PathSample sample_path(const GaussianMixture& data, const Interpolant& interp, double t, Rng& rng,
                       Coupling coupling) {
    PathSample ps;
    ps.t = t;
    ps.x0 = data.draw(rng);
    if (coupling == Coupling::Independent) {
        ps.xT = rng.normal_vec(data.dim());
    } else {
        ps.xT = ps.x0;
    }
    const double m = interp.mean_scale(t);
    const double n = interp.rho(t);
    const double md = interp.mean_scale_dot(t);
    const double nd = interp.rho_dot(t);
    ps.z.resize(data.dim());
    ps.u.resize(data.dim());
    for (std::size_t i = 0; i < data.dim(); ++i) {
        ps.z[i] = m * ps.x0[i] + n * ps.xT[i];
        ps.u[i] = md * ps.x0[i] + nd * ps.xT[i];
    }
    return ps;
}

Vec marginal_velocity(const GaussianMixture& data, const Interpolant& interp, double t,
                      std::span<const double> x) {
    const double m = interp.mean_scale(t);
    if (m < kSingularEps)
        throw std::domain_error("marginal_velocity: singular noise end (rho ~ 1)");
    const double n = interp.rho(t);
    const double md = interp.mean_scale_dot(t);
    const double nd = interp.rho_dot(t);
    const Vec s = data.score(interp.noise_level(t), x);
    const double cx = md / m;
    const double cs = cx * n * n - nd * n;
    Vec u(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) u[i] = cx * x[i] + cs * s[i];
    return u;
}

Vec rectified_velocity(const GaussianMixture& data, const Interpolant& interp, double t,
                       std::span<const double> x) {
    const double n = interp.rho(t);
    const Vec s = data.score(interp.noise_level(t), x);
    Vec u(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) u[i] = -(x[i] + n * s[i]);
    return u;
}

Vec rectified_velocity(const Predictor& pred, int t, std::span<const double> x,
                       std::optional<int> cond) {
    const Vec e = pred.eps_hat(x, t, cond);
    Vec u(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) u[i] = -(x[i] - e[i]);
    return u;
}

TimeChange::TimeChange(std::vector<double> t_grid, std::vector<double> s_grid)
    : t_(std::move(t_grid)), s_(std::move(s_grid)) {
    if (t_.size() != s_.size() || t_.size() < 2)
        throw std::invalid_argument("TimeChange: grids must match and have >= 2 nodes");
}

namespace {

double interp_monotone(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs.begin());
    const double w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return ys[i - 1] + w * (ys[i] - ys[i - 1]);
}

}  // namespace

double TimeChange::s_of_t(double t) const { return interp_monotone(t_, s_, t); }
double TimeChange::t_of_s(double s) const { return interp_monotone(s_, t_, s); }

TimeChange time_change(const std::function<double(double)>& kappa,
                       std::span<const double> t_grid, double max_panel) {
    if (t_grid.size() < 2) throw std::invalid_argument("time_change: need >= 2 grid nodes");
    std::vector<double> t(t_grid.begin(), t_grid.end());
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) throw std::invalid_argument("time_change: grid must increase");

    std::vector<double> s(t.size(), 0.0);
    double acc = 0.0;
    double k_left = kappa(t[0]);
    if (!(k_left > 0.0)) throw std::domain_error("time_change: kappa must be positive");
    for (std::size_t i = 1; i < t.size(); ++i) {
        const double width = t[i] - t[i - 1];
        const int panels = std::max(1, static_cast<int>(std::ceil(width / max_panel)));
        const double h = width / panels;
        double prev = k_left;
        for (int p = 1; p <= panels; ++p) {
            const double tp = t[i - 1] + h * p;
            const double cur = kappa(tp);
            if (!(cur > 0.0)) throw std::domain_error("time_change: kappa must be positive");
            acc += 0.5 * h * (prev + cur);
            prev = cur;
        }
        k_left = prev;
        s[i] = acc;
    }
    return TimeChange(std::move(t), std::move(s));
}

}  // namespace difflab
