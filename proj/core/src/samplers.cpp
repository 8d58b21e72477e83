#include "difflab/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "difflab/forward.hpp"

namespace difflab {

double SigmaMode::sigma2(const Schedule& s, int t_from, int t_to) const {
    switch (kind) {
        case Kind::Zero:
            return 0.0;
        case Kind::TildeBeta:
            return s.tilde_beta_jump(t_from, t_to);
        case Kind::Scaled:
            return eta * eta * s.tilde_beta_jump(t_from, t_to);
    }
    return 0.0;
}

Vec ddpm_step(std::span<const double> x_t, int t, const Predictor& pred, const Schedule& sched,
              Rng& rng, std::optional<int> cond) {
    const Vec eps = pred.eps_hat(x_t, t, cond);
    const double inv_sqrt_a = 1.0 / std::sqrt(sched.alpha(t));
    const double c = sched.beta(t) / std::sqrt(sched.one_minus_alpha_bar(t));
    const double sigma = std::sqrt(sched.tilde_beta(t));
    Vec out(x_t.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = inv_sqrt_a * (x_t[i] - c * eps[i]);
    if (sigma > 0.0)
        for (double& v : out) v += sigma * rng.normal();
    return out;
}

Vec ddim_step(std::span<const double> x_t, int t_from, int t_to, const Predictor& pred,
              const Schedule& sched, double sigma2, Rng& rng, std::optional<int> cond) {
    if (t_to >= t_from || t_to < 0)
        throw std::invalid_argument("ddim_step: need t_from > t_to >= 0");
    const double ab_to = sched.alpha_bar(t_to);
    if (sigma2 > 1.0 - ab_to + 1e-15)
        throw std::invalid_argument("ddim_step: sigma2 exceeds 1 - alpha_bar(t_to)");
    const Vec eps = pred.eps_hat(x_t, t_from, cond);
    const Vec x0 = Predictor::x0_from_eps(x_t, eps, t_from, sched);
    const double a_to = std::sqrt(ab_to);
    const double dir = std::sqrt(std::max(1.0 - ab_to - sigma2, 0.0));
    Vec out(x_t.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a_to * x0[i] + dir * eps[i];
    const double sigma = std::sqrt(sigma2);
    if (sigma > 0.0)
        for (double& v : out) v += sigma * rng.normal();
    return out;
}

Vec characteristic_jump(std::span<const double> x, int t_from, int t_to,
                        std::span<const double> eps, const Schedule& sched) {
    const Vec x0 = Predictor::x0_from_eps(x, eps, t_from, sched);
    const double a = std::sqrt(sched.alpha_bar(t_to));
    const double n = std::sqrt(1.0 - sched.alpha_bar(t_to));
    Vec out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + n * eps[i];
    return out;
}

Vec pf_ode_velocity(std::span<const double> x, double t, const ScoreFn& score,
                    const ScheduleBridge& bridge) {
    const Vec s = score(x, t);
    const double c = -0.5 * bridge.beta(t);
    Vec v(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) v[i] = c * (x[i] + s[i]);
    return v;
}

ScoreFn analytic_score_field(const GaussianMixture& data, const ScheduleBridge& bridge) {
    return [&data, &bridge](std::span<const double> x, double t) {
        const double ab = bridge.alpha_bar(t);
        return data.score(NoiseLevel{std::sqrt(ab), 1.0 - ab}, x);
    };
}

ScoreFn predictor_score_field(const Predictor& pred, const ScheduleBridge& bridge,
                              std::optional<int> cond) {
    const int T = bridge.steps();
    return [&pred, T, cond](std::span<const double> x, double t) {
        const int td = std::clamp(static_cast<int>(std::lround(t * T)), 1, T);
        Vec e = pred.eps_hat(x, td, cond);
        const double c = -1.0 / std::sqrt(pred.schedule().one_minus_alpha_bar(td));
        for (double& v : e) v *= c;
        return e;
    };
}

std::vector<Vec> integrate_ode(const OdeField& field, std::span<const double> x_start,
                               std::span<const double> times, Stepper stepper) {
    if (times.size() < 2) throw std::invalid_argument("integrate_ode: need >= 2 times");
    const bool increasing = times[1] > times[0];
    for (std::size_t i = 1; i < times.size(); ++i)
        if ((times[i] > times[i - 1]) != increasing || times[i] == times[i - 1])
            throw std::invalid_argument("integrate_ode: grid must be strictly monotone");

    std::vector<Vec> traj;
    traj.reserve(times.size());
    traj.emplace_back(x_start.begin(), x_start.end());
    Vec x(x_start.begin(), x_start.end());
    for (std::size_t k = 1; k < times.size(); ++k) {
        const double t0 = times[k - 1];
        const double h = times[k] - t0;
        const Vec k1 = field(x, t0);
        if (stepper == Stepper::Euler) {
            axpy(h, k1, x);
        } else {
            Vec xe = x;
            axpy(h, k1, xe);
            const Vec k2 = field(xe, times[k]);
            for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.5 * h * (k1[i] + k2[i]);
        }
        for (double v : x)
            if (!std::isfinite(v))
                throw std::runtime_error("integrate_ode: non-finite state at t = " +
                                         std::to_string(times[k]));
        traj.push_back(x);
    }
    return traj;
}

namespace {

double invert_decreasing(const std::function<double(double)>& f, double target, double lo,
                         double hi) {
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) > target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

void parallel_for(int n, int threads, const std::function<void(int, int)>& body) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    const int chunk = (n + threads - 1) / threads;
    std::exception_ptr err;
    std::mutex err_mu;
    for (int k = 0; k < threads; ++k) {
        const int lo = k * chunk;
        const int hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, &err, &err_mu, lo, hi] {
            try {
                body(lo, hi);
            } catch (...) {
                std::lock_guard<std::mutex> g(err_mu);
                if (!err) err = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace

std::vector<double> ode_grid_log_snr(const ScheduleBridge& bridge, int steps) {
    if (steps < 1) throw std::invalid_argument("ode_grid_log_snr: steps must be >= 1");
    const double l_start = bridge.log_snr(1.0);
    const double l_end = bridge.log_snr(0.0);  // clamped, large
    std::vector<double> ts(steps + 1);
    ts[0] = 1.0;
    ts[steps] = 0.0;
    auto lsnr = [&bridge](double t) { return bridge.log_snr(t); };  // decreasing in t
    for (int k = 1; k < steps; ++k) {
        const double target = l_start + (l_end - l_start) * static_cast<double>(k) / steps;
        ts[k] = invert_decreasing(lsnr, target, 0.0, 1.0);
        ts[k] = std::min(ts[k], ts[k - 1] - 1e-12);
    }
    return ts;
}

SamplerRun run_sampler(const SamplerConfig& cfg, const Predictor& pred, const Schedule& sched,
                       int n_chains, const ScoreFn& score_override, const MeanShiftFn& mean_shift) {
    if (n_chains < 0) throw std::invalid_argument("run_sampler: n_chains must be >= 0");
    const int d = static_cast<int>(pred.dim());
    const bool discrete = cfg.kind == SamplerKind::Ddpm || cfg.kind == SamplerKind::Ddim;

    ScheduleBridge bridge(sched);
    std::vector<double> times;
    std::vector<int> igrid;
    std::vector<double> s_clock;  // rectified kind: s = -log mean_scale at each node
    if (discrete) {
        igrid = cfg.grid.empty() ? sched.full_grid() : sched.subgrid(cfg.grid);
        if (cfg.kind == SamplerKind::Ddpm)
            for (std::size_t i = 1; i < igrid.size(); ++i)
                if (igrid[i - 1] - igrid[i] != 1)
                    throw std::invalid_argument("run_sampler: ddpm needs the full adjacent grid");
        times.assign(igrid.begin(), igrid.end());
        times.push_back(0.0);
    } else if (cfg.kind == SamplerKind::PfOde) {
        times = ode_grid_log_snr(bridge, cfg.ode_steps);
    } else {
        const int S = cfg.ode_steps;
        if (S < 1) throw std::invalid_argument("run_sampler: ode_steps must be >= 1");
        auto neg_s = [&bridge](double t) { return std::log(std::max(bridge.mean_scale(t), 1e-15)); };
        const double s_max = -neg_s(1.0);
        times.resize(S + 1);
        times[0] = 1.0;
        times[S] = 0.0;
        for (int k = 1; k < S; ++k) {
            const double target_s = s_max * (1.0 - static_cast<double>(k) / S);
            times[k] = invert_decreasing(neg_s, -target_s, 0.0, 1.0);
            times[k] = std::min(times[k], times[k - 1] - 1e-12);
        }
        s_clock.resize(times.size());
        for (std::size_t i = 0; i < times.size(); ++i) s_clock[i] = -neg_s(times[i]);
    }

    const int stride = std::max(1, cfg.record_every);
    std::vector<std::size_t> rec;
    for (std::size_t i = 0; i < times.size(); ++i)
        if (i % stride == 0 || i + 1 == times.size()) rec.push_back(i);
    std::vector<int> rec_of(times.size(), -1);
    for (std::size_t r = 0; r < rec.size(); ++r) rec_of[rec[r]] = static_cast<int>(r);

    SamplerRun run;
    for (std::size_t i : rec) run.times.push_back(times[i]);
    run.states.assign(rec.size(), Batch(n_chains, d));
    const std::size_t n_steps = times.size() - 1;
    run.diagnostics.assign(n_steps, StepDiag{});
    for (std::size_t k = 0; k < n_steps; ++k) {
        run.diagnostics[k].t_from = times[k];
        run.diagnostics[k].t_to = times[k + 1];
    }
    if (n_chains == 0) return run;

    ScoreFn score = score_override;
    if (!discrete && !score) score = predictor_score_field(pred, bridge, cfg.cond);

    // velocity of the configured ODE kind
    auto ode_velocity = [&](std::span<const double> x, double t) -> Vec {
        if (cfg.kind == SamplerKind::PfOde) return pf_ode_velocity(x, t, score, bridge);
        const double n = bridge.noise_scale(t);
        Vec s = score(x, t);
        Vec v(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) v[i] = -(x[i] + n * s[i]);
        return v;
    };

    // Diagnostics reduce over fixed 64-chain blocks so the result does not
    // depend on the thread count.
    const int kBlock = 64;
    const int n_blocks = (n_chains + kBlock - 1) / kBlock;
    std::vector<std::vector<double>> blk_shift(n_blocks, std::vector<double>(n_steps, 0.0));
    std::vector<std::vector<double>> blk_eps(n_blocks, std::vector<double>(n_steps, 0.0));

    parallel_for(n_blocks, cfg.threads, [&](int blk_lo, int blk_hi) {
        for (int blk = blk_lo; blk < blk_hi; ++blk) {
            const int c_lo = blk * kBlock;
            const int c_hi = std::min(n_chains, c_lo + kBlock);
            for (int c = c_lo; c < c_hi; ++c) {
                Rng rng(Seed{cfg.seed, static_cast<std::uint64_t>(c)});
                Vec x = rng.normal_vec(d);
                if (rec_of[0] >= 0)
                    std::copy(x.begin(), x.end(), run.states[rec_of[0]].row(c).begin());

                for (std::size_t k = 0; k + 1 < times.size(); ++k) {
                    Vec x_next;
                    double eps_norm = 0.0;
                    if (discrete) {
                        const int t_from = igrid[k];
                        const int t_to = k + 1 < igrid.size() ? igrid[k + 1] : 0;
                        const double s2 = t_to == 0 ? 0.0 : cfg.sigma.sigma2(sched, t_from, t_to);
                        Vec eps = pred.eps_hat(x, t_from, cfg.cond);
                        eps_norm = norm2(eps);
                        Vec x0 = Predictor::x0_from_eps(x, eps, t_from, sched);
                        if (cfg.clip_x0)
                            for (double& v : x0) v = std::clamp(v, -cfg.clip_box, cfg.clip_box);
                        const double a_to = std::sqrt(sched.alpha_bar(t_to));
                        const double dir =
                            std::sqrt(std::max(1.0 - sched.alpha_bar(t_to) - s2, 0.0));
                        x_next.resize(d);
                        for (int i = 0; i < d; ++i) x_next[i] = a_to * x0[i] + dir * eps[i];
                        if (mean_shift) {
                            const Vec shift = mean_shift(x, t_from, s2, cfg.cond);
                            for (int i = 0; i < d; ++i) x_next[i] += shift[i];
                        }
                        const double sg = std::sqrt(s2);
                        if (sg > 0.0)
                            for (double& v : x_next) v += sg * rng.normal();
                    } else {
                        const double t0 = times[k];
                        const double t1 = times[k + 1];
                        const double h = cfg.kind == SamplerKind::PfOde
                                             ? t1 - t0
                                             : s_clock[k + 1] - s_clock[k];
                        const Vec k1 = ode_velocity(x, t0);
                        if (cfg.stepper == Stepper::Euler) {
                            x_next = x;
                            axpy(h, k1, x_next);
                        } else {
                            Vec xe = x;
                            axpy(h, k1, xe);
                            const Vec k2 = ode_velocity(xe, t1);
                            x_next = x;
                            for (int i = 0; i < d; ++i) x_next[i] += 0.5 * h * (k1[i] + k2[i]);
                        }
                        for (double v : x_next)
                            if (!std::isfinite(v))
                                throw std::runtime_error("run_sampler: non-finite state at t = " +
                                                         std::to_string(t1));
                    }

                    blk_shift[blk][k] += std::sqrt(sq_dist(x_next, x));
                    blk_eps[blk][k] += eps_norm;
                    x = std::move(x_next);
                    if (rec_of[k + 1] >= 0)
                        std::copy(x.begin(), x.end(), run.states[rec_of[k + 1]].row(c).begin());
                }
            }
        }
    });

    for (std::size_t k = 0; k < n_steps; ++k) {
        double sh = 0.0, en = 0.0;
        for (int blk = 0; blk < n_blocks; ++blk) {
            sh += blk_shift[blk][k];
            en += blk_eps[blk][k];
        }
        run.diagnostics[k].mean_shift_norm = sh / n_chains;
        run.diagnostics[k].mean_eps_norm = en / n_chains;
    }
    return run;
}

}  // namespace difflab
