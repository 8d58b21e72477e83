#include "difflab/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace difflab {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

GaussianMixture::GaussianMixture(std::vector<MixtureComponent> comps) : comps_(std::move(comps)) {
    if (comps_.empty()) throw std::invalid_argument("GaussianMixture: no components");
    dim_ = comps_[0].mean.size();
    double wsum = 0.0;
    for (const auto& c : comps_) {
        if (c.mean.size() != dim_)
            throw std::invalid_argument("GaussianMixture: component dimensions differ");
        if (!(c.weight > 0.0)) throw std::invalid_argument("GaussianMixture: weights must be > 0");
        if (!(c.var > 0.0)) throw std::invalid_argument("GaussianMixture: variances must be > 0");
        wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-12)
        throw std::invalid_argument("GaussianMixture: weights must sum to 1");
}

std::vector<int> GaussianMixture::labels() const {
    std::set<int> s;
    for (const auto& c : comps_) s.insert(c.label);
    return {s.begin(), s.end()};
}

GaussianMixture GaussianMixture::standard_normal(std::size_t dim) {
    return GaussianMixture({MixtureComponent{1.0, Vec(dim, 0.0), 1.0, 0}});
}

GaussianMixture GaussianMixture::two_modes() {
    return GaussianMixture({
        MixtureComponent{0.5, {-2.0, 0.0}, 0.25, 0},
        MixtureComponent{0.5, {+2.0, 0.0}, 0.25, 1},
    });
}

GaussianMixture GaussianMixture::ring(int n, double radius, double var) {
    std::vector<MixtureComponent> comps;
    for (int k = 0; k < n; ++k) {
        const double a = 2.0 * 3.14159265358979323846 * k / n;
        comps.push_back({1.0 / n, {radius * std::cos(a), radius * std::sin(a)}, var, k});
    }
    return GaussianMixture(std::move(comps));
}

GaussianMixture GaussianMixture::conditioned(int label) const {
    std::vector<MixtureComponent> sub;
    double wsum = 0.0;
    for (const auto& c : comps_)
        if (c.label == label) {
            sub.push_back(c);
            wsum += c.weight;
        }
    if (sub.empty()) throw std::invalid_argument("conditioned: unknown label");
    for (auto& c : sub) c.weight /= wsum;
    return GaussianMixture(std::move(sub));
}

GaussianMixture GaussianMixture::noised(NoiseLevel lv) const {
    std::vector<MixtureComponent> out = comps_;
    const double a2 = lv.mean_scale * lv.mean_scale;
    for (auto& c : out) {
        for (double& m : c.mean) m *= lv.mean_scale;
        c.var = a2 * c.var + lv.noise_var;
    }
    return GaussianMixture(std::move(out));
}

GaussianMixture GaussianMixture::marginal_at(int t, const Schedule& sched) const {
    return noised(NoiseLevel::at(sched, t));
}

Vec GaussianMixture::draw(Rng& rng) const { return draw_labeled(rng).first; }

std::pair<Vec, int> GaussianMixture::draw_labeled(Rng& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    const MixtureComponent* pick = &comps_.back();
    for (const auto& c : comps_) {
        acc += c.weight;
        if (u <= acc) {
            pick = &c;
            break;
        }
    }
    const double sd = std::sqrt(pick->var);
    Vec x(dim_);
    for (std::size_t i = 0; i < dim_; ++i) x[i] = pick->mean[i] + sd * rng.normal();
    return {std::move(x), pick->label};
}

std::vector<Vec> GaussianMixture::draw_n(Seed seed, std::size_t n) const {
    Rng rng(seed);
    std::vector<Vec> out(n);
    for (auto& v : out) v = draw(rng);
    return out;
}

Vec GaussianMixture::moments_mean() const {
    Vec m(dim_, 0.0);
    for (const auto& c : comps_) axpy(c.weight, c.mean, m);
    return m;
}

Mat GaussianMixture::moments_cov() const {
    const Vec m = moments_mean();
    Mat cov(dim_, dim_);
    for (const auto& c : comps_) {
        for (std::size_t i = 0; i < dim_; ++i) {
            cov(i, i) += c.weight * c.var;
            for (std::size_t j = 0; j < dim_; ++j)
                cov(i, j) += c.weight * (c.mean[i] - m[i]) * (c.mean[j] - m[j]);
        }
    }
    return cov;
}

int GaussianMixture::nearest_component(std::span<const double> x) const {
    int best = 0;
    double best_d = sq_dist(x, comps_[0].mean);
    for (std::size_t k = 1; k < comps_.size(); ++k) {
        const double d = sq_dist(x, comps_[k].mean);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(k);
        }
    }
    return best;
}

struct GaussianMixture::Responsibilities {
    double log_norm;       // log p_t(x)
    std::vector<double> r; // posterior component weights at x
    std::vector<double> inv_var;
};

GaussianMixture::Responsibilities GaussianMixture::resp(NoiseLevel lv,
                                                        std::span<const double> x) const {
    if (x.size() != dim_) throw std::invalid_argument("mixture: dimension mismatch");
    const double a = lv.mean_scale;
    const double a2 = a * a;
    const std::size_t K = comps_.size();
    std::vector<double> lw(K);
    Responsibilities out;
    out.inv_var.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        const double v = a2 * comps_[k].var + lv.noise_var;
        out.inv_var[k] = 1.0 / v;
        double maha = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            const double r = x[i] - a * comps_[k].mean[i];
            maha += r * r;
        }
        lw[k] = std::log(comps_[k].weight) -
                0.5 * (dim_ * (kLog2Pi + std::log(v)) + maha / v);
    }
    out.log_norm = log_sum_exp(lw);
    out.r.resize(K);
    for (std::size_t k = 0; k < K; ++k) out.r[k] = std::exp(lw[k] - out.log_norm);
    return out;
}

double GaussianMixture::log_pt(NoiseLevel lv, std::span<const double> x) const {
    return resp(lv, x).log_norm;
}

Vec GaussianMixture::score(NoiseLevel lv, std::span<const double> x) const {
    const auto rp = resp(lv, x);
    Vec s(dim_, 0.0);
    for (std::size_t k = 0; k < comps_.size(); ++k) {
        const double c = rp.r[k] * rp.inv_var[k];
        for (std::size_t i = 0; i < dim_; ++i)
            s[i] += c * (lv.mean_scale * comps_[k].mean[i] - x[i]);
    }
    return s;
}

Vec GaussianMixture::optimal_eps(NoiseLevel lv, std::span<const double> x) const {
    if (!(lv.noise_var > 0.0))
        throw std::domain_error("optimal_eps: no noise at this level (t = 0)");
    Vec s = score(lv, x);
    const double c = -std::sqrt(lv.noise_var);
    for (double& v : s) v *= c;
    return s;
}

Vec GaussianMixture::optimal_x0(NoiseLevel lv, std::span<const double> x) const {
    if (!(lv.noise_var > 0.0))
        throw std::domain_error("optimal_x0: no noise at this level (t = 0)");
    Vec s = score(lv, x);
    Vec out(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
        out[i] = (x[i] + lv.noise_var * s[i]) / lv.mean_scale;
    return out;
}

double GaussianMixture::log_pt(int t, const Schedule& s, std::span<const double> x) const {
    return log_pt(NoiseLevel::at(s, t), x);
}
Vec GaussianMixture::score(int t, const Schedule& s, std::span<const double> x) const {
    return score(NoiseLevel::at(s, t), x);
}
Vec GaussianMixture::optimal_eps(int t, const Schedule& s, std::span<const double> x) const {
    return optimal_eps(NoiseLevel::at(s, t), x);
}
Vec GaussianMixture::optimal_x0(int t, const Schedule& s, std::span<const double> x) const {
    return optimal_x0(NoiseLevel::at(s, t), x);
}

double GaussianMixture::ClassPosterior::prob_of(int label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return probs[i];
    throw std::invalid_argument("ClassPosterior: unknown label");
}

GaussianMixture::ClassPosterior GaussianMixture::class_posterior(
    NoiseLevel lv, std::span<const double> x) const {
    const auto rp = resp(lv, x);
    ClassPosterior cp;
    cp.labels = labels();
    cp.probs.assign(cp.labels.size(), 0.0);
    for (std::size_t k = 0; k < comps_.size(); ++k) {
        const auto it = std::lower_bound(cp.labels.begin(), cp.labels.end(), comps_[k].label);
        cp.probs[static_cast<std::size_t>(it - cp.labels.begin())] += rp.r[k];
    }
    return cp;
}

GaussianMixture::ClassPosterior GaussianMixture::class_posterior(
    int t, const Schedule& s, std::span<const double> x) const {
    return class_posterior(NoiseLevel::at(s, t), x);
}

Vec GaussianMixture::class_log_posterior_grad(NoiseLevel lv, int label,
                                              std::span<const double> x) const {
    const auto rp = resp(lv, x);
    double r_label = 0.0;
    Vec num(dim_, 0.0);   // sum over label components of r_k g_k
    Vec full(dim_, 0.0);  // full score
    bool seen = false;
    for (std::size_t k = 0; k < comps_.size(); ++k) {
        const double c = rp.r[k] * rp.inv_var[k];
        for (std::size_t i = 0; i < dim_; ++i) {
            const double g = c * (lv.mean_scale * comps_[k].mean[i] - x[i]);
            full[i] += g;
            if (comps_[k].label == label) num[i] += g;
        }
        if (comps_[k].label == label) {
            r_label += rp.r[k];
            seen = true;
        }
    }
    if (!seen) throw std::invalid_argument("class_log_posterior_grad: unknown label");
    Vec out(dim_);
    for (std::size_t i = 0; i < dim_; ++i) out[i] = num[i] / r_label - full[i];
    return out;
}

Vec GaussianMixture::class_log_posterior_grad(int t, const Schedule& s, int label,
                                              std::span<const double> x) const {
    return class_log_posterior_grad(NoiseLevel::at(s, t), label, x);
}

}  // namespace difflab
