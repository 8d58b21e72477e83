#include "difflab/gaussian.hpp"

#include <cmath>
#include <stdexcept>

namespace difflab {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void require_same_dim(const Gaussian& p, const Gaussian& q, const char* op) {
    if (p.dim() != q.dim())
        throw std::invalid_argument(std::string(op) + ": dimension mismatch");
}

void require_proper(const Gaussian& g, const char* op) {
    if (g.degenerate())
        throw std::domain_error(std::string(op) + ": degenerate (zero-variance) Gaussian");
}

}  // namespace

Gaussian Gaussian::isotropic(Vec mean, double var) {
    if (!(var >= 0.0) || !std::isfinite(var))
        throw std::invalid_argument("Gaussian: variance must be finite and >= 0");
    Gaussian g;
    g.kind_ = Cov::Isotropic;
    g.mean_ = std::move(mean);
    g.iso_var_ = var;
    return g;
}

Gaussian Gaussian::diagonal(Vec mean, Vec vars) {
    if (mean.size() != vars.size())
        throw std::invalid_argument("Gaussian: mean/variance dimension mismatch");
    for (double v : vars)
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::invalid_argument("Gaussian: diagonal variances must be finite and > 0");
    Gaussian g;
    g.kind_ = Cov::Diagonal;
    g.mean_ = std::move(mean);
    g.diag_var_ = std::move(vars);
    return g;
}

bool Gaussian::degenerate() const {
    if (kind_ == Cov::Isotropic) return iso_var_ == 0.0;
    return false;
}

double log_density(const Gaussian& g, std::span<const double> x) {
    if (x.size() != g.dim()) throw std::invalid_argument("log_density: dimension mismatch");
    require_proper(g, "log_density");
    const std::size_t d = g.dim();
    double log_det = 0.0;
    double maha = 0.0;
    if (g.cov_kind() == Gaussian::Cov::Isotropic) {
        const double v = g.iso_var();
        log_det = static_cast<double>(d) * std::log(v);
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double r = x[i] - g.mean()[i];
            s += r * r;
        }
        maha = s / v;
    } else {
        for (std::size_t i = 0; i < d; ++i) {
            const double v = g.var(i);
            const double r = x[i] - g.mean()[i];
            log_det += std::log(v);
            maha += r * r / v;
        }
    }
    return -0.5 * (static_cast<double>(d) * kLog2Pi + log_det + maha);
}

std::vector<Vec> sample(const Gaussian& g, Seed seed, std::size_t n) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    Rng rng(seed);
    const std::size_t d = g.dim();
    std::vector<Vec> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        Vec x(d);
        for (std::size_t i = 0; i < d; ++i) {
            const double sd = std::sqrt(g.var(i));
            x[i] = g.mean()[i] + sd * rng.normal();
        }
        out[k] = std::move(x);
    }
    return out;
}

GaussianProduct product(const Gaussian& p, const Gaussian& q) {
    require_same_dim(p, q, "product");
    require_proper(p, "product");
    require_proper(q, "product");
    const std::size_t d = p.dim();

    const bool iso = p.cov_kind() == Gaussian::Cov::Isotropic &&
                     q.cov_kind() == Gaussian::Cov::Isotropic;

    Vec mean(d);
    Vec vars(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double prec = 1.0 / p.var(i) + 1.0 / q.var(i);
        vars[i] = 1.0 / prec;
        mean[i] = vars[i] * (p.mean()[i] / p.var(i) + q.mean()[i] / q.var(i));
    }

    // Normalising constant: integral of the product is N(mu_p; mu_q, Sigma_p + Sigma_q).
    double log_scale = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double v = p.var(i) + q.var(i);
        const double r = p.mean()[i] - q.mean()[i];
        log_scale += -0.5 * (kLog2Pi + std::log(v) + r * r / v);
    }

    GaussianProduct out;
    out.log_scale = log_scale;
    if (iso) {
        out.density = Gaussian::isotropic(std::move(mean), vars[0]);
    } else {
        out.density = Gaussian::diagonal(std::move(mean), std::move(vars));
    }
    return out;
}

double kl(const Gaussian& p, const Gaussian& q) {
    require_same_dim(p, q, "kl");
    require_proper(p, "kl");
    require_proper(q, "kl");
    const std::size_t d = p.dim();
    // Diagonal-form KL; the isotropic case is the equal-entries special case.
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double vp = p.var(i);
        const double vq = q.var(i);
        const double r = p.mean()[i] - q.mean()[i];
        acc += vp / vq + r * r / vq - 1.0 + std::log(vq / vp);
    }
    return 0.5 * acc;
}

double quad_form_expectation(const Gaussian& g, const Mat& A) {
    if (A.rows != g.dim() || A.cols != g.dim())
        throw std::invalid_argument("quad_form_expectation: A must be d x d");
    double tr = 0.0;
    for (std::size_t i = 0; i < g.dim(); ++i) tr += A(i, i) * g.var(i);
    return tr;
}

}  // namespace difflab
