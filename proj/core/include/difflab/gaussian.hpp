#pragma once

#include <span>
#include <vector>

#include "difflab/linalg.hpp"
#include "difflab/rng.hpp"

namespace difflab {

/// Multivariate Gaussian restricted to isotropic or diagonal covariance.
/// Variances are normally strictly positive; a zero variance is accepted
/// at construction only as the degenerate point-mass limit (the t=0
/// sentinel of the forward process) and is rejected by density/KL/product.
class Gaussian {
public:
    enum class Cov { Isotropic, Diagonal };

    static Gaussian isotropic(Vec mean, double var);
    static Gaussian diagonal(Vec mean, Vec vars);
    static Gaussian standard(std::size_t dim) { return isotropic(Vec(dim, 0.0), 1.0); }

    [[nodiscard]] std::size_t dim() const { return mean_.size(); }
    [[nodiscard]] Cov cov_kind() const { return kind_; }
    [[nodiscard]] const Vec& mean() const { return mean_; }
    [[nodiscard]] double iso_var() const { return iso_var_; }
    [[nodiscard]] double var(std::size_t i) const {
        return kind_ == Cov::Isotropic ? iso_var_ : diag_var_[i];
    }
    [[nodiscard]] bool degenerate() const;

private:
    Gaussian() = default;

    Cov kind_ = Cov::Isotropic;
    Vec mean_;
    double iso_var_ = 1.0;
    Vec diag_var_;
};

/// log N(x; mu, Sigma) specialised to the covariance descriptor.
double log_density(const Gaussian& g, std::span<const double> x);

/// n draws mu + A z with A the diagonal square root of Sigma.
std::vector<Vec> sample(const Gaussian& g, Seed seed, std::size_t n);

struct GaussianProduct {
    Gaussian density;
    /// log of the omitted constant: p(x)q(x) = exp(log_scale) * N(x; mu, Sigma),
    /// i.e. log of the integral of the pointwise product.
    double log_scale = 0.0;
};

/// Pointwise product of two Gaussian densities over the same variable.
GaussianProduct product(const Gaussian& p, const Gaussian& q);

/// KL(p || q) in nats.
double kl(const Gaussian& p, const Gaussian& q);

/// E[(x-mu)^T A (x-mu)] = tr(A Sigma) for x ~ g.
double quad_form_expectation(const Gaussian& g, const Mat& A);

}  // namespace difflab
