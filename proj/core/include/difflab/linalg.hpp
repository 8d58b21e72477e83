#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace difflab {

using Vec = std::vector<double>;

/// Dense row-major matrix. Small: only what the isotropic/diagonal
/// Gaussian algebra and the linear codec need.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    [[nodiscard]] Mat transposed() const {
        Mat t(cols, rows);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    [[nodiscard]] Vec mul(std::span<const double> x) const {
        if (x.size() != cols) throw std::invalid_argument("Mat::mul: dimension mismatch");
        Vec y(rows, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            double s = 0.0;
            const double* row = a.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) s += row[c] * x[c];
            y[r] = s;
        }
        return y;
    }
};

inline double dot(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

inline double sq_dist(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

inline Vec add(std::span<const double> x, std::span<const double> y) {
    Vec r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] + y[i];
    return r;
}

inline Vec sub(std::span<const double> x, std::span<const double> y) {
    Vec r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] - y[i];
    return r;
}

inline Vec scaled(std::span<const double> x, double a) {
    Vec r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = a * x[i];
    return r;
}

/// y += a*x
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline double max_abs_diff(std::span<const double> x, std::span<const double> y) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
    return m;
}

inline double log_sum_exp(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

}  // namespace difflab
