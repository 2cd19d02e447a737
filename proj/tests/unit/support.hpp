#pragma once

// Independent oracles shared by the unit suites. Nothing here calls into the
// code under test except to build fixtures.

#include "spheres/models.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

/// Composite Simpson rule with `intervals` (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int intervals = 20000) {
    const double h = (b - a) / intervals;
    double s = f(a) + f(b);
    for (int i = 1; i < intervals; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

/// Density of the first coordinate of a uniform point on S^{n-1} ⊂ R^n.
inline double sphere_marginal_pdf(double x, int n) {
    if (std::abs(x) >= 1.0) return 0.0;
    const double log_c = std::lgamma(n / 2.0) - std::lgamma((n - 1) / 2.0) - 0.5 * std::log(std::numbers::pi);
    return std::exp(log_c + 0.5 * (n - 3) * std::log1p(-x * x));
}

/// P(|x₁| > c) on S^{n-1}.
inline double sphere_two_sided_tail(double c, int n) {
    return 2.0 * simpson([n](double x) { return sphere_marginal_pdf(x, n); }, c, 1.0);
}

/// Φ by integrating the density from a far-left cutoff.
inline double phi_by_quadrature(double x) {
    return simpson([](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); }, -12.0, x,
                   200000);
}

/// Φ⁻¹ by bisection on std::erfc, in whichever tail is smaller.
inline double quantile_by_bisection(double p) {
    if (p > 0.5) return -quantile_by_bisection(1.0 - p);
    double lo = -40.0, hi = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Quadratic net with W1 = diag(√α_i), w = 1, b = −1, so its α spectrum is `alphas`.
inline spheres::QuadraticNet diagonal_quadratic(const std::vector<double>& alphas) {
    const auto n = static_cast<Eigen::Index>(alphas.size());
    spheres::QuadraticNet net;
    net.w1 = spheres::Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) net.w1(i, i) = std::sqrt(alphas[static_cast<std::size_t>(i)]);
    net.w = 1.0;
    net.b = -1.0;
    return net;
}

}  // namespace oracle
