#include "spheres/models.hpp"

#include "spheres/error.hpp"
#include "spheres/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace spheres {

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double sigmoid_ce_loss(double logit, int label) noexcept {
    return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

double sigmoid_ce_grad(double logit, int label) noexcept { return sigmoid(logit) - label; }

QuadraticNet make_quadratic_net(std::size_t n, std::size_t h, RngStream& stream) {
    if (n == 0 || h == 0) throw DomainError("make_quadratic_net: dimensions must be positive");
    QuadraticNet net;
    net.w1.resize(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(n));
    const double sd = 1.0 / std::sqrt(static_cast<double>(n));
    for (Eigen::Index i = 0; i < net.w1.size(); ++i) net.w1.data()[i] = sd * stream.normal();
    net.w = 1.0;
    net.b = -1.0;
    return net;
}

namespace {

void check_dim(const QuadraticNet& net, Eigen::Index cols) {
    if (static_cast<std::size_t>(cols) != net.input_dim()) {
        throw DimensionError("quadratic net expects inputs of dimension " + std::to_string(net.input_dim()) +
                             ", got " + std::to_string(cols));
    }
}

}  // namespace

double quad_logit(const QuadraticNet& net, const Vector& x) {
    check_dim(net, x.size());
    return net.w * (net.w1 * x).squaredNorm() + net.b;
}

Vector quad_logits(const QuadraticNet& net, const Matrix& batch) {
    check_dim(net, batch.cols());
    const Matrix hidden = batch * net.w1.transpose();
    return (net.w * hidden.rowwise().squaredNorm()).array() + net.b;
}

AlphaSpectrum alpha_spectrum(const QuadraticNet& net, double radius) {
    if (!(net.b < 0.0)) {
        throw UnsupportedRegimeError("alpha_spectrum: requires b < 0, got b = " + std::to_string(net.b));
    }
    const Vector s = singular_values(net.w1);
    const auto n = static_cast<Eigen::Index>(net.input_dim());
    AlphaSpectrum out;
    out.radius = radius;
    out.padded = s.size() < n;
    out.alphas = Vector::Zero(n);
    for (Eigen::Index i = 0; i < s.size(); ++i) out.alphas[i] = net.w * s[i] * s[i] / (-net.b);
    std::sort(out.alphas.data(), out.alphas.data() + n, std::greater<>());
    return out;
}

PerfectionCheck is_perfect(const AlphaSpectrum& spectrum) {
    const double lower = 1.0 / (spectrum.radius * spectrum.radius);
    PerfectionCheck out;
    for (Eigen::Index i = 0; i < spectrum.alphas.size(); ++i) {
        const double a = spectrum.alphas[i];
        if (a < lower || a > 1.0) ++out.violations;
    }
    out.perfect = out.violations == 0;
    return out;
}

QuadraticNet quad_perfect_init(std::size_t n, std::size_t h, double radius,
                               const PerfectInitTargets& targets, RngStream& stream) {
    const double pi = targets.p_inner;
    const double po = targets.p_outer;
    if (!(pi > 0.0 && pi < 0.5 && po > 0.5 && po < 1.0)) {
        throw DomainError("quad_perfect_init: need 0 < p_inner < 0.5 < p_outer < 1");
    }
    if (h < n) throw DomainError("quad_perfect_init: needs h >= n for orthonormal W1 columns");
    if (!(radius > 1.0)) throw DomainError("quad_perfect_init: R must exceed 1");

    const double logit_inner = std::log(pi / (1.0 - pi));
    const double logit_outer = std::log(po / (1.0 - po));
    const double ws2 = (logit_outer - logit_inner) / (radius * radius - 1.0);
    const double b = logit_inner - ws2;
    const double alpha = ws2 / (-b);
    const double lower = 1.0 / (radius * radius);
    if (!(b < 0.0) || alpha < lower || alpha > 1.0) {
        throw InfeasibleError("quad_perfect_init: targets give alpha = " + std::to_string(alpha) +
                              " outside [1/R^2, 1]");
    }

    Matrix gaussian(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < gaussian.size(); ++i) gaussian.data()[i] = stream.normal();
    const Eigen::HouseholderQR<Matrix> qr(gaussian);
    const Matrix q = qr.householderQ() * Matrix::Identity(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(n));

    QuadraticNet net;
    net.w = 1.0;
    net.w1 = std::sqrt(ws2) * q;
    net.b = b;
    return net;
}

QuadForwardCache quad_forward(const QuadraticNet& net, const Matrix& batch) {
    check_dim(net, batch.cols());
    QuadForwardCache cache;
    cache.owner = &net;
    cache.input = batch;
    cache.hidden = batch * net.w1.transpose();
    cache.logits = (net.w * cache.hidden.rowwise().squaredNorm()).array() + net.b;
    return cache;
}

QuadGradients quad_backward(const QuadraticNet& net, const QuadForwardCache& cache,
                            std::span<const int> labels) {
    if (cache.owner != &net || cache.hidden.cols() != net.w1.rows() || cache.input.cols() != net.w1.cols()) {
        throw StaleCacheError("quad_backward: cache was produced by a different network");
    }
    const Eigen::Index batch = cache.logits.size();
    if (static_cast<Eigen::Index>(labels.size()) != batch) {
        throw StaleCacheError("quad_backward: label count does not match cached batch");
    }
    Vector dlogit(batch);
    for (Eigen::Index i = 0; i < batch; ++i) {
        dlogit[i] = sigmoid_ce_grad(cache.logits[i], labels[static_cast<std::size_t>(i)]) /
                    static_cast<double>(batch);
    }
    QuadGradients g;
    const Matrix scaled = dlogit.asDiagonal() * cache.hidden;  // B × h
    g.w1 = (2.0 * net.w) * (scaled.transpose() * cache.input);
    g.w = dlogit.dot(cache.hidden.rowwise().squaredNorm());
    g.b = dlogit.sum();
    return g;
}

}  // namespace spheres
