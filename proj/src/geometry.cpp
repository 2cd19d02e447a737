#include "spheres/geometry.hpp"

#include "spheres/error.hpp"
#include "spheres/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <ostream>

namespace spheres {

namespace {

constexpr std::size_t kShard = 1U << 16;

CltEstimate clt_from_moments(double mean, double sum_sq, std::size_t dims, Shell shell) {
    CltEstimate e;
    e.mean = mean;
    e.stddev = std::sqrt(2.0 * sum_sq);
    e.small_n = dims < 30;
    if (e.stddev == 0.0) {
        e.rate = shell == Shell::Inner ? (mean > 0.0 ? 1.0 : 0.0) : (mean < 0.0 ? 1.0 : 0.0);
        return e;
    }
    const double z = mean / e.stddev;
    e.rate = shell == Shell::Inner ? normal_cdf(z) : normal_cdf(-z);
    return e;
}

}  // namespace

CltEstimate clt_error_rate_gamma(std::span<const double> gammas, Shell shell) {
    double mean = 0.0;
    double sum_sq = 0.0;
    for (double g : gammas) {
        mean += g - 1.0;
        sum_sq += (g - 1.0) * (g - 1.0);
    }
    return clt_from_moments(mean, sum_sq, gammas.size(), shell);
}

CltEstimate clt_error_rate(const AlphaSpectrum& spectrum, Shell shell) {
    const double scale = shell == Shell::Inner ? 1.0 : spectrum.radius * spectrum.radius;
    std::vector<double> gammas(static_cast<std::size_t>(spectrum.alphas.size()));
    for (std::size_t i = 0; i < gammas.size(); ++i) gammas[i] = scale * spectrum.alphas[static_cast<Eigen::Index>(i)];
    return clt_error_rate_gamma(gammas, shell);
}

double mc_error_rate(const AlphaSpectrum& spectrum, Shell shell, std::size_t samples, RngStream& stream) {
    if (samples < 1000) throw DomainError("mc_error_rate: needs at least 1000 samples");
    const auto n = static_cast<std::size_t>(spectrum.alphas.size());
    if (n == 0) throw DomainError("mc_error_rate: empty spectrum");
    const double scale = shell == Shell::Inner ? 1.0 : spectrum.radius * spectrum.radius;
    const Vector gamma = scale * spectrum.alphas;

    // Shards hang off one draw so repeated calls on a stream see new points.
    const std::uint64_t base = stream.next_u64();
    std::size_t errors = 0;
    for (std::size_t shard = 0, done = 0; done < samples; ++shard, done += kShard) {
        RngStream s = stream.substream(base + shard);
        const std::size_t count = std::min(kShard, samples - done);
        for (std::size_t k = 0; k < count; ++k) {
            double norm2 = 0.0;
            double weighted = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double z = s.normal();
                norm2 += z * z;
                weighted += gamma[static_cast<Eigen::Index>(i)] * z * z;
            }
            // Σγu² vs 1 with u = z/‖z‖, i.e. Σγz² vs ‖z‖².
            if (shell == Shell::Inner ? weighted > norm2 : weighted < norm2) ++errors;
        }
    }
    return static_cast<double>(errors) / static_cast<double>(samples);
}

double theorem_bound(double mu, std::size_t n) {
    if (!(mu > 0.0 && mu <= 0.5)) throw DomainError("theorem_bound: mu must lie in (0, 0.5]");
    if (n == 0) throw DomainError("theorem_bound: n must be positive");
    if (mu == 0.5) return 0.0;
    return -normal_quantile(mu) / std::sqrt(static_cast<double>(n));
}

CapSpec make_cap(std::size_t n, double mu) {
    if (!(mu > 0.0 && mu <= 0.5)) throw DomainError("cap: mu must lie in (0, 0.5]");
    if (n < 2) throw DomainError("cap: n must be at least 2");
    CapSpec c;
    c.n = n;
    c.mu = mu;
    c.alpha = mu == 0.5 ? 0.0 : -normal_quantile(mu);
    c.t = c.alpha / std::sqrt(static_cast<double>(n));
    return c;
}

double cap_distance(double x1, double t, CapFormula formula) {
    if (x1 >= t) return 0.0;
    if (formula == CapFormula::Paper) return std::numbers::sqrt2 * (t - x1);
    const double dx = t - x1;
    const double dr = std::sqrt(std::max(0.0, 1.0 - t * t)) - std::sqrt(std::max(0.0, 1.0 - x1 * x1));
    return std::sqrt(dx * dx + dr * dr);
}

Vector sphere_first_coordinates(std::size_t n, std::size_t samples, RngStream& stream) {
    if (n < 2) throw DomainError("sphere_first_coordinates: n must be at least 2");
    Vector out(static_cast<Eigen::Index>(samples));
    const std::uint64_t base = stream.next_u64();
    for (std::size_t shard = 0, done = 0; done < samples; ++shard, done += kShard) {
        RngStream s = stream.substream(base + shard);
        const std::size_t count = std::min(kShard, samples - done);
        for (std::size_t k = 0; k < count; ++k) {
            const double z1 = s.normal();
            double norm2 = z1 * z1;
            for (std::size_t i = 1; i < n; ++i) {
                const double z = s.normal();
                norm2 += z * z;
            }
            out[static_cast<Eigen::Index>(done + k)] = z1 / std::sqrt(norm2);
        }
    }
    return out;
}

namespace {

double mean_cap_distance(const Vector& x1, double t, CapFormula formula) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < x1.size(); ++i) total += cap_distance(x1[i], t, formula);
    return total / static_cast<double>(x1.size());
}

}  // namespace

double mc_cap_distance(const CapSpec& cap, std::size_t samples, RngStream& stream, CapFormula formula) {
    if (samples < 10000) throw DomainError("mc_cap_distance: needs at least 10^4 samples");
    return mean_cap_distance(sphere_first_coordinates(cap.n, samples, stream), cap.t, formula);
}

BoundCurve bound_curve(std::size_t n, std::span<const double> mus, std::size_t samples, RngStream& stream) {
    if (samples < 10000) throw DomainError("bound_curve: needs at least 10^4 samples");
    std::vector<CapSpec> caps;
    for (double mu : mus) caps.push_back(make_cap(n, mu));
    BoundCurve curve;
    curve.n = n;
    curve.samples = samples;
    const Vector x1 = sphere_first_coordinates(n, samples, stream);
    for (const CapSpec& cap : caps) {
        BoundPoint p;
        p.mu = cap.mu;
        p.t = cap.t;
        p.d_theory = theorem_bound(cap.mu, n);
        p.d_paper = mean_cap_distance(x1, cap.t, CapFormula::Paper);
        p.d_chord = mean_cap_distance(x1, cap.t, CapFormula::ExactChord);
        curve.points.push_back(p);
    }
    return curve;
}

void write_bound_curve_csv(std::ostream& os, const BoundCurve& curve) {
    os << "mu,t,d_theory,d_mc_paper,d_mc_exact_chord\n";
    os.precision(17);
    for (const BoundPoint& p : curve.points) {
        os << p.mu << ',' << p.t << ',' << p.d_theory << ',' << p.d_paper << ',' << p.d_chord << '\n';
    }
}

// ---------------------------------------------------------------------------

namespace {

// z-scores of the two CLT error rates for threshold b: error = Φ(z).
// γ = s/b on k coordinates (s = 1 inner, R² outer) and 0 on the other n − k.
std::pair<double, double> subspace_z(std::size_t n, std::size_t k, double radius, double b) {
    const double kk = static_cast<double>(k);
    const double rest = static_cast<double>(n - k);
    auto moments = [&](double scale) {
        const double g = scale / b - 1.0;
        return std::pair{kk * g - rest, std::sqrt(2.0 * (kk * g * g + rest))};
    };
    const auto [mi, si] = moments(1.0);
    const auto [mo, so] = moments(radius * radius);
    return {mi / si, -mo / so};
}

}  // namespace

SubspaceResult subspace_classifier(std::size_t n, std::size_t k, double radius) {
    if (k < 1 || k > n) throw DomainError("subspace_classifier: k must lie in [1, n]");
    if (!(radius > 1.0)) throw DomainError("subspace_classifier: radius must exceed 1");
    const double base = static_cast<double>(k) / static_cast<double>(n);
    double lo = std::log(base);
    double hi = std::log(radius * radius * base);
    // z_inner − z_outer falls as b grows: positive at b = k/n, negative at R²k/n.
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const auto [zi, zo] = subspace_z(n, k, radius, std::exp(mid));
        if (zi > zo) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    SubspaceResult r;
    r.n = n;
    r.k = k;
    r.b = std::exp(0.5 * (lo + hi));
    r.fraction = static_cast<double>(k) / static_cast<double>(n);
    const auto [zi, zo] = subspace_z(n, k, radius, r.b);
    r.inner_error = normal_cdf(zi);
    r.outer_error = normal_cdf(zo);
    return r;
}

SubspaceResult minimal_subspace_fraction(std::size_t n, double target_error, double radius) {
    if (!(target_error > 0.0 && target_error < 0.5)) {
        throw DomainError("minimal_subspace_fraction: target error must lie in (0, 0.5)");
    }
    if (n < 30) throw DomainError("minimal_subspace_fraction: n must be at least 30");
    for (std::size_t k = 1; k <= n; ++k) {
        SubspaceResult r = subspace_classifier(n, k, radius);
        if (std::max(r.inner_error, r.outer_error) <= target_error) return r;
    }
    throw InfeasibleError("minimal_subspace_fraction: even k = n misses the target error");
}

void write_subspace_csv(std::ostream& os, std::span<const double> targets, std::span<const SubspaceResult> rows) {
    os << "target_error,k,fraction,b,inner_error,outer_error\n";
    os.precision(17);
    for (std::size_t i = 0; i < rows.size() && i < targets.size(); ++i) {
        const SubspaceResult& r = rows[i];
        os << targets[i] << ',' << r.k << ',' << r.fraction << ',' << r.b << ',' << r.inner_error << ','
           << r.outer_error << '\n';
    }
}

// ---------------------------------------------------------------------------

std::pair<double, std::size_t> tail_threshold(const Vector& projections, double tail_fraction) {
    if (!(tail_fraction > 0.0 && tail_fraction < 0.5)) {
        throw DomainError("halfspace: tail fraction must lie in (0, 0.5)");
    }
    const auto total = static_cast<std::size_t>(projections.size());
    if (total < 2) throw DomainError("halfspace: need at least two training points");
    const auto m = static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(total)));
    std::vector<double> sorted(projections.data(), projections.data() + total);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double b = sorted[m];  // (m+1)-th largest
    if (sorted[m - 1] == b) b = std::nextafter(b, -std::numeric_limits<double>::infinity());
    const auto count =
        static_cast<std::size_t>(std::count_if(sorted.begin(), sorted.end(), [b](double p) { return p > b; }));
    return {b, count};
}

HalfspaceSet pca_halfspace(const Matrix& train, double tail_fraction, std::size_t component) {
    if (!(tail_fraction > 0.0 && tail_fraction < 0.5)) {
        throw DomainError("pca_halfspace: tail fraction must lie in (0, 0.5)");
    }
    const PrincipalComponents pcs = top_principal_components(train, component + 1);
    const Vector dir = pcs.directions.row(static_cast<Eigen::Index>(component)).transpose().normalized();

    HalfspaceSet best;
    double best_d = -1.0;
    for (double sign : {1.0, -1.0}) {
        HalfspaceSet hs;
        hs.w = sign * dir;
        const Vector proj = train * hs.w;
        const auto [b, count] = tail_threshold(proj, tail_fraction);
        hs.b = b;
        hs.tail_count = count;
        hs.component = component;
        hs.tail_fraction = tail_fraction;
        hs.train_size = static_cast<std::size_t>(train.rows());
        const double d = (b - proj.array()).cwiseMax(0.0).mean();
        if (d > best_d) {
            best_d = d;
            best = std::move(hs);
        }
    }
    return best;
}

double halfspace_distance(const HalfspaceSet& hs, const Eigen::Ref<const Vector>& x) {
    return std::max(hs.b - hs.w.dot(x), 0.0) / hs.w.norm();
}

ErrorSetStats halfspace_stats(const HalfspaceSet& hs, const Matrix& test) {
    if (test.cols() != hs.w.size()) throw DimensionError("halfspace_stats: dimension mismatch");
    if (test.rows() == 0) throw DomainError("halfspace_stats: empty test set");
    const Vector proj = test * hs.w;
    const double wn = hs.w.norm();
    ErrorSetStats s;
    s.n = static_cast<std::size_t>(hs.w.size());
    s.model_tag = "halfspace/pc" + std::to_string(hs.component);
    std::size_t inside = 0;
    double total = 0.0;
    s.distances.reserve(static_cast<std::size_t>(proj.size()));
    for (Eigen::Index i = 0; i < proj.size(); ++i) {
        if (proj[i] > hs.b) ++inside;
        const double d = std::max(hs.b - proj[i], 0.0) / wn;
        s.distances.push_back(d);
        total += d;
    }
    s.successes = static_cast<std::size_t>(proj.size());
    s.mu = static_cast<double>(inside) / static_cast<double>(proj.size());
    s.dmean = total / static_cast<double>(proj.size());
    return s;
}

}  // namespace spheres
