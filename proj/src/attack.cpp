#include "spheres/attack.hpp"

#include "spheres/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace spheres {

AttackConfig AttackConfig::worst_case() {
    AttackConfig c;
    c.steps = 1000;
    c.step_size = 0.01;
    c.mode = AttackMode::Worst;
    return c;
}

AttackConfig AttackConfig::distance_estimation() {
    AttackConfig c;
    c.steps = 1000;
    c.step_size = 0.001;
    c.mode = AttackMode::Nearest;
    c.starts = 100;
    return c;
}

void AttackConfig::validate() const {
    if (steps < 1) throw DomainError("AttackConfig: steps must be at least 1");
    if (!(step_size > 0.0) || !std::isfinite(step_size)) throw DomainError("AttackConfig: step size must be positive");
}

std::vector<AttackResult> manifold_pgd_batch(const Model& model, const Matrix& starts, std::span<const int> labels,
                                             const AttackConfig& config) {
    config.validate();
    if (static_cast<std::size_t>(starts.cols()) != model.input_dim()) {
        throw DimensionError("manifold_pgd: start dimension does not match the model");
    }
    const Eigen::Index rows = starts.rows();
    if (static_cast<Eigen::Index>(labels.size()) != rows) {
        throw DimensionError("manifold_pgd: one label per start is required");
    }

    std::vector<AttackResult> results(static_cast<std::size_t>(rows));
    Matrix x = starts;
    Vector radius(rows);
    std::vector<double> best_loss(static_cast<std::size_t>(rows), -1.0);
    Matrix best_x = starts;
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < rows; ++i) {
        radius[i] = starts.row(i).norm();
        if (!(radius[i] > 0.0)) throw DomainError("manifold_pgd: start point must be nonzero");
        AttackResult& r = results[static_cast<std::size_t>(i)];
        r.label = labels[static_cast<std::size_t>(i)];
        r.start = starts.row(i).transpose();
        active.push_back(i);
    }

    const bool nearest = config.mode == AttackMode::Nearest;
    auto finish = [&](Eigen::Index i, std::size_t step, double current_loss, double current_logit, bool stationary) {
        AttackResult& r = results[static_cast<std::size_t>(i)];
        r.steps_used = step;
        r.stationary = stationary;
        if (nearest) {
            r.adversarial = x.row(i).transpose();
            r.final_loss = current_loss;
            r.found = predicted_class(current_logit) != r.label;
        } else {
            r.adversarial = best_x.row(i).transpose();
            r.final_loss = best_loss[static_cast<std::size_t>(i)];
            const Vector logit = model.logits(best_x.row(i));
            r.found = predicted_class(logit[0]) != r.label;
        }
        r.distance = (r.adversarial - r.start).norm();
    };

    Matrix batch, grad;
    for (std::size_t step = 0; !active.empty(); ++step) {
        batch.resize(static_cast<Eigen::Index>(active.size()), x.cols());
        for (std::size_t k = 0; k < active.size(); ++k) batch.row(static_cast<Eigen::Index>(k)) = x.row(active[k]);
        const Vector logits = model.logit_gradients(batch, grad);

        std::vector<Eigen::Index> still_active;
        still_active.reserve(active.size());
        for (std::size_t k = 0; k < active.size(); ++k) {
            const Eigen::Index i = active[k];
            const auto ki = static_cast<Eigen::Index>(k);
            const int y = results[static_cast<std::size_t>(i)].label;
            const double loss = sigmoid_ce_loss(logits[ki], y);

            if (nearest && predicted_class(logits[ki]) != y) {
                finish(i, step, loss, logits[ki], false);
                continue;
            }
            if (!nearest && loss > best_loss[static_cast<std::size_t>(i)]) {
                best_loss[static_cast<std::size_t>(i)] = loss;
                best_x.row(i) = x.row(i);
            }
            if (step == config.steps) {
                finish(i, step, loss, logits[ki], false);
                continue;
            }

            // Loss ascent direction: +∇logit for the inner label, −∇logit for the outer.
            const Vector dir = (y == 0 ? 1.0 : -1.0) * grad.row(ki).transpose();
            const Vector xi = x.row(i).transpose();
            const double r2 = radius[i] * radius[i];
            const Vector tangent = dir - (dir.dot(xi) / r2) * xi;
            const double tnorm = tangent.norm();
            if (!std::isfinite(tnorm) || !(tnorm > 1e-12 * dir.norm())) {
                finish(i, step, loss, logits[ki], true);
                continue;
            }
            Vector next = xi + (config.step_size / tnorm) * tangent;
            next *= radius[i] / next.norm();
            AttackResult& r = results[static_cast<std::size_t>(i)];
            r.max_norm_drift = std::max(r.max_norm_drift, std::abs(next.norm() - radius[i]) / radius[i]);
            x.row(i) = next.transpose();
            still_active.push_back(i);
        }
        active.swap(still_active);
    }
    return results;
}

AttackResult manifold_pgd(const Model& model, const Sample& sample, const AttackConfig& config) {
    const int labels[] = {sample.label};
    return manifold_pgd_batch(model, sample.x.transpose(), labels, config).front();
}

ErrorSetStats estimate_mean_distance(const Model& model, const SphereConfig& sphere, const AttackConfig& config,
                                     RngStream& stream) {
    if (config.mode != AttackMode::Nearest) {
        throw DomainError("estimate_mean_distance: attack must run in nearest mode");
    }
    if (config.starts < 1) throw DomainError("estimate_mean_distance: need at least one start");
    if (model.input_dim() != sphere.n) throw DimensionError("estimate_mean_distance: model/sphere dimension mismatch");

    const Matrix starts = sample_shell_batch(sphere, config.shell, config.starts, stream);
    const std::vector<int> labels(config.starts, static_cast<int>(config.shell));
    const std::vector<AttackResult> runs = manifold_pgd_batch(model, starts, labels, config);

    ErrorSetStats stats;
    stats.n = sphere.n;
    stats.model_tag = to_string(model.family());
    double total = 0.0;
    for (const AttackResult& r : runs) {
        if (r.found) {
            ++stats.successes;
            stats.distances.push_back(r.distance);
            total += r.distance;
        } else {
            ++stats.failures;
        }
    }
    if (stats.successes > 0) stats.dmean = total / static_cast<double>(stats.successes);
    return stats;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

DistanceHistogram histogram_from_stats(const ErrorSetStats& stats, std::size_t bins) {
    if (bins < 1) throw DomainError("distance histogram: need at least one bin");
    DistanceHistogram h;
    h.successes = stats.successes;
    h.failures = stats.failures;
    h.counts.assign(bins, 0);
    if (stats.distances.empty()) {
        h.edges.assign(bins + 1, 0.0);
        return h;
    }
    std::vector<double> sorted = stats.distances;
    std::sort(sorted.begin(), sorted.end());
    const double top = sorted.back() > 0.0 ? sorted.back() : 1.0;
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = top * static_cast<double>(i) / static_cast<double>(bins);
    for (double d : sorted) {
        const auto idx = static_cast<std::size_t>(d / top * static_cast<double>(bins));
        ++h.counts[std::min(idx, bins - 1)];
    }
    double sum = 0.0;
    for (double d : sorted) sum += d;
    h.mean = sum / static_cast<double>(sorted.size());
    if (sorted.size() > 1) {
        double ss = 0.0;
        for (double d : sorted) ss += (d - h.mean) * (d - h.mean);
        h.stddev = std::sqrt(ss / static_cast<double>(sorted.size() - 1));
    }
    h.q1 = quantile_sorted(sorted, 0.25);
    h.median = quantile_sorted(sorted, 0.5);
    h.q3 = quantile_sorted(sorted, 0.75);
    return h;
}

DistanceHistogram distance_distribution(const Model& model, const SphereConfig& sphere, const AttackConfig& config,
                                        std::size_t bins, RngStream& stream) {
    if (config.starts < 100) throw DomainError("distance_distribution: needs at least 100 starts");
    return histogram_from_stats(estimate_mean_distance(model, sphere, config, stream), bins);
}

SliceGrid slice_grid(const Model& model, const Vector& center, const Vector& u, const Vector& v, double extent,
                     std::size_t resolution, double outer_radius) {
    const auto n = static_cast<Eigen::Index>(model.input_dim());
    if (center.size() != n || u.size() != n || v.size() != n) {
        throw DimensionError("slice_grid: center and basis must match the model dimension");
    }
    if (resolution < 2) throw DomainError("slice_grid: resolution must be at least 2");
    if (!(extent > 0.0)) throw DomainError("slice_grid: extent must be positive");

    SliceGrid g;
    const double un = u.norm();
    if (!(un > 0.0)) throw DomainError("slice_grid: degenerate basis (zero u)");
    g.u = u / un;
    Vector w = v - g.u.dot(v) * g.u;
    const double wn = w.norm();
    if (!(wn > 1e-10 * v.norm()) || !(v.norm() > 0.0)) {
        throw DomainError("slice_grid: degenerate basis (u and v are parallel)");
    }
    g.v = w / wn;
    g.center = center;
    g.extent = extent;
    g.resolution = resolution;
    g.inner_radius = 1.0;
    g.outer_radius = outer_radius;

    const std::size_t total = resolution * resolution;
    g.a.reserve(total);
    g.b.reserve(total);
    for (std::size_t i = 0; i < resolution; ++i) {
        const double a = -extent + 2.0 * extent * static_cast<double>(i) / static_cast<double>(resolution - 1);
        for (std::size_t j = 0; j < resolution; ++j) {
            const double b = -extent + 2.0 * extent * static_cast<double>(j) / static_cast<double>(resolution - 1);
            g.a.push_back(a);
            g.b.push_back(b);
        }
    }
    constexpr std::size_t chunk = 2048;
    for (std::size_t lo = 0; lo < total; lo += chunk) {
        const std::size_t hi = std::min(total, lo + chunk);
        Matrix pts(static_cast<Eigen::Index>(hi - lo), n);
        for (std::size_t k = lo; k < hi; ++k) {
            pts.row(static_cast<Eigen::Index>(k - lo)) = (center + g.a[k] * g.u + g.b[k] * g.v).transpose();
        }
        const Vector logits = model.logits(pts);
        for (Eigen::Index k = 0; k < logits.size(); ++k) {
            g.logit.push_back(logits[k]);
            g.cls.push_back(predicted_class(logits[k]));
        }
    }
    return g;
}

void write_slice_csv(std::ostream& os, const SliceGrid& grid) {
    os << "a,b,class,logit\n";
    os.precision(17);
    for (std::size_t k = 0; k < grid.a.size(); ++k) {
        os << grid.a[k] << ',' << grid.b[k] << ',' << grid.cls[k] << ',' << grid.logit[k] << '\n';
    }
}

void write_histogram_csv(std::ostream& os, const DistanceHistogram& hist) {
    os << "bin_lo,bin_hi,count\n";
    os.precision(17);
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        os << hist.edges[i] << ',' << hist.edges[i + 1] << ',' << hist.counts[i] << '\n';
    }
}

}  // namespace spheres
