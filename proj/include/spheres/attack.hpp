#pragma once

// The manifold attack: loss ascent restricted to the shell of the starting
// point, plus the d(E) estimators built on it and 2-D decision slices.

#include "spheres/dataset.hpp"
#include "spheres/models.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spheres {

enum class AttackMode {
    Nearest,  ///< stop at the first misclassified iterate
    Worst,    ///< run every step, keep the highest-loss iterate
};

struct AttackConfig {
    std::size_t steps = 1000;
    double step_size = 0.01;
    AttackMode mode = AttackMode::Nearest;
    std::size_t starts = 100;
    std::uint64_t seed = 0;
    Shell shell = Shell::Inner;  ///< shell that random starts are drawn from

    /// Worst-case search preset: 1000 steps of size 0.01, worst mode.
    static AttackConfig worst_case();
    /// d(E) estimation preset: 1000 steps of size 0.001, nearest mode, 100 starts.
    static AttackConfig distance_estimation();

    void validate() const;
};

struct AttackResult {
    bool found = false;       ///< the returned iterate is misclassified
    bool stationary = false;  ///< stopped on a zero tangential gradient
    int label = 0;
    Vector start;
    Vector adversarial;       ///< last (nearest) or highest-loss (worst) iterate
    double distance = 0.0;    ///< ‖adversarial − start‖₂
    std::size_t steps_used = 0;
    double final_loss = 0.0;  ///< loss at `adversarial`
    double max_norm_drift = 0.0;  ///< max over iterates of |‖x̂‖ − r| / r
};

/// One manifold PGD run from `sample`.
///
/// Each iteration projects the ascent direction ±∇logit onto the tangent
/// space of the shell, takes a step of length `step_size` along it, and
/// rescales the iterate back to the start's norm. A zero tangential
/// gradient ends the run as a failure with `stationary` set.
AttackResult manifold_pgd(const Model& model, const Sample& sample, const AttackConfig& config);

/// Runs manifold_pgd independently on every row of `starts`, sharing batched
/// model evaluations. Result i depends only on row i.
std::vector<AttackResult> manifold_pgd_batch(const Model& model, const Matrix& starts,
                                             std::span<const int> labels, const AttackConfig& config);

struct ErrorSetStats {
    std::optional<double> mu;       ///< error-rate estimate, filled in by the caller
    std::optional<double> mu_upper95;
    std::optional<double> dmean;    ///< unset when every start failed
    std::size_t successes = 0;
    std::size_t failures = 0;
    std::size_t n = 0;
    std::string model_tag;
    std::vector<double> distances;  ///< per successful start, in start order

    std::size_t starts() const { return successes + failures; }
    bool all_failed() const { return successes == 0; }
};

/// Nearest-mode attacks from `config.starts` points of `config.shell`,
/// drawn from `stream`. Failures are counted, never averaged in.
/// Throws DomainError unless config.mode is Nearest.
ErrorSetStats estimate_mean_distance(const Model& model, const SphereConfig& sphere, const AttackConfig& config,
                                     RngStream& stream);

struct DistanceHistogram {
    std::vector<double> edges;  ///< bins + 1 edges on [0, max distance]
    std::vector<std::size_t> counts;
    std::size_t successes = 0;
    std::size_t failures = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;

    bool empty() const { return successes == 0; }
};

/// Histogram of per-start nearest-error distances. Needs at least 100 starts.
/// Quartiles use linear interpolation between order statistics.
DistanceHistogram distance_distribution(const Model& model, const SphereConfig& sphere, const AttackConfig& config,
                                        std::size_t bins, RngStream& stream);
DistanceHistogram histogram_from_stats(const ErrorSetStats& stats, std::size_t bins);

struct SliceGrid {
    Vector center;
    Vector u;  ///< orthonormalised first basis vector
    Vector v;  ///< orthonormalised second basis vector
    double extent = 0.0;
    std::size_t resolution = 0;
    std::vector<double> a, b, logit;
    std::vector<int> cls;
    double inner_radius = 1.0;
    double outer_radius = 1.3;
};

/// Evaluates the model on center + a·u + b·v for a, b on a resolution ×
/// resolution grid over [−extent, extent]. u and v are Gram–Schmidt
/// orthonormalised; components of `center` are kept as given. Throws
/// DomainError when u and v are (numerically) parallel.
SliceGrid slice_grid(const Model& model, const Vector& center, const Vector& u, const Vector& v, double extent,
                     std::size_t resolution, double outer_radius);

/// CSV: header "a,b,class,logit", one row per grid point, a-major.
void write_slice_csv(std::ostream& os, const SliceGrid& grid);
/// CSV: header "bin_lo,bin_hi,count".
void write_histogram_csv(std::ostream& os, const DistanceHistogram& hist);

}  // namespace spheres
