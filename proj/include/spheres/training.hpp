#pragma once

// Adam, the training loop over online or fixed data, and Monte Carlo error
// rates with a 95% upper bound.

#include "spheres/attack.hpp"
#include "spheres/dataset.hpp"
#include "spheres/models.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spheres {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::uint64_t t = 0;
    std::vector<Vector> m;  ///< first moments, one per parameter block
    std::vector<Vector> v;  ///< second moments
};

/// Bias-corrected Adam update in place. Moments are allocated on the first
/// call; afterwards block count and sizes must match or DimensionError is thrown
/// (before anything is modified).
void adam_step(std::span<ParamBlock> params, const std::vector<Vector>& grads, AdamState& state);

// Stream indices used by train(), all keyed by TrainConfig::seed.
inline constexpr std::uint64_t kInitStream = 0x696e'0000ULL;  ///< model initialisation (callers)
inline constexpr std::uint64_t kMinibatchStream = 0x6d62'0000ULL;
inline constexpr std::uint64_t kEvalStream = 0x6576'0000ULL;
inline constexpr std::uint64_t kProbeStream = 0x7072'0000ULL;
inline constexpr std::uint64_t kDistanceProbeStream = 0x6470'0000ULL;

struct TrainConfig {
    std::size_t batch = 50;
    std::size_t steps = 0;
    AdamConfig adam;
    /// Null trains online (fresh minibatch per step). Otherwise minibatches are
    /// drawn uniformly with replacement from this set.
    std::shared_ptr<const FixedDataset> fixed;
    std::uint64_t seed = 0;
    /// Record metrics at step 0, every `metrics_every` steps, and at the end.
    /// Zero records only step 0 and the end.
    std::size_t metrics_every = 1000;
    /// Fresh samples for eval loss / error at each record. The same points are
    /// reused at every record so successive values are comparable.
    std::size_t eval_samples = 2000;
    /// Worst-mode attack from `starts` fixed points of both shells; the record
    /// gets the max final loss over the probe.
    std::optional<AttackConfig> worst_case_probe;
    /// Nearest-mode attack from fixed inner-shell points; the record gets dmean.
    std::optional<AttackConfig> distance_probe;
    /// Quadratic nets only: stop as soon as every α lies in [1/R², 1].
    bool stop_when_perfect = false;
    /// Cadence of the perfection check; zero means at metric records only.
    std::size_t perfection_check_every = 0;

    void validate(const Model& model, const SphereConfig& sphere) const;
};

struct MetricsRecord {
    std::uint64_t step = 0;
    std::optional<double> train_loss;  ///< mean over the steps since the previous record
    double eval_loss = 0.0;
    double eval_error = 0.0;
    std::optional<double> worst_case_loss;
    std::optional<std::size_t> worst_case_errors;
    std::optional<double> mean_attack_distance;
    std::optional<std::size_t> attack_failures;
    std::optional<std::size_t> alpha_violations;
};

struct TrainAbort {
    std::uint64_t step = 0;        ///< the step whose loss or gradient was non-finite
    std::uint64_t restored_step = 0;  ///< model was rolled back to this record
    std::string reason;
};

struct TrainResult {
    std::uint64_t steps_run = 0;
    bool stopped_perfect = false;
    std::optional<TrainAbort> abort;
    std::vector<MetricsRecord> metrics;
};

/// Trains `model` in place. `on_record` (optional) sees each record as it is
/// produced. On a non-finite loss or gradient the update is skipped, the model
/// is rolled back to its state at the last metrics record, and the result
/// carries the diagnostic. Fully deterministic given the config.
TrainResult train(Model& model, const TrainConfig& config, const SphereConfig& sphere,
                  const std::function<void(const MetricsRecord&)>& on_record = {});

/// Snapshot of probe/eval quantities for `model` at `step`, using the streams
/// train() uses. Exposed so callers can score checkpoints the same way.
MetricsRecord measure(const Model& model, const TrainConfig& config, const SphereConfig& sphere,
                      std::uint64_t step);

struct ErrorRateEstimate {
    std::size_t inner_errors = 0;
    std::size_t inner_samples = 0;
    std::size_t outer_errors = 0;
    std::size_t outer_samples = 0;
    std::size_t errors = 0;
    std::size_t samples = 0;
    double rate = 0.0;
    /// 3/samples when errors = 0 (rule of three), else the Wilson score upper
    /// limit at 95%. Never above 1.
    double upper95 = 1.0;
};

/// Misclassification count over `samples` fair-coin sphere draws.
ErrorRateEstimate evaluate_error_rate(const Model& model, const SphereConfig& sphere, std::size_t samples,
                                      RngStream& stream);

/// 95% upper confidence limit for a binomial rate as used by evaluate_error_rate.
double rate_upper95(std::size_t errors, std::size_t samples);

// Metrics stream: JSON Lines, one object per record:
//   {"schema":"spheres.metrics","version":1,"step":N,"train_loss":x|null,
//    "eval_loss":x,"eval_error":x,"worst_case_loss":x|null,"worst_case_errors":k|null,
//    "mean_attack_distance":x|null,"attack_failures":k|null,"alpha_violations":k|null}
// An abort appends {"schema":..., "version":1, "event":"abort", "step":N,
// "restored_step":M, "reason":"..."}.
inline constexpr int kMetricsVersion = 1;
nlohmann::ordered_json metrics_to_json(const MetricsRecord& record);
nlohmann::ordered_json abort_to_json(const TrainAbort& abort);
void write_metrics_line(std::ostream& os, const nlohmann::ordered_json& line);

}  // namespace spheres
