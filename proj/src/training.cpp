#include "spheres/training.hpp"

#include "spheres/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace spheres {

void adam_step(std::span<ParamBlock> params, const std::vector<Vector>& grads, AdamState& state) {
    if (grads.size() != params.size()) {
        throw DimensionError("adam_step: " + std::to_string(grads.size()) + " gradient blocks for " +
                             std::to_string(params.size()) + " parameter blocks");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (static_cast<std::size_t>(grads[i].size()) != params[i].values.size()) {
            throw DimensionError("adam_step: gradient shape mismatch for '" + params[i].name + "'");
        }
    }
    if (state.m.empty() && state.t == 0) {
        for (const ParamBlock& p : params) {
            state.m.push_back(Vector::Zero(static_cast<Eigen::Index>(p.values.size())));
            state.v.push_back(Vector::Zero(static_cast<Eigen::Index>(p.values.size())));
        }
    }
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw DimensionError("adam_step: optimizer state has the wrong number of blocks");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (static_cast<std::size_t>(state.m[i].size()) != params[i].values.size()) {
            throw DimensionError("adam_step: optimizer state shape mismatch for '" + params[i].name + "'");
        }
    }

    const AdamConfig& c = state.config;
    ++state.t;
    const double t = static_cast<double>(state.t);
    const double step = c.lr * std::sqrt(1.0 - std::pow(c.beta2, t)) / (1.0 - std::pow(c.beta1, t));
    // eps is applied to the bias-corrected second moment, as in the reference algorithm.
    const double eps_hat = c.eps * std::sqrt(1.0 - std::pow(c.beta2, t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Eigen::Map<Vector> p(params[i].values.data(), static_cast<Eigen::Index>(params[i].values.size()));
        Vector& m = state.m[i];
        Vector& v = state.v[i];
        m = c.beta1 * m + (1.0 - c.beta1) * grads[i];
        v = c.beta2 * v + (1.0 - c.beta2) * grads[i].cwiseAbs2();
        p.array() -= step * m.array() / (v.array().sqrt() + eps_hat);
    }
}

void TrainConfig::validate(const Model& model, const SphereConfig& sphere) const {
    sphere.validate();
    if (model.input_dim() != sphere.n) {
        throw DimensionError("train: model dimension " + std::to_string(model.input_dim()) +
                             " does not match sphere dimension " + std::to_string(sphere.n));
    }
    if (batch < 1) throw DomainError("train: batch size must be positive");
    if (model.family() == Family::Mlp && batch < 2) {
        throw DomainError("train: batch-norm models need a batch of at least 2");
    }
    if (!(adam.lr > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
        !(adam.eps > 0.0)) {
        throw DomainError("train: invalid Adam hyperparameters");
    }
    if (eval_samples < 1) throw DomainError("train: eval_samples must be positive");
    if (fixed) {
        if (fixed->size() == 0) throw DomainError("train: fixed dataset is empty");
        if (static_cast<std::size_t>(fixed->x.cols()) != sphere.n) {
            throw DimensionError("train: fixed dataset dimension does not match the sphere");
        }
    }
    if (worst_case_probe) worst_case_probe->validate();
    if (distance_probe) {
        distance_probe->validate();
        if (distance_probe->mode != AttackMode::Nearest) {
            throw DomainError("train: the distance probe must use nearest mode");
        }
    }
}

namespace {

std::optional<std::size_t> alpha_violations(const Model& model, const SphereConfig& sphere) {
    const auto* quad = dynamic_cast<const QuadraticModel*>(&model);
    if (!quad) return std::nullopt;
    if (!(quad->net().b < 0.0)) return sphere.n;  // no ellipsoid: every direction is wrong
    return is_perfect(alpha_spectrum(quad->net(), sphere.radius)).violations;
}

double mean_loss(const Vector& logits, std::span<const int> labels) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) total += sigmoid_ce_loss(logits[i], labels[static_cast<std::size_t>(i)]);
    return total / static_cast<double>(logits.size());
}

bool gradients_finite(const std::vector<Vector>& grads) {
    return std::all_of(grads.begin(), grads.end(), [](const Vector& g) { return all_finite(g); });
}

}  // namespace

MetricsRecord measure(const Model& model, const TrainConfig& config, const SphereConfig& sphere, std::uint64_t step) {
    MetricsRecord r;
    r.step = step;

    RngStream eval_stream(config.seed, kEvalStream);
    const Batch eval = sample_batch(sphere, config.eval_samples, eval_stream);
    const Vector logits = model.logits(eval.x);
    r.eval_loss = mean_loss(logits, eval.labels);
    std::size_t wrong = 0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        if (predicted_class(logits[i]) != eval.labels[static_cast<std::size_t>(i)]) ++wrong;
    }
    r.eval_error = static_cast<double>(wrong) / static_cast<double>(logits.size());

    if (config.worst_case_probe) {
        RngStream probe_stream(config.seed, kProbeStream);
        const Batch starts = sample_batch(sphere, config.worst_case_probe->starts, probe_stream);
        const auto runs = manifold_pgd_batch(model, starts.x, starts.labels, *config.worst_case_probe);
        double worst = 0.0;
        std::size_t found = 0;
        for (const AttackResult& a : runs) {
            worst = std::max(worst, a.final_loss);
            if (a.found) ++found;
        }
        r.worst_case_loss = worst;
        r.worst_case_errors = found;
    }
    if (config.distance_probe) {
        RngStream probe_stream(config.seed, kDistanceProbeStream);
        const ErrorSetStats stats = estimate_mean_distance(model, sphere, *config.distance_probe, probe_stream);
        if (stats.dmean) r.mean_attack_distance = *stats.dmean;
        r.attack_failures = stats.failures;
    }
    r.alpha_violations = alpha_violations(model, sphere);
    return r;
}

TrainResult train(Model& model, const TrainConfig& config, const SphereConfig& sphere,
                  const std::function<void(const MetricsRecord&)>& on_record) {
    config.validate(model, sphere);

    TrainResult result;
    auto record = [&](std::uint64_t step, std::optional<double> train_loss) {
        MetricsRecord r = measure(model, config, sphere, step);
        r.train_loss = train_loss;
        result.metrics.push_back(r);
        if (on_record) on_record(r);
        return r;
    };

    record(0, std::nullopt);
    std::unique_ptr<Model> last_good = model.clone();
    std::uint64_t last_good_step = 0;

    RngStream batch_stream(config.seed, kMinibatchStream);
    AdamState adam{config.adam, 0, {}, {}};
    std::vector<Vector> grads;
    Matrix x(static_cast<Eigen::Index>(config.batch), static_cast<Eigen::Index>(sphere.n));
    std::vector<int> labels(config.batch);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    const std::size_t check_every =
        config.perfection_check_every > 0 ? config.perfection_check_every : config.metrics_every;

    for (std::uint64_t step = 1; step <= config.steps; ++step) {
        if (config.fixed) {
            const FixedDataset& data = *config.fixed;
            for (std::size_t i = 0; i < config.batch; ++i) {
                const std::uint64_t j = batch_stream.below(data.size());
                x.row(static_cast<Eigen::Index>(i)) = data.x.row(static_cast<Eigen::Index>(j));
                labels[i] = data.labels[j];
            }
        } else {
            Batch b = sample_batch(sphere, config.batch, batch_stream);
            x = std::move(b.x);
            labels = std::move(b.labels);
        }

        const double loss = model.train_step_gradients(x, labels, grads);
        if (!std::isfinite(loss) || !gradients_finite(grads)) {
            TrainAbort abort;
            abort.step = step;
            abort.restored_step = last_good_step;
            abort.reason = !std::isfinite(loss) ? "non-finite training loss" : "non-finite gradient";
            std::vector<ParamBlock> dst = model.parameters();
            std::vector<ParamBlock> src = last_good->parameters();
            for (std::size_t i = 0; i < dst.size(); ++i) std::ranges::copy(src[i].values, dst[i].values.begin());
            if (auto* mlp = dynamic_cast<MlpModel*>(&model)) {
                mlp->net() = dynamic_cast<const MlpModel&>(*last_good).net();
            }
            result.abort = abort;
            result.steps_run = step - 1;
            return result;
        }
        std::vector<ParamBlock> blocks = model.parameters();
        adam_step(blocks, grads, adam);
        loss_sum += loss;
        ++loss_count;
        result.steps_run = step;

        const bool at_cadence = config.metrics_every > 0 && step % config.metrics_every == 0;
        bool perfect = false;
        if (config.stop_when_perfect && check_every > 0 && step % check_every == 0) {
            const auto v = alpha_violations(model, sphere);
            perfect = v && *v == 0;
        }
        if (at_cadence || perfect || step == config.steps) {
            record(step, loss_sum / static_cast<double>(loss_count));
            loss_sum = 0.0;
            loss_count = 0;
            last_good = model.clone();
            last_good_step = step;
        }
        if (perfect) {
            result.stopped_perfect = true;
            break;
        }
    }
    return result;
}

double rate_upper95(std::size_t errors, std::size_t samples) {
    if (samples == 0) return 1.0;
    const double n = static_cast<double>(samples);
    if (errors == 0) return std::min(1.0, 3.0 / n);
    const double z = 1.959963984540054;
    const double p = static_cast<double>(errors) / n;
    const double z2 = z * z;
    const double centre = p + z2 / (2.0 * n);
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    return std::min(1.0, (centre + half) / (1.0 + z2 / n));
}

ErrorRateEstimate evaluate_error_rate(const Model& model, const SphereConfig& sphere, std::size_t samples,
                                      RngStream& stream) {
    if (samples < 1) throw DomainError("evaluate_error_rate: samples must be positive");
    if (model.input_dim() != sphere.n) throw DimensionError("evaluate_error_rate: model/sphere dimension mismatch");
    ErrorRateEstimate e;
    constexpr std::size_t chunk = 4096;
    for (std::size_t done = 0; done < samples; done += chunk) {
        const std::size_t count = std::min(chunk, samples - done);
        const Batch b = sample_batch(sphere, count, stream);
        const Vector logits = model.logits(b.x);
        for (std::size_t i = 0; i < count; ++i) {
            const int y = b.labels[i];
            const bool wrong = predicted_class(logits[static_cast<Eigen::Index>(i)]) != y;
            if (y == 0) {
                ++e.inner_samples;
                e.inner_errors += wrong;
            } else {
                ++e.outer_samples;
                e.outer_errors += wrong;
            }
        }
    }
    e.samples = samples;
    e.errors = e.inner_errors + e.outer_errors;
    e.rate = static_cast<double>(e.errors) / static_cast<double>(samples);
    e.upper95 = rate_upper95(e.errors, samples);
    return e;
}

nlohmann::ordered_json metrics_to_json(const MetricsRecord& r) {
    nlohmann::ordered_json j;
    j["schema"] = "spheres.metrics";
    j["version"] = kMetricsVersion;
    j["step"] = r.step;
    j["train_loss"] = r.train_loss ? nlohmann::ordered_json(*r.train_loss) : nullptr;
    j["eval_loss"] = r.eval_loss;
    j["eval_error"] = r.eval_error;
    j["worst_case_loss"] = r.worst_case_loss ? nlohmann::ordered_json(*r.worst_case_loss) : nullptr;
    j["worst_case_errors"] = r.worst_case_errors ? nlohmann::ordered_json(*r.worst_case_errors) : nullptr;
    j["mean_attack_distance"] = r.mean_attack_distance ? nlohmann::ordered_json(*r.mean_attack_distance) : nullptr;
    j["attack_failures"] = r.attack_failures ? nlohmann::ordered_json(*r.attack_failures) : nullptr;
    j["alpha_violations"] = r.alpha_violations ? nlohmann::ordered_json(*r.alpha_violations) : nullptr;
    return j;
}

nlohmann::ordered_json abort_to_json(const TrainAbort& a) {
    return nlohmann::ordered_json{{"schema", "spheres.metrics"}, {"version", kMetricsVersion}, {"event", "abort"},
                          {"step", a.step},           {"restored_step", a.restored_step},
                          {"reason", a.reason}};
}

void write_metrics_line(std::ostream& os, const nlohmann::ordered_json& line) {
    os << line.dump() << '\n';
    os.flush();
}

}  // namespace spheres
