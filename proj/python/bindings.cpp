#include "spheres/attack.hpp"
#include "spheres/checkpoint.hpp"
#include "spheres/error.hpp"
#include "spheres/geometry.hpp"
#include "spheres/training.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace spheres;

namespace {

using ModelPtr = std::shared_ptr<Model>;

Shell to_shell(const std::string& s) {
    if (s == "inner") return Shell::Inner;
    if (s == "outer") return Shell::Outer;
    throw DomainError("shell must be 'inner' or 'outer'");
}

SphereConfig sphere_of(std::size_t n, double radius, std::uint64_t seed) {
    SphereConfig c{n, radius, seed};
    c.validate();
    return c;
}

AlphaSpectrum spectrum_of(const Vector& alphas, double radius) {
    AlphaSpectrum s;
    s.alphas = alphas;
    s.radius = radius;
    return s;
}

py::dict clt_dict(const CltEstimate& e) {
    py::dict d;
    d["rate"] = e.rate;
    d["mean"] = e.mean;
    d["stddev"] = e.stddev;
    d["small_n"] = e.small_n;
    return d;
}

py::dict error_rate_dict(const ErrorRateEstimate& e) {
    py::dict d;
    d["rate"] = e.rate;
    d["upper95"] = e.upper95;
    d["errors"] = e.errors;
    d["samples"] = e.samples;
    d["inner_errors"] = e.inner_errors;
    d["outer_errors"] = e.outer_errors;
    return d;
}

py::dict stats_dict(const ErrorSetStats& s) {
    py::dict d;
    d["mu"] = s.mu ? py::cast(*s.mu) : py::none();
    d["dmean"] = s.dmean ? py::cast(*s.dmean) : py::none();
    d["successes"] = s.successes;
    d["failures"] = s.failures;
    d["distances"] = s.distances;
    d["model_tag"] = s.model_tag;
    return d;
}

py::dict subspace_dict(const SubspaceResult& r) {
    py::dict d;
    d["n"] = r.n;
    d["k"] = r.k;
    d["b"] = r.b;
    d["fraction"] = r.fraction;
    d["inner_error"] = r.inner_error;
    d["outer_error"] = r.outer_error;
    return d;
}

const QuadraticNet& quad_of(const Model& m) {
    const auto* q = dynamic_cast<const QuadraticModel*>(&m);
    if (!q) throw DomainError("not a quadratic network");
    return q->net();
}

}  // namespace

PYBIND11_MODULE(_spheres, m) {
    m.doc() = "Concentric-spheres dataset, models, manifold attacks and geometry oracles";

    // translators run newest-first, so the base class goes in first
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_ArithmeticError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_ArithmeticError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

    m.def("normal_cdf", &normal_cdf, py::arg("x"));
    m.def("normal_quantile", &normal_quantile, py::arg("p"));

    m.def(
        "sample_batch",
        [](std::size_t n, std::size_t count, double radius, std::uint64_t seed, std::uint64_t stream) {
            RngStream s(seed, stream);
            Batch b = sample_batch(sphere_of(n, radius, seed), count, s);
            return py::make_tuple(b.x, b.labels);
        },
        py::arg("n"), py::arg("count"), py::arg("radius") = kDefaultOuterRadius, py::arg("seed") = 0,
        py::arg("stream") = 0);

    py::class_<Model, ModelPtr>(m, "Model")
        .def_property_readonly("family", [](const Model& x) { return to_string(x.family()); })
        .def_property_readonly("input_dim", &Model::input_dim)
        .def_property_readonly("parameter_count", &Model::parameter_count)
        .def("logits", &Model::logits, py::arg("x"))
        .def("loss",
             [](const Model& x, const Matrix& batch, const std::vector<int>& labels) {
                 return x.loss(batch, labels, Mode::Eval);
             })
        .def("gradient_check",
             [](const Model& x, const Matrix& batch, const std::vector<int>& labels, bool train_mode) {
                 return gradient_check(x, batch, labels, train_mode ? Mode::Train : Mode::Eval);
             },
             py::arg("x"), py::arg("labels"), py::arg("train_mode") = true)
        .def("clone", [](const Model& x) { return ModelPtr(x.clone()); })
        .def("alphas", [](const Model& x, double radius) { return alpha_spectrum(quad_of(x), radius).alphas; },
             py::arg("radius") = kDefaultOuterRadius)
        .def("alpha_violations",
             [](const Model& x, double radius) { return is_perfect(alpha_spectrum(quad_of(x), radius)).violations; },
             py::arg("radius") = kDefaultOuterRadius)
        .def("save",
             [](const Model& x, const std::string& path, double radius, std::uint64_t seed, std::uint64_t step) {
                 save_checkpoint(path, x, sphere_of(x.input_dim(), radius, seed), step);
             },
             py::arg("path"), py::arg("radius") = kDefaultOuterRadius, py::arg("seed") = 0, py::arg("step") = 0);

    m.def(
        "quadratic_net",
        [](std::size_t n, std::size_t h, std::uint64_t seed) -> ModelPtr {
            RngStream s(seed, kInitStream);
            return std::make_shared<QuadraticModel>(make_quadratic_net(n, h, s));
        },
        py::arg("n"), py::arg("h"), py::arg("seed") = 0);
    m.def(
        "perfect_quadratic_net",
        [](std::size_t n, std::size_t h, double radius, std::uint64_t seed) -> ModelPtr {
            RngStream s(seed, kInitStream);
            return std::make_shared<QuadraticModel>(quad_perfect_init(n, h, radius, {}, s));
        },
        py::arg("n"), py::arg("h"), py::arg("radius") = kDefaultOuterRadius, py::arg("seed") = 0);
    m.def(
        "mlp",
        [](std::size_t n, const std::vector<std::size_t>& hidden, std::uint64_t seed) -> ModelPtr {
            RngStream s(seed, kInitStream);
            return std::make_shared<MlpModel>(make_mlp(n, hidden, s));
        },
        py::arg("n"), py::arg("hidden"), py::arg("seed") = 0);
    m.def(
        "load_checkpoint",
        [](const std::string& path) {
            Checkpoint ck = load_checkpoint(path);
            return py::make_tuple(ModelPtr(std::move(ck.model)), ck.config.radius, ck.step);
        },
        py::arg("path"));

    m.def(
        "train",
        [](Model& model, std::size_t steps, double radius, std::uint64_t seed, std::size_t batch, double lr,
           std::size_t train_size, std::size_t metrics_every, std::size_t eval_samples, bool stop_when_perfect,
           std::size_t probe_starts) {
            const SphereConfig sphere = sphere_of(model.input_dim(), radius, seed);
            TrainConfig cfg;
            cfg.steps = steps;
            cfg.seed = seed;
            cfg.batch = batch;
            cfg.adam.lr = lr;
            cfg.metrics_every = metrics_every;
            cfg.eval_samples = eval_samples;
            cfg.stop_when_perfect = stop_when_perfect;
            if (train_size > 0) cfg.fixed = std::make_shared<FixedDataset>(make_training_set(sphere, train_size));
            if (probe_starts > 0) {
                AttackConfig a = AttackConfig::worst_case();
                a.starts = probe_starts;
                cfg.worst_case_probe = a;
            }
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train(model, cfg, sphere);
            }
            py::list records;
            for (const MetricsRecord& rec : r.metrics) records.append(metrics_to_json(rec).dump());
            py::dict d;
            d["steps_run"] = r.steps_run;
            d["stopped_perfect"] = r.stopped_perfect;
            d["abort"] = r.abort ? py::cast(abort_to_json(*r.abort).dump()) : py::none();
            d["metrics"] = records;
            return d;
        },
        py::arg("model"), py::arg("steps"), py::arg("radius") = kDefaultOuterRadius, py::arg("seed") = 0,
        py::arg("batch") = 50, py::arg("lr") = 1e-4, py::arg("train_size") = 0, py::arg("metrics_every") = 1000,
        py::arg("eval_samples") = 2000, py::arg("stop_when_perfect") = false, py::arg("probe_starts") = 0);

    m.def(
        "evaluate_error_rate",
        [](const Model& model, std::size_t samples, double radius, std::uint64_t seed) {
            RngStream s(seed, kEvalStream);
            return error_rate_dict(evaluate_error_rate(model, sphere_of(model.input_dim(), radius, seed), samples, s));
        },
        py::arg("model"), py::arg("samples"), py::arg("radius") = kDefaultOuterRadius, py::arg("seed") = 0);
    m.def("rate_upper95", &rate_upper95, py::arg("errors"), py::arg("samples"));

    m.def(
        "manifold_pgd",
        [](const Model& model, const Matrix& starts, const std::vector<int>& labels, const std::string& mode,
           std::size_t steps, double step_size) {
            AttackConfig cfg = mode == "worst" ? AttackConfig::worst_case() : AttackConfig::distance_estimation();
            if (mode != "worst" && mode != "nearest") throw DomainError("mode must be 'nearest' or 'worst'");
            cfg.steps = steps;
            cfg.step_size = step_size;
            py::list out;
            for (const AttackResult& r : manifold_pgd_batch(model, starts, labels, cfg)) {
                py::dict d;
                d["found"] = r.found;
                d["stationary"] = r.stationary;
                d["adversarial"] = r.adversarial;
                d["distance"] = r.distance;
                d["steps_used"] = r.steps_used;
                d["final_loss"] = r.final_loss;
                d["max_norm_drift"] = r.max_norm_drift;
                out.append(d);
            }
            return out;
        },
        py::arg("model"), py::arg("starts"), py::arg("labels"), py::arg("mode") = "nearest", py::arg("steps") = 1000,
        py::arg("step_size") = 0.001);
    m.def(
        "estimate_mean_distance",
        [](const Model& model, std::size_t starts, double radius, const std::string& shell, std::uint64_t seed,
           std::size_t steps, double step_size) {
            AttackConfig cfg = AttackConfig::distance_estimation();
            cfg.starts = starts;
            cfg.shell = to_shell(shell);
            cfg.steps = steps;
            cfg.step_size = step_size;
            cfg.seed = seed;
            RngStream s(seed, kDistanceProbeStream);
            return stats_dict(estimate_mean_distance(model, sphere_of(model.input_dim(), radius, seed), cfg, s));
        },
        py::arg("model"), py::arg("starts") = 100, py::arg("radius") = kDefaultOuterRadius,
        py::arg("shell") = "inner", py::arg("seed") = 0, py::arg("steps") = 1000, py::arg("step_size") = 0.001);

    m.def("theorem_bound", &theorem_bound, py::arg("mu"), py::arg("n"));
    m.def(
        "mc_cap_distance",
        [](std::size_t n, double mu, std::size_t samples, std::uint64_t seed, const std::string& formula) {
            if (formula != "paper" && formula != "exact_chord") throw DomainError("formula must be paper or exact_chord");
            RngStream s(seed, 0);
            return mc_cap_distance(make_cap(n, mu), samples, s,
                                   formula == "paper" ? CapFormula::Paper : CapFormula::ExactChord);
        },
        py::arg("n"), py::arg("mu"), py::arg("samples") = 1000000, py::arg("seed") = 0,
        py::arg("formula") = "paper");
    m.def(
        "clt_error_rate",
        [](const Vector& alphas, double radius, const std::string& shell) {
            return clt_dict(clt_error_rate(spectrum_of(alphas, radius), to_shell(shell)));
        },
        py::arg("alphas"), py::arg("radius") = kDefaultOuterRadius, py::arg("shell") = "inner");
    m.def(
        "mc_error_rate",
        [](const Vector& alphas, double radius, const std::string& shell, std::size_t samples, std::uint64_t seed) {
            RngStream s(seed, 0);
            return mc_error_rate(spectrum_of(alphas, radius), to_shell(shell), samples, s);
        },
        py::arg("alphas"), py::arg("radius") = kDefaultOuterRadius, py::arg("shell") = "inner",
        py::arg("samples") = 1000000, py::arg("seed") = 0);
    m.def(
        "subspace_classifier",
        [](std::size_t n, std::size_t k, double radius) { return subspace_dict(subspace_classifier(n, k, radius)); },
        py::arg("n"), py::arg("k"), py::arg("radius") = kDefaultOuterRadius);
    m.def(
        "minimal_subspace_fraction",
        [](std::size_t n, double target, double radius) {
            return subspace_dict(minimal_subspace_fraction(n, target, radius));
        },
        py::arg("n"), py::arg("target_error"), py::arg("radius") = kDefaultOuterRadius);
    m.def(
        "pca_halfspace",
        [](const Matrix& train, const Matrix& test, double tail, std::size_t component) {
            const HalfspaceSet hs = pca_halfspace(train, tail, component);
            py::dict d = stats_dict(halfspace_stats(hs, test));
            d["w"] = hs.w;
            d["b"] = hs.b;
            d["tail_count"] = hs.tail_count;
            return d;
        },
        py::arg("train"), py::arg("test"), py::arg("tail_fraction") = 0.01, py::arg("component") = 0);
}
