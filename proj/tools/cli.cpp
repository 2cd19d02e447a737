#include "cli.hpp"

#include "spheres/attack.hpp"
#include "spheres/checkpoint.hpp"
#include "spheres/error.hpp"
#include "spheres/geometry.hpp"
#include "spheres/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace spheres::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kFinalEvalStream = 0x6665'0000ULL;
constexpr std::uint64_t kAttackEvalStream = 0x6165'0000ULL;
constexpr std::uint64_t kAttackStartStream = 0x6173'0000ULL;
constexpr std::uint64_t kSliceStream = 0x736c'0000ULL;
constexpr std::uint64_t kOracleStream = 0x6f72'0000ULL;

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    os << std::setprecision(17);
    return os;
}

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

Shell shell_from_string(const std::string& s) {
    if (s == "inner") return Shell::Inner;
    if (s == "outer") return Shell::Outer;
    throw DomainError("shell must be 'inner' or 'outer', got '" + s + "'");
}

}  // namespace

std::string config_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Run::Run(const std::string& command, const std::string& config_text, const fs::path& root)
    : command_(command), hash_(config_hash(config_text)), start_(std::chrono::steady_clock::now()) {
    dir_ = root / (command + "-" + hash_);
    fs::create_directories(dir_);
    std::ofstream(artifact("run_config.toml")) << config_text;
}

fs::path Run::artifact(const std::string& name) {
    artifacts_.push_back(name);
    return dir_ / name;
}

void Run::finish() {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    nlohmann::ordered_json j;
    j["schema"] = "spheres.summary";
    j["version"] = 1;
    j["command"] = command_;
    j["config_hash"] = hash_;
    j["status"] = status_;
    j["wall_time_s"] = wall;
    j["metrics"] = metrics_;
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const std::string& a : artifacts_) {
        if (fs::exists(dir_ / a)) files.push_back(a);
    }
    files.push_back("summary.json");
    j["artifacts"] = files;
    std::ofstream(dir_ / "summary.json") << j.dump(2) << '\n';
}

std::vector<double> parse_alpha_groups(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        const auto x = tok.find('x');
        try {
            if (x == std::string::npos) {
                out.push_back(std::stod(tok));
            } else {
                const long count = std::stol(tok.substr(0, x));
                const double value = std::stod(tok.substr(x + 1));
                if (count < 0) throw DomainError("negative count");
                out.insert(out.end(), static_cast<std::size_t>(count), value);
            }
        } catch (const std::exception&) {
            throw DomainError("cannot parse alpha group '" + tok + "' (expected COUNTxVALUE or VALUE)");
        }
    }
    if (out.empty()) throw DomainError("empty alpha specification");
    return out;
}

// ---------------------------------------------------------------------------

int cmd_train(const TrainOptions& o, Run& run) {
    const Family family = family_from_string(o.family);
    if (o.init != "random" && o.init != "perfect") throw DomainError("init must be 'random' or 'perfect'");
    if (o.init == "perfect" && family != Family::Quadratic) {
        throw DomainError("perfect init is only defined for the quadratic family");
    }
    if (o.repeat < 1) throw DomainError("repeat must be at least 1");

    int code = kOk;
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < o.repeat; ++r) {
        const std::uint64_t seed = o.seed + r;
        SphereConfig sphere{o.sphere.n, o.sphere.radius, seed};
        sphere.validate();

        RngStream init(seed, kInitStream);
        std::unique_ptr<Model> model;
        if (family == Family::Quadratic) {
            const std::size_t h = o.hidden.empty() ? 2 * o.sphere.n : o.hidden.front();
            model = std::make_unique<QuadraticModel>(o.init == "perfect"
                                                         ? quad_perfect_init(o.sphere.n, h, o.sphere.radius, {}, init)
                                                         : make_quadratic_net(o.sphere.n, h, init));
        } else {
            const std::vector<std::size_t> widths =
                o.hidden.empty() ? std::vector<std::size_t>{1000, 1000} : o.hidden;
            model = std::make_unique<MlpModel>(make_mlp(o.sphere.n, widths, init));
        }

        TrainConfig cfg;
        cfg.batch = o.batch;
        cfg.steps = o.steps;
        cfg.adam.lr = o.lr;
        cfg.seed = seed;
        cfg.metrics_every = o.metrics_every;
        cfg.eval_samples = o.eval_samples;
        cfg.stop_when_perfect = o.stop_when_perfect;
        if (o.train_size > 0) cfg.fixed = std::make_shared<FixedDataset>(make_training_set(sphere, o.train_size));
        if (o.probe_starts > 0) {
            AttackConfig a = AttackConfig::worst_case();
            a.starts = o.probe_starts;
            cfg.worst_case_probe = a;
        }
        if (o.distance_probe_starts > 0) {
            AttackConfig a = AttackConfig::distance_estimation();
            a.starts = o.distance_probe_starts;
            cfg.distance_probe = a;
        }

        const std::string tag = o.repeat > 1 ? "-" + std::to_string(r) : "";
        std::ofstream metrics = open_out(run.artifact("metrics" + tag + ".jsonl"));
        const TrainResult result = train(*model, cfg, sphere, [&](const MetricsRecord& rec) {
            write_metrics_line(metrics, metrics_to_json(rec));
        });
        if (result.abort) write_metrics_line(metrics, abort_to_json(*result.abort));

        const std::uint64_t step = result.abort ? result.abort->restored_step : result.steps_run;
        nlohmann::json meta = {{"command", "train"}, {"family", o.family}, {"init", o.init},
                               {"train_size", o.train_size}, {"lr", o.lr}, {"batch", o.batch}};
        save_checkpoint(run.artifact("checkpoint" + tag + ".json"), *model, sphere, step, meta);

        RngStream eval(seed, kFinalEvalStream);
        const ErrorRateEstimate err = evaluate_error_rate(*model, sphere, o.final_eval_samples, eval);
        nlohmann::ordered_json row;
        row["seed"] = seed;
        row["steps_run"] = result.steps_run;
        row["stopped_perfect"] = result.stopped_perfect;
        row["aborted"] = result.abort.has_value();
        if (result.abort) row["abort_reason"] = result.abort->reason;
        const MetricsRecord& last = result.metrics.back();
        row["eval_loss"] = last.eval_loss;
        row["alpha_violations"] = last.alpha_violations ? nlohmann::ordered_json(*last.alpha_violations) : nullptr;
        row["worst_case_loss"] = opt_json(last.worst_case_loss);
        row["mean_attack_distance"] = opt_json(last.mean_attack_distance);
        row["mu"] = err.rate;
        row["mu_upper95"] = err.upper95;
        row["errors"] = err.errors;
        row["eval_samples"] = err.samples;
        runs.push_back(row);
        std::cout << "seed " << seed << ": " << result.steps_run << " steps, mu " << err.rate << " (upper95 "
                  << err.upper95 << ")";
        if (last.alpha_violations) std::cout << ", alpha violations " << *last.alpha_violations;
        std::cout << '\n';

        if (result.abort) {
            std::cerr << "numerical abort at step " << result.abort->step << ": " << result.abort->reason
                      << "; checkpoint holds step " << result.abort->restored_step << '\n';
            run.set_status("abort");
            code = kNumericalAbort;
        }
    }
    run.metrics()["runs"] = runs;
    return code;
}

namespace {

struct AttackRow {
    std::string checkpoint;
    std::uint64_t step = 0;
    ErrorRateEstimate err;
    ErrorSetStats stats;
};

AttackRow attack_one(const std::string& path, const AttackOptions& o, bool with_mu) {
    const Checkpoint ck = load_checkpoint(path);
    AttackConfig cfg = AttackConfig::distance_estimation();
    cfg.steps = o.steps;
    cfg.step_size = o.step_size;
    cfg.starts = o.starts;
    cfg.shell = shell_from_string(o.shell);
    cfg.seed = o.seed;
    AttackRow row;
    row.checkpoint = path;
    row.step = ck.step;
    if (with_mu) {
        RngStream eval(o.seed, kAttackEvalStream);
        row.err = evaluate_error_rate(*ck.model, ck.config, o.eval_samples, eval);
    }
    RngStream starts(o.seed, kAttackStartStream);
    row.stats = estimate_mean_distance(*ck.model, ck.config, cfg, starts);
    return row;
}

nlohmann::ordered_json histogram_json(const DistanceHistogram& h) {
    nlohmann::ordered_json j;
    j["successes"] = h.successes;
    j["failures"] = h.failures;
    if (!h.empty()) {
        j["mean"] = h.mean;
        j["stddev"] = h.stddev;
        j["q1"] = h.q1;
        j["median"] = h.median;
        j["q3"] = h.q3;
    }
    return j;
}

}  // namespace

int cmd_attack(const AttackOptions& o, Run& run) {
    if (o.checkpoints.empty()) throw DomainError("attack: at least one --checkpoint is required");
    std::ofstream csv = open_out(run.artifact("attack.csv"));
    csv << "checkpoint,step,mu,mu_upper95,dmean,successes,failures\n";
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    std::size_t any_success = 0;
    for (std::size_t i = 0; i < o.checkpoints.size(); ++i) {
        const AttackRow r = attack_one(o.checkpoints[i], o, true);
        csv << r.checkpoint << ',' << r.step << ',' << r.err.rate << ',' << r.err.upper95 << ',';
        if (r.stats.dmean) csv << *r.stats.dmean;
        csv << ',' << r.stats.successes << ',' << r.stats.failures << '\n';
        std::ofstream hist = open_out(run.artifact("histogram-" + std::to_string(i) + ".csv"));
        write_histogram_csv(hist, histogram_from_stats(r.stats, o.bins));
        any_success += r.stats.successes;

        nlohmann::ordered_json j;
        j["checkpoint"] = r.checkpoint;
        j["step"] = r.step;
        j["mu"] = r.err.rate;
        j["mu_upper95"] = r.err.upper95;
        j["dmean"] = opt_json(r.stats.dmean);
        j["successes"] = r.stats.successes;
        j["failures"] = r.stats.failures;
        j["all_failed"] = r.stats.all_failed();
        rows.push_back(j);
        std::cout << r.checkpoint << ": mu " << r.err.rate << " (upper95 " << r.err.upper95 << "), dmean ";
        if (r.stats.dmean) {
            std::cout << *r.stats.dmean;
        } else {
            std::cout << "n/a";
        }
        std::cout << " from " << r.stats.successes << "/" << r.stats.starts() << " starts\n";
    }
    run.metrics()["rows"] = rows;
    if (any_success == 0) {
        std::cerr << "attack failed from every start: no on-manifold error found\n";
        run.set_status("all-starts-failed");
        return kAttackFailed;
    }
    return kOk;
}

int cmd_distance_hist(const AttackOptions& o, Run& run) {
    if (o.checkpoints.size() != 1) throw DomainError("distance-hist: exactly one --checkpoint is required");
    if (o.starts < 100) throw DomainError("distance-hist: needs at least 100 starts");
    const AttackRow r = attack_one(o.checkpoints.front(), o, false);
    const DistanceHistogram h = histogram_from_stats(r.stats, o.bins);
    std::ofstream hist = open_out(run.artifact("histogram.csv"));
    write_histogram_csv(hist, h);
    std::ofstream dist = open_out(run.artifact("distances.csv"));
    dist << "distance\n";
    for (double d : r.stats.distances) dist << d << '\n';
    run.metrics() = histogram_json(h);
    run.metrics()["checkpoint"] = r.checkpoint;
    if (h.empty()) {
        std::cerr << "attack failed from every start: histogram is empty\n";
        run.set_status("all-starts-failed");
        return kAttackFailed;
    }
    std::cout << "median " << h.median << ", IQR " << h.q3 - h.q1 << ", " << h.successes << " successes\n";
    return kOk;
}

int cmd_bound(const BoundOptions& o, Run& run) {
    RngStream s(o.seed, kOracleStream);
    const BoundCurve c = bound_curve(o.n, o.mus, o.samples, s);
    std::ofstream csv = open_out(run.artifact("bound_curve.csv"));
    write_bound_curve_csv(csv, c);
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (const BoundPoint& p : c.points) {
        pts.push_back({{"mu", p.mu}, {"d_theory", p.d_theory}, {"d_mc_paper", p.d_paper},
                       {"d_mc_exact_chord", p.d_chord}});
        std::cout << "mu " << p.mu << ": theory " << p.d_theory << ", paper formula " << p.d_paper
                  << ", exact chord " << p.d_chord << '\n';
    }
    run.metrics()["n"] = o.n;
    run.metrics()["samples"] = o.samples;
    run.metrics()["points"] = pts;
    return kOk;
}

int cmd_cap_oracle(const CapOptions& o, Run& run) {
    if (o.formula != "paper" && o.formula != "exact_chord" && o.formula != "both") {
        throw DomainError("formula must be paper, exact_chord or both");
    }
    const CapSpec cap = make_cap(o.n, o.mu);
    RngStream s(o.seed, kOracleStream);
    if (o.samples < 10000) throw DomainError("cap-oracle: needs at least 10^4 samples");
    const Vector x1 = sphere_first_coordinates(o.n, o.samples, s);
    std::ofstream csv = open_out(run.artifact("cap_oracle.csv"));
    csv << "mu,t,formula,d_theory,d_mc\n";
    const double theory = theorem_bound(o.mu, o.n);
    run.metrics()["mu"] = o.mu;
    run.metrics()["t"] = cap.t;
    run.metrics()["d_theory"] = theory;
    for (CapFormula f : {CapFormula::Paper, CapFormula::ExactChord}) {
        const std::string name = f == CapFormula::Paper ? "paper" : "exact_chord";
        if (o.formula != "both" && o.formula != name) continue;
        double total = 0.0;
        for (Eigen::Index i = 0; i < x1.size(); ++i) total += cap_distance(x1[i], cap.t, f);
        const double d = total / static_cast<double>(x1.size());
        csv << o.mu << ',' << cap.t << ',' << name << ',' << theory << ',' << d << '\n';
        run.metrics()["d_mc_" + name] = d;
        std::cout << name << ": " << d << " (theory " << theory << ", ratio " << d / theory << ")\n";
    }
    return kOk;
}

int cmd_clt(const CltOptions& o, Run& run) {
    if (o.checkpoint.empty() == o.alphas.empty()) {
        throw DomainError("clt: give exactly one of --checkpoint or --alphas");
    }
    AlphaSpectrum spec;
    if (!o.checkpoint.empty()) {
        const Checkpoint ck = load_checkpoint(o.checkpoint);
        const auto* quad = dynamic_cast<const QuadraticModel*>(ck.model.get());
        if (!quad) throw DomainError("clt: the checkpoint is not a quadratic network");
        spec = alpha_spectrum(quad->net(), ck.config.radius);
    } else {
        const std::vector<double> a = parse_alpha_groups(o.alphas);
        spec.alphas = Eigen::Map<const Vector>(a.data(), static_cast<Eigen::Index>(a.size()));
        spec.radius = o.radius;
    }
    const PerfectionCheck perf = is_perfect(spec);
    std::ofstream csv = open_out(run.artifact("clt.csv"));
    csv << "shell,clt_rate,mean,stddev,mc_rate,small_n\n";
    RngStream s(o.seed, kOracleStream);
    for (Shell shell : {Shell::Inner, Shell::Outer}) {
        const std::string name = shell == Shell::Inner ? "inner" : "outer";
        const CltEstimate e = clt_error_rate(spec, shell);
        csv << name << ',' << e.rate << ',' << e.mean << ',' << e.stddev << ',';
        nlohmann::ordered_json j = {{"clt_rate", e.rate}, {"mean", e.mean}, {"stddev", e.stddev},
                                    {"small_n", e.small_n}};
        if (o.mc_samples > 0) {
            const double mc = mc_error_rate(spec, shell, o.mc_samples, s);
            csv << mc;
            j["mc_rate"] = mc;
        }
        csv << ',' << (e.small_n ? 1 : 0) << '\n';
        run.metrics()[name] = j;
        std::cout << name << ": CLT " << e.rate << '\n';
    }
    run.metrics()["n"] = spec.alphas.size();
    run.metrics()["alpha_violations"] = perf.violations;
    return kOk;
}

int cmd_subspace(const SubspaceOptions& o, Run& run) {
    std::vector<SubspaceResult> rows;
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (double t : o.targets) {
        rows.push_back(minimal_subspace_fraction(o.n, t, o.radius));
        const SubspaceResult& r = rows.back();
        pts.push_back({{"target_error", t}, {"k", r.k}, {"fraction", r.fraction}, {"b", r.b}});
        std::cout << "target " << t << ": k = " << r.k << " (k/n = " << r.fraction << ")\n";
    }
    std::ofstream csv = open_out(run.artifact("subspace_curve.csv"));
    write_subspace_csv(csv, o.targets, rows);
    run.metrics()["n"] = o.n;
    run.metrics()["radius"] = o.radius;
    run.metrics()["points"] = pts;
    return kOk;
}

int cmd_halfspace(const HalfspaceOptions& o, Run& run) {
    for (const std::string& p : {o.train_images, o.train_labels, o.test_images, o.test_labels}) {
        if (p.empty() || !fs::exists(p)) {
            std::cerr << "MNIST file not found: '" << p << "'. Pass --train-images, --train-labels, "
                      << "--test-images and --test-labels pointing at the IDX files.\n";
            run.set_status("mnist-missing");
            return kMnistMissing;
        }
    }
    const MnistSet train = load_idx(o.train_images, o.train_labels);
    const MnistSet test = load_idx(o.test_images, o.test_labels);
    const HalfspaceSet hs = pca_halfspace(train.images, o.tail, o.component);
    const ErrorSetStats st = halfspace_stats(hs, test.images);
    std::ofstream csv = open_out(run.artifact("halfspace.csv"));
    csv << "component,tail_fraction,b,train_tail_count,train_size,test_mu,test_dmean,pixel_scaling\n";
    csv << hs.component << ',' << hs.tail_fraction << ',' << hs.b << ',' << hs.tail_count << ',' << hs.train_size
        << ',' << *st.mu << ',' << *st.dmean << ',' << hs.pixel_scaling << '\n';
    run.metrics() = {{"component", hs.component}, {"tail_fraction", hs.tail_fraction}, {"b", hs.b},
                     {"train_tail_count", hs.tail_count}, {"mu", *st.mu}, {"dmean", *st.dmean},
                     {"pixel_scaling", hs.pixel_scaling}, {"centered_pca", hs.centered_pca}};
    std::cout << "mu " << *st.mu << ", d " << *st.dmean << '\n';
    return kOk;
}

int cmd_slice(const SliceOptions& o, Run& run) {
    if (o.basis != "adversarial" && o.basis != "random") throw DomainError("basis must be adversarial or random");
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    const std::size_t n = ck.config.n;
    RngStream s(o.seed, kSliceStream);
    const Vector start = sample_shell(ck.config, Shell::Inner, s);
    Vector v;
    nlohmann::ordered_json& m = run.metrics();
    if (o.basis == "adversarial") {
        const AttackResult a = manifold_pgd(*ck.model, {start, 0}, AttackConfig::worst_case());
        v = a.adversarial - start;
        m["attack_found_error"] = a.found;
        m["attack_final_loss"] = a.final_loss;
        if (v.norm() < 1e-12) v = standard_normals(s, n);
    } else {
        v = standard_normals(s, n);
    }
    const SliceGrid g = slice_grid(*ck.model, Vector::Zero(static_cast<Eigen::Index>(n)), start, v, o.extent,
                                   o.resolution, ck.config.radius);
    std::ofstream csv = open_out(run.artifact("slice.csv"));
    write_slice_csv(csv, g);
    std::size_t far_inner = 0;
    for (std::size_t k = 0; k < g.a.size(); ++k) {
        if (std::hypot(g.a[k], g.b[k]) > 2.0 && g.cls[k] == 0) ++far_inner;
    }
    m["basis"] = o.basis;
    m["points"] = g.a.size();
    m["inner_points_beyond_norm_2"] = far_inner;
    std::cout << g.a.size() << " grid points, " << far_inner << " of norm > 2 classified inner\n";
    return kOk;
}

}  // namespace spheres::cli
