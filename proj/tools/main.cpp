#include "cli.hpp"

#include "spheres/error.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>

using namespace spheres::cli;

namespace {

void add_sphere(CLI::App* sub, SphereOptions& s) {
    sub->add_option("--n", s.n, "Input dimension")->capture_default_str();
    sub->add_option("--radius", s.radius, "Outer sphere radius R")->capture_default_str();
}

// Effective settings of the chosen subcommand, in a form --config reads back.
std::string run_config(const CLI::App& sub) {
    std::istringstream in(sub.config_to_str(true, false));
    std::string out = "[" + sub.get_name() + "]\n";
    for (std::string line; std::getline(in, line);) {
        if (line.ends_with("=\"\"") && line.starts_with("hidden=")) continue;  // empty list
        // list defaults come back as quoted strings; write them as TOML arrays
        if (const auto eq = line.find("=\"["); eq != std::string::npos && line.ends_with("]\"")) {
            line = line.substr(0, eq + 1) + line.substr(eq + 2, line.size() - eq - 3);
        }
        if (const auto eq = line.find("=["); eq != std::string::npos) {
            std::erase(line, ' ');
        }
        out += line + '\n';
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Concentric-spheres adversarial example toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML config file; command-line flags take precedence");
    std::string out_root;
    app.add_option("--out", out_root, "Output root (default: $SPHERES_OUT_ROOT or ./runs)")->configurable(false);

    TrainOptions train;
    auto* t = app.add_subcommand("train", "Train a network and persist checkpoint + metrics");
    add_sphere(t, train.sphere);
    t->add_option("--family", train.family, "quadratic | mlp")
        ->check(CLI::IsMember({"quadratic", "mlp"}))
        ->capture_default_str();
    t->add_option("--hidden", train.hidden, "Hidden widths (quadratic: one value, default 2n; mlp: default 1000,1000)")
        ->delimiter(',');
    t->add_option("--init", train.init, "random | perfect")->check(CLI::IsMember({"random", "perfect"}))->capture_default_str();
    t->add_option("--steps", train.steps, "Training steps")->capture_default_str();
    t->add_option("--batch", train.batch, "Minibatch size")->capture_default_str();
    t->add_option("--lr", train.lr, "Adam learning rate")->capture_default_str();
    t->add_option("--train-size", train.train_size, "Fixed training set size N (0 = online)")->capture_default_str();
    t->add_option("--seed", train.seed, "Base seed; repeat r uses seed + r")->capture_default_str();
    t->add_option("--repeat", train.repeat, "Independent runs")->capture_default_str();
    t->add_option("--metrics-every", train.metrics_every, "Metric cadence in steps")->capture_default_str();
    t->add_option("--eval-samples", train.eval_samples, "Fresh samples per metric record")->capture_default_str();
    t->add_option("--probe-starts", train.probe_starts, "Worst-case attack probe size (0 = off)")->capture_default_str();
    t->add_option("--distance-probe-starts", train.distance_probe_starts, "Nearest-error probe size (0 = off)")
        ->capture_default_str();
    t->add_flag("--stop-when-perfect", train.stop_when_perfect, "Quadratic only: stop once every alpha is in range");
    t->add_option("--final-eval-samples", train.final_eval_samples, "Samples for the final error estimate")
        ->capture_default_str();

    AttackOptions attack;
    auto* a = app.add_subcommand("attack", "Estimate (mu, d) for one or more checkpoints");
    a->add_option("--checkpoint", attack.checkpoints, "Checkpoint file(s)")->required();
    a->add_option("--steps", attack.steps, "PGD steps")->capture_default_str();
    a->add_option("--step-size", attack.step_size, "PGD step size")->capture_default_str();
    a->add_option("--starts", attack.starts, "Random starts")->capture_default_str();
    a->add_option("--shell", attack.shell, "inner | outer")->check(CLI::IsMember({"inner", "outer"}))->capture_default_str();
    a->add_option("--eval-samples", attack.eval_samples, "Samples for the error-rate estimate")->capture_default_str();
    a->add_option("--bins", attack.bins, "Histogram bins")->capture_default_str();
    a->add_option("--seed", attack.seed, "Seed")->capture_default_str();

    AttackOptions hist;
    auto* h = app.add_subcommand("distance-hist", "Distribution of nearest-error distances");
    h->add_option("--checkpoint", hist.checkpoints, "Checkpoint file")->required()->expected(1);
    h->add_option("--steps", hist.steps, "PGD steps")->capture_default_str();
    h->add_option("--step-size", hist.step_size, "PGD step size")->capture_default_str();
    h->add_option("--starts", hist.starts, "Random starts (>= 100)")->capture_default_str();
    h->add_option("--shell", hist.shell, "inner | outer")->check(CLI::IsMember({"inner", "outer"}))->capture_default_str();
    h->add_option("--bins", hist.bins, "Histogram bins")->capture_default_str();
    h->add_option("--seed", hist.seed, "Seed")->capture_default_str();

    BoundOptions bound;
    auto* b = app.add_subcommand("bound", "Cap bound curve: theory and both Monte Carlo formulas");
    b->add_option("--n", bound.n, "Dimension")->capture_default_str();
    b->add_option("--mu", bound.mus, "Error measures")->delimiter(',')->capture_default_str();
    b->add_option("--samples", bound.samples, "Sphere samples")->capture_default_str();
    b->add_option("--seed", bound.seed, "Seed")->capture_default_str();

    CapOptions cap;
    auto* c = app.add_subcommand("cap-oracle", "Monte Carlo mean distance to one spherical cap");
    c->add_option("--n", cap.n, "Dimension")->capture_default_str();
    c->add_option("--mu", cap.mu, "Cap measure")->capture_default_str();
    c->add_option("--samples", cap.samples, "Sphere samples")->capture_default_str();
    c->add_option("--formula", cap.formula, "paper | exact_chord | both")
        ->check(CLI::IsMember({"paper", "exact_chord", "both"}))
        ->capture_default_str();
    c->add_option("--seed", cap.seed, "Seed")->capture_default_str();

    CltOptions clt;
    auto* l = app.add_subcommand("clt", "CLT error-rate estimate for an alpha spectrum");
    l->add_option("--checkpoint", clt.checkpoint, "Quadratic-net checkpoint");
    l->add_option("--alphas", clt.alphas, "Spectrum as COUNTxVALUE groups, e.g. 10x1.5,490x0.99");
    l->add_option("--radius", clt.radius, "Outer radius (with --alphas)")->capture_default_str();
    l->add_option("--mc-samples", clt.mc_samples, "Monte Carlo cross-check samples (0 = off)")->capture_default_str();
    l->add_option("--seed", clt.seed, "Seed")->capture_default_str();

    SubspaceOptions sub;
    auto* s = app.add_subcommand("subspace-curve", "Fraction of input dimensions needed per target error");
    s->add_option("--n", sub.n, "Dimension")->capture_default_str();
    s->add_option("--radius", sub.radius, "Outer radius")->capture_default_str();
    s->add_option("--target", sub.targets, "Target error rates")->delimiter(',')->capture_default_str();

    HalfspaceOptions half;
    auto* f = app.add_subcommand("halfspace", "PCA halfspace error set on MNIST-format IDX data");
    f->add_option("--train-images", half.train_images, "Training images (IDX)");
    f->add_option("--train-labels", half.train_labels, "Training labels (IDX)");
    f->add_option("--test-images", half.test_images, "Test images (IDX)");
    f->add_option("--test-labels", half.test_labels, "Test labels (IDX)");
    f->add_option("--tail", half.tail, "Training fraction inside E")->capture_default_str();
    f->add_option("--component", half.component, "Principal component index (0 = top)")->capture_default_str();

    SliceOptions slice;
    auto* g = app.add_subcommand("slice", "2-D decision slice through the origin");
    g->add_option("--checkpoint", slice.checkpoint, "Checkpoint file")->required();
    g->add_option("--basis", slice.basis, "adversarial | random")
        ->check(CLI::IsMember({"adversarial", "random"}))
        ->capture_default_str();
    g->add_option("--extent", slice.extent, "Half-width of the grid")->capture_default_str();
    g->add_option("--resolution", slice.resolution, "Grid points per axis")->capture_default_str();
    g->add_option("--seed", slice.seed, "Seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    CLI::App* chosen = app.get_subcommands().front();
    std::filesystem::path root = "runs";
    if (!out_root.empty()) {
        root = out_root;
    } else if (const char* env = std::getenv(kOutRootEnv); env && *env) {
        root = env;
    }

    const std::map<CLI::App*, std::function<int(Run&)>> commands = {
        {t, [&](Run& r) { return cmd_train(train, r); }},
        {a, [&](Run& r) { return cmd_attack(attack, r); }},
        {h, [&](Run& r) { return cmd_distance_hist(hist, r); }},
        {b, [&](Run& r) { return cmd_bound(bound, r); }},
        {c, [&](Run& r) { return cmd_cap_oracle(cap, r); }},
        {l, [&](Run& r) { return cmd_clt(clt, r); }},
        {s, [&](Run& r) { return cmd_subspace(sub, r); }},
        {f, [&](Run& r) { return cmd_halfspace(half, r); }},
        {g, [&](Run& r) { return cmd_slice(slice, r); }},
    };

    std::unique_ptr<Run> run;
    try {
        run = std::make_unique<Run>(chosen->get_name(), run_config(*chosen), root);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfigError;
    }
    int code = kOk;
    try {
        code = commands.at(chosen)(*run);
    } catch (const spheres::IdxError& e) {
        std::cerr << "error: " << e.what() << '\n';
        run->set_status("bad-input");
        code = e.kind() == spheres::IdxError::Kind::Io ? kMnistMissing : kConfigError;
    } catch (const spheres::ConvergenceError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        run->set_status("abort");
        code = kNumericalAbort;
    } catch (const spheres::InfeasibleError& e) {
        std::cerr << "error: " << e.what() << '\n';
        run->set_status("infeasible");
        code = kNumericalAbort;
    } catch (const spheres::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        run->set_status("config-error");
        code = kConfigError;
    }
    run->finish();
    std::cout << "run directory: " << run->dir().string() << '\n';
    return code;
}
