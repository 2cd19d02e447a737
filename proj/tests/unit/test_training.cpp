#include "doctest.h"
#include "spheres/error.hpp"
#include "spheres/training.hpp"
#include "support.hpp"

#include <cmath>
#include <sstream>

using namespace spheres;

namespace {

std::vector<double> flatten(Model& m) {
    std::vector<double> out;
    for (const ParamBlock& p : m.parameters()) out.insert(out.end(), p.values.begin(), p.values.end());
    return out;
}

}  // namespace

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    double x[3] = {1.0, -2.0, 3.0};
    std::vector<ParamBlock> blocks = {{"x", {x, 3}}};
    AdamState st;
    for (int i = 0; i < 5; ++i) adam_step(blocks, {Vector::Zero(3)}, st);
    CHECK(x[0] == 1.0);
    CHECK(x[1] == -2.0);
    CHECK(x[2] == 3.0);
    CHECK(st.t == 5);
}

TEST_CASE("adam: constant gradient moves by lr per step") {
    double x = 0.0;
    std::vector<ParamBlock> blocks = {{"x", {&x, 1}}};
    AdamState st;
    for (int i = 0; i < 200; ++i) {
        const double before = x;
        adam_step(blocks, {Vector::Constant(1, 0.37)}, st);
        CHECK(before - x == doctest::Approx(1e-4).epsilon(1e-6));
    }
}

TEST_CASE("adam: quadratic bowl matches a direct simulation") {
    double theta = 1.0;
    std::vector<ParamBlock> blocks = {{"theta", {&theta, 1}}};
    AdamState st;
    st.config.lr = 1e-2;
    // Reference recursion written out with the textbook formulas.
    double ref = 1.0, m = 0.0, v = 0.0;
    double prev = std::abs(theta);
    for (int t = 1; t <= 60; ++t) {
        const double g = 2.0 * ref;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1 - std::pow(0.9, t));
        const double vh = v / (1 - std::pow(0.999, t));
        ref -= 1e-2 * mh / (std::sqrt(vh) + 1e-8);

        adam_step(blocks, {Vector::Constant(1, 2.0 * theta)}, st);
        CHECK(theta == doctest::Approx(ref).epsilon(1e-12));
        CHECK(std::abs(theta) < prev);
        prev = std::abs(theta);
    }
}

TEST_CASE("adam: shape mismatch is rejected before any update") {
    double x[2] = {1.0, 2.0};
    std::vector<ParamBlock> blocks = {{"x", {x, 2}}};
    AdamState st;
    CHECK_THROWS_AS(adam_step(blocks, {Vector::Zero(3)}, st), DimensionError);
    CHECK_THROWS_AS(adam_step(blocks, {}, st), DimensionError);
    CHECK(st.t == 0);
    adam_step(blocks, {Vector::Ones(2)}, st);
    double y[3] = {};
    std::vector<ParamBlock> other = {{"y", {y, 3}}};
    CHECK_THROWS_AS(adam_step(other, {Vector::Ones(3)}, st), DimensionError);
}

TEST_CASE("zero-step training returns the model unchanged") {
    RngStream s(1);
    QuadraticModel model(make_quadratic_net(5, 6, s));
    const auto before = flatten(model);
    SphereConfig sphere;
    sphere.n = 5;
    TrainConfig cfg;
    cfg.steps = 0;
    const TrainResult r = train(model, cfg, sphere);
    CHECK(flatten(model) == before);
    CHECK(r.steps_run == 0);
    REQUIRE(r.metrics.size() == 1);
    CHECK(r.metrics[0].step == 0);
    CHECK_FALSE(r.metrics[0].train_loss.has_value());
}

TEST_CASE("training is bit-for-bit deterministic") {
    SphereConfig sphere;
    sphere.n = 6;
    TrainConfig cfg;
    cfg.steps = 40;
    cfg.seed = 5;
    cfg.metrics_every = 10;
    cfg.eval_samples = 100;
    auto run = [&](Family fam) {
        RngStream s(2);
        std::unique_ptr<Model> m;
        if (fam == Family::Quadratic) {
            m = std::make_unique<QuadraticModel>(make_quadratic_net(6, 8, s));
        } else {
            m = std::make_unique<MlpModel>(make_mlp(6, {8, 8}, s));
        }
        const TrainResult r = train(*m, cfg, sphere);
        CHECK(r.metrics.size() == 5);
        return std::pair{flatten(*m), r.metrics.back().eval_loss};
    };
    CHECK(run(Family::Quadratic) == run(Family::Quadratic));
    CHECK(run(Family::Mlp) == run(Family::Mlp));
}

TEST_CASE("training on a fixed set lowers the loss") {
    SphereConfig sphere;
    sphere.n = 8;
    sphere.seed = 3;
    TrainConfig cfg;
    cfg.steps = 1500;
    cfg.adam.lr = 1e-2;
    cfg.metrics_every = 500;
    cfg.eval_samples = 1000;
    cfg.fixed = std::make_shared<FixedDataset>(make_training_set(sphere, 500));
    RngStream s(4);
    QuadraticModel model(make_quadratic_net(8, 16, s));
    const TrainResult r = train(model, cfg, sphere);
    CHECK(r.metrics.back().eval_loss < 0.5 * r.metrics.front().eval_loss);
    REQUIRE(r.metrics.back().alpha_violations.has_value());
}

TEST_CASE("non-finite loss aborts and rolls back") {
    SphereConfig sphere;
    sphere.n = 4;
    RngStream s(6);
    QuadraticNet net = make_quadratic_net(4, 4, s);
    net.w = std::nan("");
    QuadraticModel model(net);
    TrainConfig cfg;
    cfg.steps = 10;
    cfg.eval_samples = 10;
    const TrainResult r = train(model, cfg, sphere);
    REQUIRE(r.abort.has_value());
    CHECK(r.abort->step == 1);
    CHECK(r.abort->restored_step == 0);
    CHECK(r.steps_run == 0);
    CHECK(model.net().w1 == net.w1);
    const auto j = abort_to_json(*r.abort);
    CHECK(j["event"] == "abort");
}

TEST_CASE("config validation") {
    SphereConfig sphere;
    sphere.n = 4;
    RngStream s(7);
    MlpModel mlp(make_mlp(4, {3}, s));
    TrainConfig cfg;
    cfg.batch = 1;
    CHECK_THROWS_AS(train(mlp, cfg, sphere), DomainError);
    SphereConfig wrong;
    wrong.n = 5;
    cfg.batch = 10;
    CHECK_THROWS_AS(train(mlp, cfg, wrong), DimensionError);
    cfg.distance_probe = AttackConfig::worst_case();
    CHECK_THROWS_AS(train(mlp, cfg, sphere), DomainError);
}

TEST_CASE("error rate: rule of three on a perfect net") {
    RngStream s(8);
    QuadraticModel model(quad_perfect_init(10, 10, 1.3, {}, s));
    SphereConfig sphere;
    sphere.n = 10;
    RngStream eval(9);
    const ErrorRateEstimate e = evaluate_error_rate(model, sphere, 100000, eval);
    CHECK(e.errors == 0);
    CHECK(e.upper95 == doctest::Approx(3e-5));
    CHECK(e.inner_samples + e.outer_samples == 100000);
    RngStream one(1);
    const ErrorRateEstimate single = evaluate_error_rate(model, sphere, 1, one);
    CHECK((single.rate == 0.0 || single.rate == 1.0));
    CHECK_THROWS_AS(evaluate_error_rate(model, sphere, 0, one), DomainError);
}

TEST_CASE("error rate of a broken net matches the sphere-marginal oracle") {
    const int n = 20;
    std::vector<double> alphas(n, 0.757);
    alphas[0] = 2.0;
    QuadraticModel model(oracle::diagonal_quadratic(alphas));
    SphereConfig sphere;
    sphere.n = n;
    RngStream eval(10);
    const std::size_t N = 200000;
    const ErrorRateEstimate e = evaluate_error_rate(model, sphere, N, eval);
    // Inner errors when 2u₁² + 0.757(1 − u₁²) > 1; the outer shell is always right.
    const double tail = oracle::sphere_two_sided_tail(std::sqrt(0.243 / 1.243), n);
    CHECK(e.outer_errors == 0);
    const double p_in = double(e.inner_errors) / double(e.inner_samples);
    const double sigma = std::sqrt(tail * (1 - tail) / double(e.inner_samples));
    CHECK(std::abs(p_in - tail) < 3 * sigma);
}

TEST_CASE("Wilson bound") {
    CHECK(rate_upper95(5, 100) == doctest::Approx(0.11175).epsilon(1e-3));
    CHECK(rate_upper95(0, 1) == 1.0);
    CHECK(rate_upper95(100, 100) == 1.0);
}

TEST_CASE("metrics lines are versioned JSON") {
    MetricsRecord r;
    r.step = 7;
    r.train_loss = 0.5;
    r.eval_loss = 0.25;
    r.alpha_violations = 3;
    std::ostringstream os;
    write_metrics_line(os, metrics_to_json(r));
    const auto j = nlohmann::json::parse(os.str());
    CHECK(j["schema"] == "spheres.metrics");
    CHECK(j["version"] == 1);
    CHECK(j["step"] == 7);
    CHECK(j["worst_case_loss"].is_null());
    CHECK(j["alpha_violations"] == 3);
    CHECK(os.str().find("\"schema\"") == 1);
}

TEST_CASE("probes are recorded") {
    SphereConfig sphere;
    sphere.n = 10;
    RngStream s(11);
    QuadraticModel model(quad_perfect_init(10, 10, 1.3, {}, s));
    TrainConfig cfg;
    cfg.eval_samples = 100;
    AttackConfig worst = AttackConfig::worst_case();
    worst.steps = 20;
    worst.starts = 8;
    cfg.worst_case_probe = worst;
    AttackConfig near = AttackConfig::distance_estimation();
    near.steps = 20;
    near.starts = 5;
    cfg.distance_probe = near;
    const MetricsRecord m = measure(model, cfg, sphere, 0);
    REQUIRE(m.worst_case_loss.has_value());
    CHECK(*m.worst_case_loss > 0.0);
    CHECK(*m.worst_case_errors == 0);
    CHECK(*m.attack_failures == 5);
    CHECK_FALSE(m.mean_attack_distance.has_value());
    CHECK(*m.alpha_violations == 0);
}
