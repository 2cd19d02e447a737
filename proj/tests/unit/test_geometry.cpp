#include "doctest.h"
#include "spheres/error.hpp"
#include "spheres/geometry.hpp"
#include "support.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace spheres;

namespace {

AlphaSpectrum spectrum(std::vector<double> alphas, double radius = 1.3) {
    AlphaSpectrum s;
    s.alphas = Eigen::Map<Vector>(alphas.data(), Eigen::Index(alphas.size()));
    s.radius = radius;
    return s;
}

std::vector<double> mixed(std::size_t a_count, double a, std::size_t b_count, double b) {
    std::vector<double> v(a_count, a);
    v.insert(v.end(), b_count, b);
    return v;
}

}  // namespace

TEST_CASE("CLT estimate: boundary cases") {
    CHECK(clt_error_rate(spectrum(std::vector<double>(500, 1.0)), Shell::Inner).rate == 0.0);
    CHECK(clt_error_rate(spectrum(std::vector<double>(500, 1.1)), Shell::Inner).rate == 1.0);
    CHECK(clt_error_rate(spectrum(std::vector<double>(500, 0.5)), Shell::Outer).rate == 1.0);
    CHECK(clt_error_rate(spectrum(mixed(250, 1.02, 250, 0.98)), Shell::Inner).rate == doctest::Approx(0.5));
    CHECK(clt_error_rate(spectrum(std::vector<double>(10, 0.9)), Shell::Inner).small_n);
}

TEST_CASE("CLT estimate: heterogeneous spectrum by hand") {
    const CltEstimate e = clt_error_rate(spectrum(mixed(10, 1.5, 490, 0.99)), Shell::Inner);
    // μ̂ = 10·0.5 − 490·0.01, σ̂² = 2(10·0.25 + 490·1e-4)
    CHECK(e.mean == doctest::Approx(0.1));
    CHECK(e.stddev == doctest::Approx(std::sqrt(5.098)));
    CHECK(e.rate == doctest::Approx(0.5 * std::erfc(-0.1 / std::sqrt(5.098) / std::sqrt(2.0))));
    CHECK(e.rate == doctest::Approx(0.518).epsilon(0.001));
    const CltEstimate o = clt_error_rate(spectrum(mixed(10, 1.5, 490, 0.99)), Shell::Outer);
    CHECK(o.rate < 1e-10);
}

TEST_CASE("MC error rate: strictly inside is error free") {
    RngStream s(1);
    CHECK(mc_error_rate(spectrum(std::vector<double>(50, 0.7572)), Shell::Inner, 5000, s) == 0.0);
    CHECK(mc_error_rate(spectrum(std::vector<double>(50, 0.7572)), Shell::Outer, 5000, s) == 0.0);
    CHECK_THROWS_AS(mc_error_rate(spectrum(std::vector<double>(50, 0.7572)), Shell::Outer, 999, s), DomainError);
}

TEST_CASE("MC error rate matches the sphere-marginal oracle") {
    const int n = 20;
    std::vector<double> a(n, 0.757);
    a[0] = 2.0;
    RngStream s(2);
    const std::size_t N = 200000;
    const double mc = mc_error_rate(spectrum(a), Shell::Inner, N, s);
    const double exact = oracle::sphere_two_sided_tail(std::sqrt(0.243 / 1.243), n);
    CHECK(std::abs(mc - exact) < 3.0 * std::sqrt(exact * (1 - exact) / N));

    // At n = 500 the cap |x₁| > 0.442 has negligible measure.
    std::vector<double> big(500, 0.757);
    big[0] = 2.0;
    CHECK(oracle::sphere_two_sided_tail(0.4421, 500) < 1e-15);
    CHECK(mc_error_rate(spectrum(big), Shell::Inner, 20000, s) == 0.0);
}

TEST_CASE("CLT and MC agree inside the validity band") {
    RngStream s(3);
    const std::size_t N = 100000;
    for (const auto& a : {mixed(250, 0.96, 250, 1.035), mixed(250, 1.02, 250, 0.98), mixed(100, 1.08, 400, 0.985)}) {
        const double clt = clt_error_rate(spectrum(a), Shell::Inner).rate;
        const double mc = mc_error_rate(spectrum(a), Shell::Inner, N, s);
        if (clt >= 0.01 && clt <= 0.5) {
            CHECK(std::abs(clt - mc) <= 3.0 * std::sqrt(mc * (1 - mc) / N) + 0.005);
        }
    }
}

TEST_CASE("theorem bound values") {
    CHECK(theorem_bound(0.5, 17) == 0.0);
    CHECK(theorem_bound(0.01, 500) == doctest::Approx(0.10404).epsilon(1e-4));
    CHECK(theorem_bound(0.001, 500) == doctest::Approx(0.13820).epsilon(1e-4));
    CHECK(theorem_bound(0.01, 500) == doctest::Approx(oracle::quantile_by_bisection(0.99) / std::sqrt(500.0)));
    double prev = INFINITY;
    for (double mu : {1e-6, 1e-4, 0.01, 0.1, 0.3, 0.49}) {
        CHECK(theorem_bound(mu, 100) < prev);
        prev = theorem_bound(mu, 100);
        CHECK(theorem_bound(mu, 400) == doctest::Approx(0.5 * theorem_bound(mu, 100)).epsilon(1e-14));
    }
    CHECK_THROWS_AS(theorem_bound(0.0, 10), DomainError);
    CHECK_THROWS_AS(theorem_bound(0.6, 10), DomainError);
}

TEST_CASE("per-point cap distances") {
    CHECK(cap_distance(0.3, 0.1, CapFormula::Paper) == 0.0);
    CHECK(cap_distance(0.3, 0.1, CapFormula::ExactChord) == 0.0);
    CHECK(cap_distance(-0.2, 0.1, CapFormula::Paper) == doctest::Approx(std::sqrt(2.0) * 0.3));
    // Exact chord from (x₁, √(1−x₁²)) to (t, √(1−t²)) in the plane of e₁.
    const double x = -0.2, t = 0.1;
    const double ex = std::hypot(t - x, std::sqrt(1 - t * t) - std::sqrt(1 - x * x));
    CHECK(cap_distance(x, t, CapFormula::ExactChord) == doctest::Approx(ex));
    // From the antipode, the chord reaches the cap boundary.
    CHECK(cap_distance(-1.0, 0.0, CapFormula::ExactChord) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("cap spec") {
    const CapSpec c = make_cap(500, 0.01);
    CHECK(c.alpha == doctest::Approx(2.326347874));
    CHECK(c.t == doctest::Approx(c.alpha / std::sqrt(500.0)));
    CHECK(make_cap(500, 0.5).t == 0.0);
    CHECK_THROWS_AS(make_cap(500, 0.7), DomainError);
}

TEST_CASE("hemisphere mean paper distance against quadrature") {
    const int n = 50;
    RngStream s(4);
    const std::size_t N = 100000;
    const Vector x1 = sphere_first_coordinates(n, N, s);
    const double mc = mc_cap_distance(make_cap(n, 0.5), N, s, CapFormula::Paper);
    const double exact = oracle::simpson(
        [n](double x) { return std::numbers::sqrt2 * (-x) * oracle::sphere_marginal_pdf(x, n); }, -1.0, 0.0);
    // Per-point distances have sd below their mean.
    CHECK(std::abs(mc - exact) < 4.0 * exact / std::sqrt(double(N)) * 1.5);
    // x₁ moments: mean 0, E[x₁²] = 1/n.
    CHECK(std::abs(x1.mean()) < 4.0 / std::sqrt(double(n) * N));
    CHECK(x1.array().square().mean() == doctest::Approx(1.0 / n).epsilon(0.02));
}

TEST_CASE("bound curve shape") {
    RngStream s(5);
    const std::vector<double> mus = {0.5, 0.1, 0.01, 0.001};
    const BoundCurve c = bound_curve(100, mus, 50000, s);
    REQUIRE(c.points.size() == 4);
    CHECK(c.points[0].d_theory == 0.0);
    for (std::size_t i = 1; i < 4; ++i) {
        CHECK(c.points[i].d_theory > c.points[i - 1].d_theory);
        CHECK(c.points[i].d_paper > c.points[i - 1].d_paper);
        CHECK(c.points[i].d_chord > c.points[i - 1].d_chord);
    }
    const BoundCurve c4 = bound_curve(400, mus, 50000, s);
    for (std::size_t i = 1; i < 4; ++i) {
        CHECK(c4.points[i].d_paper == doctest::Approx(0.5 * c.points[i].d_paper).epsilon(0.03));
    }
    std::ostringstream os;
    write_bound_curve_csv(os, c);
    CHECK(os.str().rfind("mu,t,d_theory,d_mc_paper,d_mc_exact_chord\n", 0) == 0);
}

TEST_CASE("subspace classifier equalises the two errors") {
    const SubspaceResult r = subspace_classifier(500, 200, 1.3);
    CHECK(r.b > 200.0 / 500.0);
    CHECK(r.b < 1.69 * 200.0 / 500.0);
    CHECK(r.inner_error == doctest::Approx(r.outer_error).epsilon(1e-8));
    // Recompute the inner error at b from the raw moments.
    const double g = 1.0 / r.b - 1.0;
    const double mean = 200 * g - 300, sd = std::sqrt(2.0 * (200 * g * g + 300));
    CHECK(r.inner_error == doctest::Approx(0.5 * std::erfc(-mean / sd / std::sqrt(2.0))));
}

TEST_CASE("minimal subspace monotonicity") {
    const SubspaceResult loose = minimal_subspace_fraction(500, 0.4, 1.3);
    CHECK(loose.k <= 5);
    const SubspaceResult tight = minimal_subspace_fraction(500, 1e-6, 1.3);
    CHECK(std::max(tight.inner_error, tight.outer_error) <= 1e-6);
    const SubspaceResult prev = subspace_classifier(500, tight.k - 1, 1.3);
    CHECK(std::max(prev.inner_error, prev.outer_error) > 1e-6);
    const SubspaceResult full = subspace_classifier(500, 500, 1.3);
    for (std::size_t k : {10, 100, 300, 499}) {
        CHECK(subspace_classifier(500, k, 1.3).inner_error >= full.inner_error);
    }
    CHECK_THROWS_AS(minimal_subspace_fraction(30, 1e-12, 1.3), InfeasibleError);
    CHECK_THROWS_AS(minimal_subspace_fraction(500, 0.6, 1.3), DomainError);
}

TEST_CASE("halfspace stats by hand") {
    HalfspaceSet hs;
    hs.w = Vector::Zero(2);
    hs.w[0] = 1.0;
    hs.b = 0.0;
    Matrix test(2, 2);
    test << -1.0, 5.0, 1.0, -3.0;
    const ErrorSetStats st = halfspace_stats(hs, test);
    CHECK(*st.mu == 0.5);
    CHECK(*st.dmean == 0.5);
    CHECK_THROWS_AS(halfspace_stats(hs, Matrix::Zero(2, 3)), DimensionError);
}

TEST_CASE("halfspace distance is 1-Lipschitz") {
    RngStream s(6);
    HalfspaceSet hs;
    hs.w = standard_normals(s, 8).normalized();
    hs.b = 0.3;
    for (int i = 0; i < 1000; ++i) {
        const Vector x = standard_normals(s, 8);
        const Vector y = x + 0.1 * standard_normals(s, 8);
        CHECK(std::abs(halfspace_distance(hs, x) - halfspace_distance(hs, y)) <= (x - y).norm() + 1e-15);
    }
}

TEST_CASE("tail threshold counts and ties") {
    RngStream s(7);
    const Vector p = standard_normals(s, 1000);
    const auto [b, count] = tail_threshold(p, 0.01);
    CHECK(count == 10);
    CHECK((p.array() > b).count() == 10);
    const auto [b2, c2] = tail_threshold(p, 0.0123);
    CHECK(c2 == 13);
    (void)b2;
    Vector tied = Vector::Zero(100);
    tied.head(5).setConstant(2.0);
    const auto [bt, ct] = tail_threshold(tied, 0.03);  // 3rd and 4th largest tie at 2
    CHECK(ct == 5);
    CHECK(bt < 2.0);
    CHECK_THROWS_AS(tail_threshold(p, 0.5), DomainError);
}

TEST_CASE("PCA halfspace on anisotropic data") {
    RngStream s(8);
    Matrix x(4000, 5);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < 5; ++j) x(i, j) = (j == 2 ? 2.0 : 1.0) * s.normal();
    const HalfspaceSet hs = pca_halfspace(x, 0.01);
    CHECK(hs.w.norm() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::acos(std::min(1.0, std::abs(hs.w[2]))) < 5.0 * std::numbers::pi / 180.0);
    CHECK(hs.tail_count == 40);
    CHECK(hs.train_size == 4000);
    CHECK(hs.pixel_scaling == "[0,1]");
    const ErrorSetStats st = halfspace_stats(hs, x);
    CHECK(*st.mu == doctest::Approx(0.01));
    const HalfspaceSet low = pca_halfspace(x, 0.01, 3);
    CHECK(*halfspace_stats(low, x).dmean < *st.dmean);
}
