#include "doctest.h"
#include "spheres/error.hpp"
#include "spheres/numerics.hpp"
#include "support.hpp"

#include <cmath>

using namespace spheres;

TEST_CASE("philox known answers") {
    using W = std::array<std::uint32_t, 4>;
    CHECK(RngStream::philox({0, 0, 0, 0}, {0, 0}) == W{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(RngStream::philox({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          W{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(RngStream::philox({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          W{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct") {
    RngStream a(42, 1), b(42, 1), c(42, 2), d(43, 1);
    std::uint64_t xa = 0, xc = 0, xd = 0;
    for (int i = 0; i < 16; ++i) {
        xa = a.next_u64();
        CHECK(xa == b.next_u64());
        xc = c.next_u64();
        xd = d.next_u64();
    }
    CHECK(xa != xc);
    CHECK(xa != xd);
    CHECK(a.substream(3).next_u64() == b.substream(3).next_u64());
    CHECK(a.substream(3).next_u64() != a.substream(4).next_u64());
}

TEST_CASE("uniform and below stay in range") {
    RngStream s(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = s.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        REQUIRE(s.below(13) < 13U);
    }
}

TEST_CASE("normal draws have unit moments") {
    RngStream s(11);
    const std::size_t n = 200000;
    const Vector z = standard_normals(s, n);
    const double mean = z.mean();
    const double var = (z.array() - mean).square().sum() / (n - 1.0);
    const double kurt = (z.array() - mean).pow(4).mean() / (var * var);
    CHECK(std::abs(mean) < 5.0 / std::sqrt(double(n)));
    CHECK(std::abs(var - 1.0) < 0.015);
    CHECK(std::abs(kurt - 3.0) < 0.06);
}

TEST_CASE("normal_cdf against quadrature") {
    CHECK(normal_cdf(1.0) == doctest::Approx(0.841344746).epsilon(1e-9));
    for (double x : {-6.0, -2.5, -0.3, 0.0, 0.7, 1.96, 4.0}) {
        CHECK(normal_cdf(x) == doctest::Approx(oracle::phi_by_quadrature(x)).epsilon(1e-9));
    }
    CHECK(normal_cdf(-30.0) > 0.0);
    CHECK(normal_cdf(-30.0) == doctest::Approx(4.906713927148187e-198).epsilon(1e-10));
}

TEST_CASE("normal_quantile against bisection") {
    CHECK(normal_quantile(0.99) == doctest::Approx(2.32635).epsilon(1e-5));
    CHECK(normal_quantile(0.999) == doctest::Approx(3.09023).epsilon(1e-5));
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    for (double p : {1e-300, 1e-20, 1e-6, 0.01, 0.2, 0.5, 0.8, 0.99, 1 - 1e-12}) {
        CHECK(normal_quantile(p) == doctest::Approx(oracle::quantile_by_bisection(p)).epsilon(1e-10));
    }
}

TEST_CASE("normal_quantile round trip") {
    // Above x ≈ 5.5, Φ(x) rounds to within an ulp of 1 and no inverse can
    // recover x to 1e-8; the upper tail is covered through symmetry instead.
    for (double x = -37.0; x <= 5.5; x += 0.25) {
        CHECK(std::abs(normal_quantile(normal_cdf(x)) - x) <= 1e-8);
    }
    for (double x = 0.0; x <= 37.0; x += 0.25) CHECK(std::abs(-normal_quantile(normal_cdf(-x)) - x) <= 1e-8);
    for (double p = 0.001; p < 1.0; p += 0.001) {
        CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) <= 1e-8 * p + 1e-15);
    }
}

TEST_CASE("normal_quantile domain") {
    CHECK_THROWS_AS(normal_quantile(0.0), DomainError);
    CHECK_THROWS_AS(normal_quantile(1.0), DomainError);
    CHECK_THROWS_AS(normal_quantile(-0.1), DomainError);
    CHECK_THROWS_AS(normal_quantile(std::nan("")), DomainError);
}

TEST_CASE("all_finite") {
    Vector v = Vector::Ones(3);
    CHECK(all_finite(v));
    v[1] = std::nan("");
    CHECK_FALSE(all_finite(v));
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = INFINITY;
    CHECK_FALSE(all_finite(m));
}
