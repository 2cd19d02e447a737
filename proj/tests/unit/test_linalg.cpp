#include "doctest.h"
#include "spheres/error.hpp"
#include "spheres/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace spheres;

namespace {

// Eigenvalues of a symmetric 3x3 by the trigonometric closed form, descending.
std::array<double, 3> closed_form_3x3(const Matrix& a) {
    const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    const double q = a.trace() / 3.0;
    const double p2 = std::pow(a(0, 0) - q, 2) + std::pow(a(1, 1) - q, 2) + std::pow(a(2, 2) - q, 2) + 2 * p1;
    const double p = std::sqrt(p2 / 6.0);
    const Matrix b = (a - q * Matrix::Identity(3, 3)) / p;
    const double r = std::clamp(b.determinant() / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double e1 = q + 2 * p * std::cos(phi);
    const double e3 = q + 2 * p * std::cos(phi + 2 * std::numbers::pi / 3);
    return {e1, 3 * q - e1 - e3, e3};
}

}  // namespace

TEST_CASE("3x3 eigenvalues match the closed form") {
    RngStream s(5);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix g(3, 3);
        for (Eigen::Index i = 0; i < 9; ++i) g.data()[i] = s.normal();
        const Matrix a = g + g.transpose();
        const Vector ev = symmetric_eigenvalues(a);
        const auto ref = closed_form_3x3(a);
        for (int i = 0; i < 3; ++i) CHECK(ev[i] == doctest::Approx(ref[i]).epsilon(1e-10));
    }
}

TEST_CASE("eigenvalues of a diagonal and a repeated spectrum") {
    Matrix d = Matrix::Zero(4, 4);
    d.diagonal() << 1.0, -3.0, 2.0, 2.0;
    const Vector ev = symmetric_eigenvalues(d);
    CHECK(ev[0] == 2.0);
    CHECK(ev[1] == 2.0);
    CHECK(ev[2] == 1.0);
    CHECK(ev[3] == -3.0);
}

TEST_CASE("singular values of a known product") {
    // M = U·diag(5,2,0.5)·Vᵀ with rotation factors.
    const double c = std::cos(0.3), s = std::sin(0.3);
    Matrix u = Matrix::Identity(4, 3);
    u(0, 0) = c; u(1, 0) = s; u(0, 1) = -s; u(1, 1) = c;
    Matrix v = Matrix::Identity(3, 3);
    v(1, 1) = c; v(2, 1) = s; v(1, 2) = -s; v(2, 2) = c;
    Matrix sigma = Matrix::Zero(3, 3);
    sigma.diagonal() << 0.5, 5.0, 2.0;
    const Matrix m = u * sigma * v.transpose();
    const Vector sv = singular_values(m);
    REQUIRE(sv.size() == 3);
    CHECK(sv[0] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(sv[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(sv[2] == doctest::Approx(0.5).epsilon(1e-12));
    const Vector svt = singular_values(Matrix(m.transpose()));
    CHECK((svt - sv).norm() < 1e-12);
}

TEST_CASE("Frobenius norm is preserved by the singular values") {
    RngStream s(9);
    Matrix m(30, 12);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s.normal();
    const Vector sv = singular_values(m);
    CHECK(sv.squaredNorm() == doctest::Approx(m.squaredNorm()).epsilon(1e-12));
    for (Eigen::Index i = 1; i < sv.size(); ++i) CHECK(sv[i - 1] >= sv[i]);
}

TEST_CASE("PCA finds the max-variance axis of an anisotropic Gaussian") {
    RngStream s(3);
    const Eigen::Index n = 5000, dim = 6;
    Matrix x(n, dim);
    const double sd[] = {1.0, 2.0, 1.0, 1.0, 0.5, 1.0};  // variances 1,4,1,1,0.25,1
    const double sd2[] = {1.0, 2.0, 1.5, 0.8, 0.5, 0.3};
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) x(i, j) = 3.0 + sd[j] * s.normal();
    const PrincipalComponents pc = top_principal_components(x, 1);
    const double cosang = std::abs(pc.directions(0, 1));
    CHECK(std::acos(std::min(1.0, cosang)) < 5.0 * std::numbers::pi / 180.0);
    CHECK(pc.variances[0] == doctest::Approx(4.0).epsilon(0.1));
    CHECK(pc.mean[0] == doctest::Approx(3.0).epsilon(0.02));

    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) x(i, j) = sd2[j] * s.normal();
    const PrincipalComponents all = top_principal_components(x, 4);
    const Matrix gram = all.directions * all.directions.transpose();
    CHECK((gram - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(all.directions(k, k == 0 ? 1 : (k == 1 ? 2 : (k == 2 ? 0 : 3)))) > 0.99);
}

TEST_CASE("PCA argument checks") {
    CHECK_THROWS(top_principal_components(Matrix::Zero(1, 3), 1));
    CHECK_THROWS(top_principal_components(Matrix::Zero(5, 3), 4));
}
