#include "spheres/linalg.hpp"

#include "spheres/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace spheres {

namespace {

// Applies the rotation that annihilates a(p, q). Both triangles are kept in sync.
void jacobi_rotate(Matrix& a, Eigen::Index p, Eigen::Index q) {
    const double apq = a(p, q);
    const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
    double t;
    if (std::abs(theta) > 1e150) {
        t = 0.5 / theta;
    } else {
        t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    }
    const double c = 1.0 / std::sqrt(t * t + 1.0);
    const double s = t * c;

    const Eigen::Index n = a.rows();
    for (Eigen::Index k = 0; k < n; ++k) {
        if (k == p || k == q) continue;
        const double akp = a(k, p);
        const double akq = a(k, q);
        const double new_kp = c * akp - s * akq;
        const double new_kq = s * akp + c * akq;
        a(k, p) = a(p, k) = new_kp;
        a(k, q) = a(q, k) = new_kq;
    }
    a(p, p) -= t * apq;
    a(q, q) += t * apq;
    a(p, q) = a(q, p) = 0.0;
}

}  // namespace

Vector symmetric_eigenvalues(const Matrix& symmetric) {
    if (symmetric.rows() != symmetric.cols()) {
        throw DimensionError("symmetric_eigenvalues: matrix is not square");
    }
    if (!symmetric.allFinite()) throw DomainError("symmetric_eigenvalues: non-finite entry");

    Matrix a = 0.5 * (symmetric + symmetric.transpose());
    const Eigen::Index n = a.rows();
    constexpr double eps = std::numeric_limits<double>::epsilon();
    // Entries below this are noise relative to the whole matrix.
    const double floor = 1e-3 * eps * eps * std::max(a.norm(), std::numeric_limits<double>::min());

    bool converged = n <= 1;
    for (int sweep = 0; sweep < kJacobiMaxSweeps && !converged; ++sweep) {
        bool rotated = false;
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = std::abs(a(p, q));
                if (apq <= floor) continue;
                // Relative criterion: small against the geometric mean of the pivots.
                if (apq <= eps * std::sqrt(std::abs(a(p, p)) * std::abs(a(q, q)))) continue;
                jacobi_rotate(a, p, q);
                rotated = true;
            }
        }
        converged = !rotated;
    }
    if (!converged) {
        throw ConvergenceError("symmetric_eigenvalues: no convergence after " +
                               std::to_string(kJacobiMaxSweeps) + " Jacobi sweeps");
    }

    Vector eig = a.diagonal();
    std::sort(eig.data(), eig.data() + eig.size(), std::greater<>());
    return eig;
}

Vector singular_values(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) return Vector(0);
    const Matrix gram = m.rows() >= m.cols() ? Matrix(m.transpose() * m) : Matrix(m * m.transpose());
    Vector eig = symmetric_eigenvalues(gram);
    for (Eigen::Index i = 0; i < eig.size(); ++i) eig[i] = std::sqrt(std::max(eig[i], 0.0));
    return eig;
}

PrincipalComponents top_principal_components(const Matrix& data, std::size_t k) {
    const Eigen::Index n_rows = data.rows();
    const Eigen::Index dim = data.cols();
    if (n_rows < 2) throw DomainError("top_principal_components: need at least two rows");
    if (k == 0 || static_cast<Eigen::Index>(k) > dim) {
        throw DomainError("top_principal_components: k must be in [1, dim]");
    }

    PrincipalComponents out;
    out.mean = data.colwise().mean().transpose();
    const Matrix centered = data.rowwise() - out.mean.transpose();
    const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n_rows - 1);
    const double scale = std::max(cov.diagonal().sum(), std::numeric_limits<double>::min());

    const auto kk = static_cast<Eigen::Index>(k);
    out.directions = Matrix::Zero(kk, dim);
    out.variances = Vector::Zero(kk);

    auto orthogonalise = [&](Vector& v, Eigen::Index found) {
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index j = 0; j < found; ++j) {
                const auto dir = out.directions.row(j).transpose();
                v -= dir.dot(v) * dir;
            }
        }
    };

    for (Eigen::Index comp = 0; comp < kk; ++comp) {
        RngStream start_stream(0x9ca5eedULL, static_cast<std::uint64_t>(comp));
        Vector v = standard_normals(start_stream, static_cast<std::size_t>(dim));
        orthogonalise(v, comp);
        v.normalize();

        double lambda = 0.0;
        bool converged = false;
        for (int it = 0; it < kPowerIterationBudget; ++it) {
            Vector w = cov * v;
            orthogonalise(w, comp);
            lambda = v.dot(w);
            const double residual = (w - lambda * v).norm();
            const double wnorm = w.norm();
            if (wnorm <= 1e-14 * scale) {
                // v lies in the numerical null space of the deflated covariance.
                lambda = 0.0;
                converged = true;
                break;
            }
            v = w / wnorm;
            if (residual <= 1e-10 * scale) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            throw ConvergenceError("top_principal_components: component " + std::to_string(comp) +
                                   " did not converge; eigengap is numerically zero");
        }
        orthogonalise(v, comp);
        v.normalize();
        out.directions.row(comp) = v.transpose();
        out.variances[comp] = std::max(lambda, 0.0);
    }

    // Power iteration can swap near-degenerate pairs; report in descending order.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(kk));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return out.variances[a] > out.variances[b]; });
    PrincipalComponents sorted{Matrix(kk, dim), Vector(kk), out.mean};
    for (Eigen::Index i = 0; i < kk; ++i) {
        sorted.directions.row(i) = out.directions.row(order[static_cast<std::size_t>(i)]);
        sorted.variances[i] = out.variances[order[static_cast<std::size_t>(i)]];
    }
    return sorted;
}

}  // namespace spheres
