#pragma once

// Analytic side of the study: CLT error-rate estimates for ellipsoidal
// decision boundaries, the cap isoperimetric bound and its Monte Carlo
// oracle, the truncated-sum (minimal subspace) classifier, and PCA
// halfspaces on image data.

#include "spheres/attack.hpp"
#include "spheres/dataset.hpp"
#include "spheres/models.hpp"

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace spheres {

// ---------------------------------------------------------------------------
// CLT error rates

struct CltEstimate {
    double rate = 0.0;
    double mean = 0.0;    ///< μ̂ = Σ(γ_i − 1)
    double stddev = 0.0;  ///< σ̂ = sqrt(2 Σ(γ_i − 1)²)
    bool small_n = false; ///< fewer than 30 dimensions: outside the CLT regime
};

/// With γ_i = α_i (inner) or R²·α_i (outer), X = Σ(γ_i − 1)u_i² for u_i iid
/// N(0,1). Inner error ≈ P(X > 0) = Φ(μ̂/σ̂), outer error ≈ P(X < 0) = Φ(−μ̂/σ̂).
/// σ̂ = 0 gives exactly 0 or 1; the boundary μ̂ = 0 counts as correct.
CltEstimate clt_error_rate(const AlphaSpectrum& spectrum, Shell shell);

/// Same estimate from explicit γ values (no radius scaling applied).
CltEstimate clt_error_rate_gamma(std::span<const double> gammas, Shell shell);

/// Fraction of `samples` uniform points u of the unit sphere in R^n with
/// Σγ_i u_i² > 1 (inner) or < 1 (outer), n = spectrum size. Requires samples >= 1000.
/// Work is split into fixed-size shards on substreams of `stream`.
double mc_error_rate(const AlphaSpectrum& spectrum, Shell shell, std::size_t samples, RngStream& stream);

// ---------------------------------------------------------------------------
// Caps and the distance bound

/// Φ⁻¹(1 − μ)/√n. μ must lie in (0, 0.5]; μ = 0.5 gives exactly 0.
double theorem_bound(double mu, std::size_t n);

struct CapSpec {
    std::size_t n = 0;
    double mu = 0.5;
    double alpha = 0.0;  ///< P[N(0,1) > α] = μ
    double t = 0.0;      ///< α/√n, cap is {x : x₁ > t}
};

/// Throws DomainError unless μ ∈ (0, 0.5] and n >= 2.
CapSpec make_cap(std::size_t n, double mu);

enum class CapFormula {
    Paper,       ///< max(√2(t − x₁), 0)
    ExactChord,  ///< Euclidean distance to the nearest point of the cap on the sphere
};

/// Per-point distance from a unit-sphere point with first coordinate x₁.
double cap_distance(double x1, double t, CapFormula formula);

/// First coordinates of `samples` uniform points of the unit sphere in R^n.
Vector sphere_first_coordinates(std::size_t n, std::size_t samples, RngStream& stream);

/// Mean cap distance over `samples` uniform sphere points. Requires samples >= 10⁴.
double mc_cap_distance(const CapSpec& cap, std::size_t samples, RngStream& stream, CapFormula formula);

struct BoundPoint {
    double mu = 0.0;
    double t = 0.0;
    double d_theory = 0.0;
    double d_paper = 0.0;
    double d_chord = 0.0;
};

struct BoundCurve {
    std::size_t n = 0;
    std::size_t samples = 0;
    std::vector<BoundPoint> points;
};

/// Theory and both Monte Carlo distances per μ. One set of sphere samples is
/// shared by every μ, so the curve is monotone up to the formulas themselves.
BoundCurve bound_curve(std::size_t n, std::span<const double> mus, std::size_t samples, RngStream& stream);

/// CSV: header "mu,t,d_theory,d_mc_paper,d_mc_exact_chord".
void write_bound_curve_csv(std::ostream& os, const BoundCurve& curve);

// ---------------------------------------------------------------------------
// Minimal subspace: classify by Σ_{i≤k} x_i² against b

struct SubspaceResult {
    std::size_t n = 0;
    std::size_t k = 0;
    double b = 0.0;
    double fraction = 0.0;  ///< k/n
    double inner_error = 0.0;
    double outer_error = 0.0;
};

/// Error rates of the k-coordinate classifier with the threshold b that
/// equalises the CLT inner and outer estimates (bisection on log b over
/// [k/n, R²k/n], 60 iterations).
SubspaceResult subspace_classifier(std::size_t n, std::size_t k, double radius);

/// Smallest k whose equalised error is at most `target_error`.
/// Requires target ∈ (0, 0.5) and n >= 30; throws InfeasibleError if k = n misses.
SubspaceResult minimal_subspace_fraction(std::size_t n, double target_error, double radius);

/// CSV: header "target_error,k,fraction,b,inner_error,outer_error".
void write_subspace_csv(std::ostream& os, std::span<const double> targets, std::span<const SubspaceResult> rows);

// ---------------------------------------------------------------------------
// Halfspaces E = {x : w·x > b}

struct HalfspaceSet {
    Vector w;  ///< unit normal
    double b = 0.0;
    std::size_t component = 0;  ///< principal component index used for w (0 = top)
    double tail_fraction = 0.01;
    std::size_t tail_count = 0;  ///< training points with w·x > b
    std::size_t train_size = 0;
    std::string pixel_scaling = "[0,1]";
    bool centered_pca = true;
};

/// w = principal direction `component` of the training images (mean-centred
/// PCA). Of ±w, the sign with the larger mean training distance to E is kept.
/// b is the (m+1)-th largest projection, m = ⌈tail_fraction·N⌉, so exactly m
/// points satisfy w·x > b. If the m-th and (m+1)-th projections tie, b is
/// lowered by one ulp and every tied point joins E.
HalfspaceSet pca_halfspace(const Matrix& train, double tail_fraction = 0.01, std::size_t component = 0);

/// Threshold for a given direction as in pca_halfspace. Returns (b, tail count).
std::pair<double, std::size_t> tail_threshold(const Vector& projections, double tail_fraction);

/// max(b − w·x, 0)/‖w‖ for one point.
double halfspace_distance(const HalfspaceSet& hs, const Eigen::Ref<const Vector>& x);

/// μ = fraction of rows of `test` in E, dmean = mean halfspace_distance over
/// all rows (points in E contribute 0). `distances` holds every row's value.
ErrorSetStats halfspace_stats(const HalfspaceSet& hs, const Matrix& test);

}  // namespace spheres
