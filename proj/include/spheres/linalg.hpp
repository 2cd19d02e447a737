#pragma once

#include "spheres/numerics.hpp"

#include <cstddef>

namespace spheres {

/// Sweep budget of the cyclic Jacobi eigensolver.
inline constexpr int kJacobiMaxSweeps = 100;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted descending.
///
/// Only the lower triangle is trusted to be symmetric with the upper one; the
/// input is symmetrised first. Throws ConvergenceError when the off-diagonal
/// mass is still above tolerance after kJacobiMaxSweeps sweeps.
Vector symmetric_eigenvalues(const Matrix& symmetric);

/// The min(rows, cols) singular values of `m`, descending.
///
/// Computed as square roots of the eigenvalues of the smaller Gram matrix
/// (MᵀM or MMᵀ) via symmetric_eigenvalues. Tiny negative eigenvalues from
/// rounding are clamped to zero.
Vector singular_values(const Matrix& m);

struct PrincipalComponents {
    Matrix directions;  ///< k × dim, one unit direction per row
    Vector variances;   ///< k, descending
    Vector mean;        ///< dim, the sample mean subtracted before the covariance
};

/// Power-iteration budget per component.
inline constexpr int kPowerIterationBudget = 20000;

/// Top-k principal components of the rows of `data`.
///
/// The covariance uses the sample mean and divides by N-1. Each component is
/// found by power iteration on the deflated covariance, re-orthogonalised
/// against earlier components at every step. Throws ConvergenceError when a
/// component fails to settle within kPowerIterationBudget iterations.
PrincipalComponents top_principal_components(const Matrix& data, std::size_t k);

}  // namespace spheres
