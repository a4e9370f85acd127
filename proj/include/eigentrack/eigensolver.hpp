#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "eigentrack/config.hpp"
#include "eigentrack/fem.hpp"

namespace eigentrack {

/// Eigenpairs of A u = lambda B u with B-orthonormal columns.
struct EigenPairs {
    std::vector<double> values;  // ascending
    Eigen::MatrixXd vectors;     // N x n
};

struct SolverOptions {
    double ritz_tol = 1e-13;      // relative Ritz residual for convergence
    double residual_tol = 1e-8;   // required ||A u - lambda B u|| / ||A u||
    int max_restarts = 64;
    std::uint64_t seed = 0x5eedULL;
};

/// Number of eigenvalues of (A, B) strictly below `shift` (Sylvester inertia
/// of A - shift B from a sparse LDL^T factorization).
int count_below(const SparseMatrix& a, const SparseMatrix& b, double shift);

/// All eigenpairs with lambda in [window.lo, window.hi], ascending.
///
/// The eigenvalue count is certified by inertia at both window ends; the
/// pairs themselves come from shift-invert Lanczos about the window centre
/// with full reorthogonalization, locking converged vectors and restarting
/// until the certified count is reached (this also recovers multiple
/// eigenvalues). A final Rayleigh-Ritz step on the locked basis makes the
/// vectors B-orthonormal to rounding. Throws SolverError on breakdown or if
/// the count cannot be met.
EigenPairs solve_window(const SparseMatrix& a, const SparseMatrix& b, Interval window,
                        const SolverOptions& options = {});

} // namespace eigentrack
