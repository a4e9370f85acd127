#pragma once

#include <vector>

#include <Eigen/Core>

#include "eigentrack/fem.hpp"
#include "eigentrack/snapshot.hpp"

namespace eigentrack {

/// Pi_{j,l} = |u_j(mu_i)^T B u_l(mu_k)| for already-matched snapshots.
Eigen::MatrixXd projection_matrix(const Snapshot& matched_first, const Snapshot& matched_second,
                                  const SparseMatrix& mass);

/// Non-zero pattern after truncating row j and column j (zero-based).
struct PatternDiagnostic {
    int j = 0;
    std::vector<int> r1; // columns still non-zero in row j
    std::vector<int> r2; // rows still non-zero in column j
};

struct CertificationReport {
    bool certified = true;
    /// Position j at which the loop stopped with a refine verdict (-1 if none).
    int failed_at = -1;
    std::vector<PatternDiagnostic> diagnostics;
    /// Matched positions declared indistinguishable; disjoint, each of size >= 2.
    std::vector<std::vector<int>> clusters;
    Eigen::MatrixXd projection;  // before truncation
    Eigen::MatrixXd truncated;   // in-place truncated state when the loop ended
};

/// Local a posteriori verification of an a priori matched subinterval.
///
/// For each matched position j the off-diagonal entries of row j and column
/// j with Pi_jj >= Pi_jl + t_pi are zeroed in place. Singleton patterns pass;
/// patterns of unequal size refine. Equal patterns of size > 1 are a cluster
/// candidate: the relative eigenvalue gaps to lambda_j over the row indices
/// (first snapshot) and column indices (second snapshot) must not exceed
/// t_lambda, otherwise the subinterval is refined. The loop stops at the
/// first refine.
CertificationReport verify(const Snapshot& matched_first, const Snapshot& matched_second,
                           const SparseMatrix& mass, double t_pi, double t_lambda);

/// Same, on a precomputed projection matrix and eigenvalue lists.
CertificationReport verify_projection(const Eigen::MatrixXd& projection,
                                      const std::vector<double>& first_values,
                                      const std::vector<double>& second_values, double t_pi,
                                      double t_lambda);

} // namespace eigentrack
