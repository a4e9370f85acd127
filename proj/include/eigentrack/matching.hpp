#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "eigentrack/fem.hpp"
#include "eigentrack/snapshot.hpp"

namespace eigentrack {

/// D_{j,l} = w1 |lambda_j(mu_i) - lambda_l(mu_k)|
///         + w2 min(||u_j - u_l||_b, ||u_j + u_l||_b)
/// Rows index the first snapshot, columns the second.
struct CostMatrix {
    Eigen::MatrixXd entries;
    std::vector<double> mu_i, mu_k, mu_bar;
    double w1 = 0.0;
    double w2 = 0.0;
};

/// Optimal injective pairing of the shorter side of a cost matrix into the
/// longer side. Indices are zero-based.
struct Assignment {
    /// sigma[j]: index on the longer side matched to index j of the shorter side.
    std::vector<int> sigma;
    /// True when the rows are the shorter side (ties: rows).
    bool rows_shorter = true;
    double cost = 0.0;
    /// Longer side reordered: matched indices in shorter-side order, then the
    /// unmatched ones ascending.
    std::vector<int> order;
};

/// Throws InputError if the snapshots come from different discretizations.
CostMatrix cost_matrix(const Snapshot& first, const Snapshot& second, const SparseMatrix& mass,
                       double w1, double w2);

/// Exact rectangular linear assignment (Hungarian algorithm, shortest
/// augmenting paths with potentials). Among optimal assignments the
/// lexicographically smallest sigma is returned.
Assignment solve_assignment(const Eigen::MatrixXd& cost);

/// Result of local a priori matching: the shorter snapshot unchanged, the
/// longer reordered so that matched pairs share positions 0..nbar-1.
struct MatchResult {
    CostMatrix cost;
    Assignment assignment;
    Snapshot first;   // possibly reordered
    Snapshot second;  // possibly reordered
    /// Matched pairs as original (index in first, index in second).
    std::vector<std::pair<int, int>> pairs;
    /// Original index of each position of `first` / `second`.
    std::vector<int> first_order, second_order;
};

MatchResult apriori_match(const Snapshot& first, const Snapshot& second, const SparseMatrix& mass,
                          double w1, double w2);

/// Applies a position permutation: out[p] = in[order[p]].
Snapshot reorder(const Snapshot& snap, const std::vector<int>& order);

} // namespace eigentrack
