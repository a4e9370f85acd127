#include "eigentrack/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "eigentrack/error.hpp"

namespace eigentrack {

CostMatrix cost_matrix(const Snapshot& first, const Snapshot& second, const SparseMatrix& mass,
                       double w1, double w2)
{
    if (first.fingerprint != second.fingerprint || first.vectors.rows() != second.vectors.rows()) {
        throw InputError("cost_matrix: snapshots come from different discretizations");
    }
    CostMatrix d;
    d.w1 = w1;
    d.w2 = w2;
    d.mu_i = first.point.phys();
    d.mu_k = second.point.phys();
    d.mu_bar.resize(d.mu_i.size());
    for (std::size_t k = 0; k < d.mu_i.size(); ++k) {
        d.mu_bar[k] = 0.5 * (d.mu_i[k] + d.mu_k[k]);
    }
    const int rows = first.size();
    const int cols = second.size();
    d.entries.resize(rows, cols);
    auto b_norm = [&](const Eigen::VectorXd& v) {
        return std::sqrt(std::max(0.0, v.dot(mass * v)));
    };
    for (int j = 0; j < rows; ++j) {
        for (int l = 0; l < cols; ++l) {
            double minus = b_norm(first.vectors.col(j) - second.vectors.col(l));
            double plus = b_norm(first.vectors.col(j) + second.vectors.col(l));
            d.entries(j, l) = w1 * std::abs(first.values[static_cast<std::size_t>(j)] -
                                            second.values[static_cast<std::size_t>(l)]) +
                              w2 * std::min(minus, plus);
        }
    }
    return d;
}

namespace {

/// Hungarian algorithm for rows <= cols. Returns column of each row.
std::vector<int> hungarian(const Eigen::MatrixXd& a)
{
    const int n = static_cast<int>(a.rows());
    const int m = static_cast<int>(a.cols());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0];
            int j1 = 0;
            double delta = inf;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) {
                    continue;
                }
                double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> col_of_row(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= m; ++j) {
        if (p[j] != 0) {
            col_of_row[static_cast<std::size_t>(p[j] - 1)] = j - 1;
        }
    }
    return col_of_row;
}

double assignment_cost(const Eigen::MatrixXd& a, const std::vector<int>& col_of_row)
{
    double total = 0.0;
    for (std::size_t i = 0; i < col_of_row.size(); ++i) {
        total += a(static_cast<Eigen::Index>(i), col_of_row[i]);
    }
    return total;
}

/// Optimal cost of assigning rows `first_row..` into the columns not in `taken`.
double residual_optimum(const Eigen::MatrixXd& a, int first_row, const std::vector<char>& taken)
{
    const int rows = static_cast<int>(a.rows()) - first_row;
    if (rows == 0) {
        return 0.0;
    }
    std::vector<int> free_cols;
    for (int c = 0; c < a.cols(); ++c) {
        if (!taken[static_cast<std::size_t>(c)]) {
            free_cols.push_back(c);
        }
    }
    Eigen::MatrixXd sub(rows, static_cast<Eigen::Index>(free_cols.size()));
    for (int r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < free_cols.size(); ++c) {
            sub(r, static_cast<Eigen::Index>(c)) = a(first_row + r, free_cols[c]);
        }
    }
    return assignment_cost(sub, hungarian(sub));
}

/// Lexicographically smallest optimal assignment for rows <= cols.
std::vector<int> lexicographic_optimum(const Eigen::MatrixXd& a)
{
    std::vector<int> best = hungarian(a);
    const double optimum = assignment_cost(a, best);
    const double tol = 64.0 * std::numeric_limits<double>::epsilon() *
                       std::max(1.0, a.cwiseAbs().sum());
    std::vector<int> chosen;
    std::vector<char> taken(static_cast<std::size_t>(a.cols()), 0);
    double prefix = 0.0;
    for (int row = 0; row < a.rows(); ++row) {
        bool fixed = false;
        for (int c = 0; c < a.cols() && !fixed; ++c) {
            if (taken[static_cast<std::size_t>(c)]) {
                continue;
            }
            taken[static_cast<std::size_t>(c)] = 1;
            double total = prefix + a(row, c) + residual_optimum(a, row + 1, taken);
            if (total <= optimum + tol) {
                chosen.push_back(c);
                prefix += a(row, c);
                fixed = true;
            } else {
                taken[static_cast<std::size_t>(c)] = 0;
            }
        }
        if (!fixed) {
            return best; // rounding prevented the greedy pass; keep the plain optimum
        }
    }
    return chosen;
}

} // namespace

Assignment solve_assignment(const Eigen::MatrixXd& cost)
{
    if (!cost.allFinite()) {
        throw InputError("solve_assignment: cost matrix has non-finite entries");
    }
    Assignment out;
    out.rows_shorter = cost.rows() <= cost.cols();
    const Eigen::MatrixXd a = out.rows_shorter ? cost : Eigen::MatrixXd(cost.transpose());
    if (a.rows() > 0) {
        out.sigma = lexicographic_optimum(a);
    }
    out.cost = assignment_cost(a, out.sigma);
    std::vector<char> matched(static_cast<std::size_t>(a.cols()), 0);
    for (int c : out.sigma) {
        out.order.push_back(c);
        matched[static_cast<std::size_t>(c)] = 1;
    }
    for (int c = 0; c < a.cols(); ++c) {
        if (!matched[static_cast<std::size_t>(c)]) {
            out.order.push_back(c);
        }
    }
    return out;
}

Snapshot reorder(const Snapshot& snap, const std::vector<int>& order)
{
    Snapshot out;
    out.point = snap.point;
    out.fingerprint = snap.fingerprint;
    out.values.resize(order.size());
    out.vectors.resize(snap.vectors.rows(), static_cast<Eigen::Index>(order.size()));
    for (std::size_t p = 0; p < order.size(); ++p) {
        out.values[p] = snap.values[static_cast<std::size_t>(order[p])];
        out.vectors.col(static_cast<Eigen::Index>(p)) = snap.vectors.col(order[p]);
    }
    return out;
}

MatchResult apriori_match(const Snapshot& first, const Snapshot& second, const SparseMatrix& mass,
                          double w1, double w2)
{
    MatchResult r;
    r.cost = cost_matrix(first, second, mass, w1, w2);
    r.assignment = solve_assignment(r.cost.entries);

    std::vector<int> identity_first(static_cast<std::size_t>(first.size()));
    std::vector<int> identity_second(static_cast<std::size_t>(second.size()));
    std::iota(identity_first.begin(), identity_first.end(), 0);
    std::iota(identity_second.begin(), identity_second.end(), 0);

    if (r.assignment.rows_shorter) {
        r.first_order = identity_first;
        r.second_order = r.assignment.order;
    } else {
        r.first_order = r.assignment.order;
        r.second_order = identity_second;
    }
    r.first = reorder(first, r.first_order);
    r.second = reorder(second, r.second_order);
    for (std::size_t j = 0; j < r.assignment.sigma.size(); ++j) {
        r.pairs.emplace_back(r.first_order[j], r.second_order[j]);
    }
    return r;
}

} // namespace eigentrack
