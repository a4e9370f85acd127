#include "eigentrack/verification.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "eigentrack/error.hpp"

namespace eigentrack {

Eigen::MatrixXd projection_matrix(const Snapshot& matched_first, const Snapshot& matched_second,
                                  const SparseMatrix& mass)
{
    if (matched_first.fingerprint != matched_second.fingerprint ||
        matched_first.vectors.rows() != matched_second.vectors.rows()) {
        throw InputError("projection_matrix: snapshots come from different discretizations");
    }
    Eigen::MatrixXd b_second = mass * matched_second.vectors;
    return (matched_first.vectors.transpose() * b_second).cwiseAbs();
}

namespace {

double max_relative_gap(const std::vector<double>& values, int j, const std::vector<int>& indices)
{
    const double ref = values[static_cast<std::size_t>(j)];
    double gap = 0.0;
    for (int g : indices) {
        gap = std::max(gap, std::abs(ref - values[static_cast<std::size_t>(g)]) / std::abs(ref));
    }
    return gap;
}

void add_cluster(std::vector<std::vector<int>>& clusters, std::set<int> members)
{
    // Merge with every existing cluster that shares a member.
    for (auto it = clusters.begin(); it != clusters.end();) {
        bool overlaps = std::any_of(it->begin(), it->end(), [&](int m) { return members.count(m); });
        if (overlaps) {
            members.insert(it->begin(), it->end());
            it = clusters.erase(it);
        } else {
            ++it;
        }
    }
    clusters.emplace_back(members.begin(), members.end());
    std::sort(clusters.begin(), clusters.end());
}

} // namespace

CertificationReport verify_projection(const Eigen::MatrixXd& projection,
                                      const std::vector<double>& first_values,
                                      const std::vector<double>& second_values, double t_pi,
                                      double t_lambda)
{
    const Eigen::Index rows = projection.rows();
    const Eigen::Index cols = projection.cols();
    if (static_cast<std::size_t>(rows) != first_values.size() ||
        static_cast<std::size_t>(cols) != second_values.size()) {
        throw InputError("verify: projection shape does not match the eigenvalue lists");
    }
    CertificationReport report;
    report.projection = projection;
    Eigen::MatrixXd& pi = report.truncated;
    pi = projection;

    const Eigen::Index nbar = std::min(rows, cols);
    for (Eigen::Index j = 0; j < nbar; ++j) {
        for (Eigen::Index l = 0; l < cols; ++l) {
            if (pi(j, j) >= pi(j, l) + t_pi) {
                pi(j, l) = 0.0;
            }
        }
        for (Eigen::Index l = 0; l < rows; ++l) {
            if (pi(j, j) >= pi(l, j) + t_pi) {
                pi(l, j) = 0.0;
            }
        }
        PatternDiagnostic diag;
        diag.j = static_cast<int>(j);
        for (Eigen::Index l = 0; l < cols; ++l) {
            if (pi(j, l) != 0.0) {
                diag.r1.push_back(static_cast<int>(l));
            }
        }
        for (Eigen::Index l = 0; l < rows; ++l) {
            if (pi(l, j) != 0.0) {
                diag.r2.push_back(static_cast<int>(l));
            }
        }
        report.diagnostics.push_back(diag);

        if (diag.r1.size() <= 1 && diag.r2.size() <= 1) {
            continue;
        }
        if (diag.r1.size() != diag.r2.size()) {
            report.certified = false;
            report.failed_at = static_cast<int>(j);
            break;
        }
        double gap = std::max(max_relative_gap(first_values, static_cast<int>(j), diag.r2),
                              max_relative_gap(second_values, static_cast<int>(j), diag.r1));
        if (gap > t_lambda) {
            report.certified = false;
            report.failed_at = static_cast<int>(j);
            break;
        }
        std::set<int> members(diag.r1.begin(), diag.r1.end());
        members.insert(diag.r2.begin(), diag.r2.end());
        members.insert(static_cast<int>(j));
        add_cluster(report.clusters, std::move(members));
    }
    return report;
}

CertificationReport verify(const Snapshot& matched_first, const Snapshot& matched_second,
                           const SparseMatrix& mass, double t_pi, double t_lambda)
{
    return verify_projection(projection_matrix(matched_first, matched_second, mass),
                             matched_first.values, matched_second.values, t_pi, t_lambda);
}

} // namespace eigentrack
