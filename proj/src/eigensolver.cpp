#include "eigentrack/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "eigentrack/error.hpp"

namespace eigentrack {

namespace {

class ShiftedFactor {
public:
    ShiftedFactor(const SparseMatrix& a, const SparseMatrix& b, double shift) : shift_(shift)
    {
        // Nudge the shift off (numerically) exact eigenvalues.
        for (int attempt = 0; attempt < 8; ++attempt) {
            SparseMatrix k = a - shift_ * b;
            ldlt_.compute(k);
            if (ldlt_.info() != Eigen::Success) {
                throw SolverError("LDL^T factorization of A - sigma B failed");
            }
            const Eigen::VectorXd& d = ldlt_.vectorD();
            double scale = d.cwiseAbs().maxCoeff();
            if (d.cwiseAbs().minCoeff() > 1e-13 * scale) {
                negatives_ = static_cast<int>((d.array() < 0.0).count());
                return;
            }
            shift_ += 1e-9 * (std::abs(shift_) + 1.0);
        }
        throw SolverError("A - sigma B stays singular under shift perturbation");
    }

    [[nodiscard]] double shift() const { return shift_; }
    [[nodiscard]] int negatives() const { return negatives_; }
    [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return ldlt_.solve(rhs); }

private:
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower> ldlt_;
    double shift_;
    int negatives_ = 0;
};

struct RitzPair {
    double lambda;
    Eigen::VectorXd vector;
};

/// B-orthogonalizes `w` against the columns of `basis` (with `b_basis` = B basis).
void orthogonalize(Eigen::VectorXd& w, const Eigen::MatrixXd& basis, const Eigen::MatrixXd& b_basis,
                   Eigen::Index cols)
{
    if (cols == 0) {
        return;
    }
    for (int pass = 0; pass < 2; ++pass) {
        Eigen::VectorXd h = b_basis.leftCols(cols).transpose() * w;
        w.noalias() -= basis.leftCols(cols) * h;
    }
}

class WindowLanczos {
public:
    WindowLanczos(const SparseMatrix& a, const SparseMatrix& b, Interval window,
                  const SolverOptions& options)
        : a_(a), b_(b), window_(window), options_(options),
          factor_(a, b, 0.5 * (window.lo + window.hi)), rng_(options.seed)
    {}

    /// One Lanczos sweep in the B-orthogonal complement of the locked vectors.
    std::vector<RitzPair> sweep(const Eigen::MatrixXd& locked, const Eigen::MatrixXd& b_locked,
                                int wanted)
    {
        const Eigen::Index n = a_.rows();
        const Eigen::Index k = locked.cols();
        const Eigen::Index m_max =
            std::min<Eigen::Index>(n - k, std::max<Eigen::Index>(80, 40 + 10 * wanted));
        if (m_max <= 0) {
            return {};
        }

        Eigen::MatrixXd v(n, m_max);
        Eigen::MatrixXd bv(n, m_max);
        std::vector<double> alpha, beta;

        Eigen::VectorXd w(n);
        std::normal_distribution<double> gauss;
        for (Eigen::Index i = 0; i < n; ++i) {
            w[i] = gauss(rng_);
        }
        orthogonalize(w, locked, b_locked, k);
        Eigen::VectorXd bw = b_ * w;
        w /= std::sqrt(w.dot(bw));

        int last_count = -1;
        int stale_checks = 0;
        std::vector<RitzPair> result;

        for (Eigen::Index j = 0; j < m_max; ++j) {
            v.col(j) = w;
            bv.col(j) = b_ * w;
            Eigen::VectorXd r = factor_.solve(bv.col(j));
            double a_j = bv.col(j).dot(r);
            alpha.push_back(a_j);
            orthogonalize(r, locked, b_locked, k);
            orthogonalize(r, v, bv, j + 1);
            double b_j = std::sqrt(std::max(0.0, r.dot(b_ * r)));
            beta.push_back(b_j);

            const Eigen::Index steps = j + 1;
            const bool breakdown = b_j <= 1e-14 * std::abs(a_j) || b_j == 0.0;
            const bool last = breakdown || steps == m_max;
            if (steps % 5 == 0 || last) {
                Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), steps);
                Eigen::VectorXd sub = Eigen::Map<Eigen::VectorXd>(beta.data(), steps - 1);
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
                tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
                const Eigen::VectorXd& theta = tri.eigenvalues();
                const Eigen::MatrixXd& s = tri.eigenvectors();

                std::vector<Eigen::Index> converged;
                bool all_converged = true;
                for (Eigen::Index i = 0; i < steps; ++i) {
                    if (theta[i] == 0.0) {
                        continue;
                    }
                    double lambda = factor_.shift() + 1.0 / theta[i];
                    if (lambda < window_.lo || lambda > window_.hi) {
                        continue;
                    }
                    double estimate = std::abs(b_j * s(steps - 1, i));
                    if (breakdown || estimate <= options_.ritz_tol * std::abs(theta[i])) {
                        converged.push_back(i);
                    } else {
                        all_converged = false;
                    }
                }
                int count = static_cast<int>(converged.size());
                stale_checks = (all_converged && count == last_count) ? stale_checks + 1 : 0;
                last_count = count;

                bool enough = count >= wanted;
                bool stagnated = stale_checks >= 4 && steps >= 2 * wanted + 20;
                if (enough || stagnated || last) {
                    for (Eigen::Index i : converged) {
                        Eigen::VectorXd u = v.leftCols(steps) * s.col(i);
                        orthogonalize(u, locked, b_locked, k);
                        u /= std::sqrt(u.dot(b_ * u));
                        result.push_back({factor_.shift() + 1.0 / theta[i], std::move(u)});
                    }
                    return result;
                }
            }
            if (breakdown) {
                break;
            }
            w = r / b_j;
        }
        return result;
    }

    [[nodiscard]] double shift() const { return factor_.shift(); }
    [[nodiscard]] Eigen::VectorXd apply_inverse(const Eigen::VectorXd& rhs) const
    {
        return factor_.solve(rhs);
    }

private:
    const SparseMatrix& a_;
    const SparseMatrix& b_;
    Interval window_;
    SolverOptions options_;
    ShiftedFactor factor_;
    std::mt19937_64 rng_;
};

/// Rayleigh-Ritz on span(basis); keeps the `target` Ritz pairs closest to the
/// window centre (all of them when the basis is exactly `target` wide) and
/// b-normalizes the vectors.
void rayleigh_ritz(const SparseMatrix& a, const SparseMatrix& b, const Eigen::MatrixXd& basis,
                   Interval window, Eigen::Index target, EigenPairs& out)
{
    // B-orthonormalize the basis first so the projected problem is well conditioned.
    Eigen::MatrixXd bb = b * basis;
    Eigen::MatrixXd gram = basis.transpose() * bb;
    gram = 0.5 * (gram + gram.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> g(gram);
    const Eigen::VectorXd& gv = g.eigenvalues();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < gv.size(); ++i) {
        if (gv[i] > 1e-12 * gv.maxCoeff()) {
            keep.push_back(i);
        }
    }
    Eigen::MatrixXd q(basis.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        q.col(static_cast<Eigen::Index>(c)) = basis * g.eigenvectors().col(keep[c]) / std::sqrt(gv[keep[c]]);
    }
    Eigen::MatrixXd ar = q.transpose() * (a * q);
    ar = 0.5 * (ar + ar.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(ar);
    if (small.info() != Eigen::Success) {
        throw SolverError("Rayleigh-Ritz projection failed");
    }
    const Eigen::VectorXd& theta = small.eigenvalues();
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(theta.size()));
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        idx[static_cast<std::size_t>(i)] = i;
    }
    if (theta.size() < target) {
        throw SolverError("Rayleigh-Ritz basis lost rank");
    }
    // The window holds exactly `target` eigenvalues; pick the Ritz values
    // inside it, closest to the centre first, then restore ascending order.
    const double centre = 0.5 * (window.lo + window.hi);
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index x, Eigen::Index y) {
        return std::abs(theta[x] - centre) < std::abs(theta[y] - centre);
    });
    idx.resize(static_cast<std::size_t>(target));
    std::sort(idx.begin(), idx.end());
    out.values.resize(static_cast<std::size_t>(target));
    out.vectors.resize(basis.rows(), target);
    for (Eigen::Index j = 0; j < target; ++j) {
        Eigen::Index i = idx[static_cast<std::size_t>(j)];
        out.values[static_cast<std::size_t>(j)] = theta[i];
        Eigen::VectorXd u = q * small.eigenvectors().col(i);
        out.vectors.col(j) = u / std::sqrt(u.dot(b * u));
    }
}

std::vector<double> relative_residuals(const SparseMatrix& a, const SparseMatrix& b,
                                       const EigenPairs& pairs)
{
    std::vector<double> out;
    for (Eigen::Index j = 0; j < pairs.vectors.cols(); ++j) {
        Eigen::VectorXd u = pairs.vectors.col(j);
        Eigen::VectorXd au = a * u;
        out.push_back((au - pairs.values[static_cast<std::size_t>(j)] * (b * u)).norm() / au.norm());
    }
    return out;
}

} // namespace

int count_below(const SparseMatrix& a, const SparseMatrix& b, double shift)
{
    return ShiftedFactor(a, b, shift).negatives();
}

EigenPairs solve_window(const SparseMatrix& a, const SparseMatrix& b, Interval window,
                        const SolverOptions& options)
{
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
        throw SolverError("A and B must be square and of equal size");
    }
    if (!(window.lo < window.hi)) {
        throw SolverError("empty eigenvalue window");
    }
    const Eigen::Index n = a.rows();
    const int target = count_below(a, b, window.hi) - count_below(a, b, window.lo);

    EigenPairs out;
    out.vectors.resize(n, 0);
    if (target <= 0) {
        return out;
    }

    WindowLanczos lanczos(a, b, window, options);
    Eigen::MatrixXd locked(n, target);
    Eigen::MatrixXd b_locked(n, target);
    Eigen::Index found = 0;
    int barren = 0;
    while (found < target) {
        auto pairs = lanczos.sweep(locked.leftCols(found), b_locked.leftCols(found),
                                   static_cast<int>(target - found));
        if (pairs.empty() && ++barren > options.max_restarts) {
            break;
        }
        for (auto& p : pairs) {
            if (found == target) {
                std::ostringstream os;
                os << "Lanczos found more eigenpairs in [" << window.lo << ", " << window.hi
                   << "] than the inertia count " << target;
                throw SolverError(os.str());
            }
            locked.col(found) = p.vector;
            b_locked.col(found) = b * p.vector;
            ++found;
        }
    }
    if (found != target) {
        std::ostringstream os;
        os << "window completeness unverifiable: found " << found << " of " << target
           << " eigenpairs";
        throw SolverError(os.str());
    }

    // Rayleigh-Ritz on the locked basis, then residual correction rounds
    // on [U, (A - sigma B)^-1 R] while any residual exceeds the tolerance.
    Eigen::MatrixXd basis = locked;
    std::vector<double> residuals;
    for (int round = 0;; ++round) {
        rayleigh_ritz(a, b, basis, window, target, out);
        residuals = relative_residuals(a, b, out);
        double worst = *std::max_element(residuals.begin(), residuals.end());
        if (worst <= options.residual_tol || round == 3) {
            break;
        }
        Eigen::MatrixXd r = a * out.vectors - (b * out.vectors) * Eigen::Map<const Eigen::VectorXd>(
                                                  out.values.data(), target).asDiagonal();
        Eigen::MatrixXd bu = b * out.vectors;
        basis.resize(n, 2 * target);
        basis.leftCols(target) = out.vectors;
        for (Eigen::Index j = 0; j < target; ++j) {
            Eigen::VectorXd z = lanczos.apply_inverse(r.col(j));
            orthogonalize(z, out.vectors, bu, target);
            basis.col(target + j) = z / std::sqrt(std::max(z.dot(b * z), 1e-300));
        }
    }
    for (Eigen::Index j = 0; j < target; ++j) {
        double residual = residuals[static_cast<std::size_t>(j)];
        if (!(residual <= options.residual_tol)) {
            std::ostringstream os;
            os << "eigenpair " << j << " (lambda " << out.values[static_cast<std::size_t>(j)]
               << ") has relative residual " << residual;
            throw SolverError(os.str());
        }
    }
    return out;
}

} // namespace eigentrack
