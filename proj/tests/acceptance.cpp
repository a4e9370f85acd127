// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <fmt/format.h>

#include "eigentrack/eigensolver.hpp"
#include "eigentrack/matching.hpp"
#include "eigentrack/propagation.hpp"
#include "eigentrack/refinement.hpp"
#include "eigentrack/snapshot.hpp"
#include "eigentrack/surrogate_report.hpp"
#include "eigentrack/verification.hpp"
#include "test_support.hpp"

using namespace eigentrack;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Check {
    bool ok = true;
    std::string detail;

    void expect(bool cond, const std::string& what)
    {
        if (!cond) {
            ok = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool within(double got, double want, double rel) { return std::abs(got - want) <= rel * std::abs(want); }

RunConfig fresh(const std::string& file)
{
    RunConfig cfg = fixtures::bundled(file, "acceptance");
    cfg.cache_dir = fixtures::scratch("acceptance") / "cache" / cfg.cache_dir.filename();
    return cfg;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Check analytic_spectrum()
{
    Check c;
    auto t0 = Clock::now();
    constexpr double pi2 = std::numbers::pi * std::numbers::pi;
    auto solve = [](int n) {
        Mesh m = build_mesh(n);
        return solve_window(assemble_stiffness(m, Eigen::Matrix2d::Identity()), assemble_mass(m), {0.0, 100.0});
    };
    EigenPairs fine = solve(65);
    const double exact[] = {2 * pi2, 5 * pi2, 5 * pi2, 8 * pi2};
    c.expect(fine.values.size() >= 4, "fewer than 4 eigenvalues");
    for (std::size_t k = 0; k < 4 && k < fine.values.size(); ++k) {
        c.expect(within(fine.values[k], exact[k], 0.01), fmt::format("lambda_{} = {}", k + 1, fine.values[k]));
    }
    double ratio = (solve(33).values.at(0) - exact[0]) / (fine.values.at(0) - exact[0]);
    c.expect(ratio >= 3.0 && ratio <= 5.0, fmt::format("h^2 ratio {}", ratio));
    double t = seconds_since(t0);
    c.expect(t < 30.0, fmt::format("runtime {:.1f} s", t));
    c.detail = c.ok ? fmt::format("ratio {:.3f}, {:.1f} s", ratio, t) : c.detail;
    return c;
}

Check snapshot_fixture(SnapshotStore& store)
{
    Check c;
    auto t0 = Clock::now();
    const Box& box = store.config().box;
    SnapshotPtr a = store.get(snap_to_grid({0.4}, box));
    SnapshotPtr b = store.get(snap_to_grid({0.7}, box));
    const std::vector<double> pa{80.8, 137.9, 230.6, 265.9};
    const std::vector<double> pb{38.2, 81.1, 109.7, 129.4, 188.6, 189.9, 214.8, 260.9, 261.9};
    c.expect(a->size() == 4, fmt::format("{} eigenvalues at 0.4", a->size()));
    c.expect(b->size() == 9, fmt::format("{} eigenvalues at 0.7", b->size()));
    for (std::size_t k = 0; k < pa.size() && k < a->values.size(); ++k) {
        c.expect(within(a->values[k], pa[k], 0.015), fmt::format("0.4: {} vs {}", a->values[k], pa[k]));
    }
    for (std::size_t k = 0; k < pb.size() && k < b->values.size(); ++k) {
        c.expect(within(b->values[k], pb[k], 0.015), fmt::format("0.7: {} vs {}", b->values[k], pb[k]));
    }
    double t = seconds_since(t0);
    c.expect(t < 60.0, fmt::format("runtime {:.1f} s", t));
    c.detail = c.ok ? fmt::format("n = 4 and 9, {:.1f} s", t) : c.detail;
    return c;
}

MatchResult fixture_match(SnapshotStore& store)
{
    const Box& box = store.config().box;
    return apriori_match(*store.get(snap_to_grid({0.4}, box)), *store.get(snap_to_grid({0.7}, box)),
                         store.mass(), 1.0, 200.0);
}

Check matching_fixture(SnapshotStore& store)
{
    Check c;
    MatchResult m = fixture_match(store);
    c.expect(m.assignment.sigma == std::vector<int>{0, 1, 4, 7}, "sigma differs from (1, 2, 5, 8)");
    const std::vector<double> paper{38.2, 81.1, 188.6, 260.9, 109.7, 129.4, 189.9, 214.8, 261.9};
    c.expect(m.second.values.size() == paper.size(), "reordered list length");
    for (std::size_t k = 0; k < paper.size() && k < m.second.values.size(); ++k) {
        c.expect(within(m.second.values[k], paper[k], 0.015),
                 fmt::format("position {}: {} vs {}", k + 1, m.second.values[k], paper[k]));
    }
    c.detail = c.ok ? "sigma = (1, 2, 5, 8)" : c.detail;
    return c;
}

Check verification_fixture(SnapshotStore& store)
{
    Check c;
    MatchResult m = fixture_match(store);
    CertificationReport r = verify(m.first, m.second, store.mass(), 0.21, 0.001);
    const Eigen::MatrixXd& pi = r.projection;
    c.expect(std::abs(pi(0, 0) - 0.997) <= 0.02, fmt::format("Pi11 {}", pi(0, 0)));
    c.expect(std::abs(pi(1, 1) - 0.778) <= 0.02, fmt::format("Pi22 {}", pi(1, 1)));
    c.expect(std::abs(pi(1, 4) - 0.622) <= 0.02, fmt::format("Pi25 {}", pi(1, 4)));
    c.expect(std::abs(pi(3, 1) - 0.617) <= 0.02, fmt::format("Pi42 {}", pi(3, 1)));
    c.expect(!r.certified, "verdict certified");
    c.expect(r.diagnostics.size() == 2, "loop did not stop at j = 2");
    if (r.diagnostics.size() == 2) {
        c.expect(r.diagnostics[0].r1.size() == 1 && r.diagnostics[0].r2.size() == 1, "j = 1 not a singleton");
        c.expect(r.diagnostics[1].r1.size() == 2 && r.diagnostics[1].r2.size() == 2, "j = 2 patterns not 2/2");
    }
    c.expect(r.clusters.empty(), "cluster recorded");
    c.detail = c.ok ? fmt::format("Pi = ({:.4f}, {:.4f}, {:.4f}, {:.4f}), verdict refine", pi(0, 0), pi(1, 1),
                                  pi(1, 4), pi(3, 1))
                    : c.detail;
    return c;
}

Check full_1d(SnapshotStore& store)
{
    Check c;
    auto t0 = Clock::now();
    RunState s = run_adaptive(store, 1);
    c.expect(s.termination == Termination::converged, "not converged");
    c.expect(s.current().level == 3, fmt::format("final level {}", s.current().level));
    const std::vector<double> grid{0.4, 0.55, 0.625, 0.7, 0.775, 0.8125, 0.85, 1.0};
    std::vector<double> got;
    for (const ParamPoint& p : s.current().points) {
        got.push_back(p.phys()[0]);
    }
    bool same = got.size() == grid.size();
    for (std::size_t k = 0; same && k < grid.size(); ++k) {
        same = std::abs(got[k] - grid[k]) < 1e-14;
    }
    c.expect(same, "final grid differs");
    SurfaceLabeling ref = reference_solution(store, 129, 1);
    std::vector<ErrorRow> rows = error_table(s, ref);
    const int table[4][4] = {{3, 2, 2, 2}, {5, 3, 4, 2}, {7, 0, 4, 1}, {8, 0, 2, 0}};
    c.expect(rows.size() == 4, fmt::format("{} levels", rows.size()));
    std::string trace;
    for (std::size_t l = 0; l < rows.size(); ++l) {
        const ErrorRow& r = rows[l];
        trace += fmt::format("({},{},{},{})", r.points_total, r.wrongly_matched, r.subintervals, r.uncertified);
        if (l < 4) {
            c.expect(r.points_total == table[l][0] && r.subintervals == table[l][2] && r.uncertified == table[l][3],
                     fmt::format("level {} counts", l));
            c.expect(r.wrongly_matched == table[l][1], fmt::format("level {} wrongly matched {}", l, r.wrongly_matched));
        }
    }
    double t = seconds_since(t0);
    c.expect(t < 300.0, fmt::format("runtime {:.1f} s", t));
    c.detail = c.ok ? fmt::format("rows {}, {:.1f} s", trace, t) : c.detail + " rows " + trace;
    return c;
}

/// Smallest gap between consecutive eigenvalues 4..7 (ascending) over the
/// reference points whose first coordinate satisfies `keep`.
double band_gap(const SurfaceLabeling& ref, const std::function<bool(double)>& keep)
{
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < ref.points.size(); ++p) {
        const auto& v = ref.values[p];
        if (!keep(ref.points[p].phys()[0]) || v.size() < 7) {
            continue;
        }
        for (std::size_t k = 3; k < 6; ++k) {
            best = std::min(best, v[k + 1] - v[k]);
        }
    }
    return best;
}

Check full_2d(int jobs)
{
    Check c;
    auto t0 = Clock::now();
    RunConfig cfg = fresh("paper_2d.cfg");
    SnapshotStore store(cfg, cfg.cache_dir);
    RunState s = run_adaptive(store, jobs);
    std::vector<LevelSummary> rows = s.summaries();
    c.expect(s.termination == Termination::converged, "not converged");
    c.expect(s.current().level <= 7, fmt::format("final level {}", s.current().level));
    c.expect(rows.back().subintervals_uncertified == 0,
             fmt::format("final uncertified {}", rows.back().subintervals_uncertified));
    int total = rows.back().points_total;
    c.expect(std::abs(total - 64) <= 0.15 * 64, fmt::format("{} points", total));

    // Structural: every point of the final level is the forward point of an
    // uncertified subinterval checked at the level before.
    const LevelState& last = s.current();
    for (const ParamPoint& p : last.added) {
        bool found = false;
        for (const Subinterval& sub : s.checked) {
            found = found || (sub.level == last.level - 1 && !sub.certified() &&
                              midpoint_toward(sub.p, sub.q, s.box) == p);
        }
        c.expect(found, "final-level point " + p.label() + " without an uncertified parent");
    }
    double t_adaptive = seconds_since(t0);

    SurfaceLabeling ref = reference_solution(store, 33, jobs);
    const Interval& axis = cfg.box.axes[0];
    const double mid = 0.5 * (axis.lo + axis.hi);
    double left = band_gap(ref, [&](double x) { return x <= mid + 1e-12; });
    double right = band_gap(ref, [&](double x) { return x >= mid - 1e-12; });
    int added = 0, inside = 0;
    for (std::size_t l = 1; l < s.levels.size(); ++l) {
        for (const ParamPoint& p : s.levels[l].added) {
            ++added;
            double x = p.phys()[0];
            inside += right < left ? x >= mid - 1e-12 : x <= mid + 1e-12;
        }
    }
    double share = added == 0 ? 0.0 : static_cast<double>(inside) / added;
    c.expect(share >= 0.7, fmt::format("{:.0f}% of added points in the small-gap half", 100 * share));
    double t = seconds_since(t0);
    c.expect(t < 1800.0, fmt::format("runtime {:.1f} s", t));
    std::string trace;
    for (const LevelSummary& r : rows) {
        trace += fmt::format("({},{},{})", r.points_total, r.subintervals_checked, r.subintervals_uncertified);
    }
    c.detail = fmt::format("{} points at level {}, rows {}, gap left {:.3g} right {:.3g}, {:.0f}% of {} added "
                           "points in the {} half, adaptive {:.1f} s, total {:.1f} s",
                           total, s.current().level, trace, left, right, 100 * share, added,
                           right < left ? "right" : "left", t_adaptive, t) +
               (c.ok ? "" : "; " + c.detail);
    return c;
}

/// Exhaustive minimum over injections of rows into columns (rows <= cols).
double brute_force(const Eigen::MatrixXd& d)
{
    Eigen::MatrixXd m = d.rows() <= d.cols() ? d : Eigen::MatrixXd(d.transpose());
    double best = std::numeric_limits<double>::infinity();
    std::vector<bool> used(static_cast<std::size_t>(m.cols()), false);
    std::function<void(Eigen::Index, double)> rec = [&](Eigen::Index row, double sum) {
        if (row == m.rows()) {
            best = std::min(best, sum);
            return;
        }
        for (Eigen::Index col = 0; col < m.cols(); ++col) {
            if (!used[static_cast<std::size_t>(col)]) {
                used[static_cast<std::size_t>(col)] = true;
                rec(row + 1, sum + m(row, col));
                used[static_cast<std::size_t>(col)] = false;
            }
        }
    };
    rec(0, 0.0);
    return best;
}

Check assignment_oracle()
{
    Check c;
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> entry(0, 100);
    int mismatches = 0;
    for (int trial = 0; trial < 500; ++trial) {
        int rows = 1 + static_cast<int>(rng() % 6), cols = 1 + static_cast<int>(rng() % 8);
        if (trial % 2) {
            std::swap(rows, cols);
        }
        Eigen::MatrixXd d(rows, cols);
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            d(i) = entry(rng);
        }
        mismatches += solve_assignment(d).cost != brute_force(d);
    }
    c.expect(mismatches == 0, fmt::format("{} of 500 costs differ", mismatches));
    c.detail = c.ok ? "500 of 500 exact" : c.detail;
    return c;
}

Check sparse_grid_fixtures()
{
    Check c;
    Box sq{{{-1.0, 1.0}, {-1.0, 1.0}}};
    auto pt = [&](std::vector<DyadicCoord> r) { return ParamPoint(std::move(r), sq); };
    using D = DyadicCoord;
    c.expect(gamma_set(0) == std::vector<D>{D(0, 0)}, "Gamma(0)");
    c.expect(gamma_set(1) == std::vector<D>{D(-1, 0), D(0, 0), D(1, 0)}, "Gamma(1)");
    c.expect(gamma_set(2) == std::vector<D>{D(-1, 0), D(-1, 1), D(0, 0), D(1, 1), D(1, 0)}, "Gamma(2)");
    c.expect(forward_points(pt({D(-1, 0), D(-1, 0)}), sq) ==
                 PointSet{pt({D(-1, 1), D(-1, 0)}), pt({D(-1, 0), D(-1, 1)})},
             "forward points, left panel");
    c.expect(forward_points(pt({D(-1, 1), D(1, 0)}), sq) ==
                 PointSet{pt({D(-3, 2), D(1, 0)}), pt({D(-1, 2), D(1, 0)}), pt({D(-1, 1), D(1, 1)})},
             "forward points, middle panel");
    c.expect(neighbours(pt({D(-1, 0), D(-1, 0)}), sq) == PointSet{pt({D(0, 0), D(-1, 0)}), pt({D(-1, 0), D(0, 0)})},
             "neighbours, left panel");
    c.expect(neighbours(pt({D(-1, 1), D(1, 1)}), sq) ==
                 PointSet{pt({D(-1, 0), D(1, 1)}), pt({D(0, 0), D(1, 1)}), pt({D(-1, 1), D(0, 0)}),
                          pt({D(-1, 1), D(1, 0)})},
             "neighbours, right panel");
    for (int m = 0; m <= 8; ++m) {
        std::vector<D> a = gamma_set(m), b = gamma_set(m + 1);
        c.expect(std::includes(b.begin(), b.end(), a.begin(), a.end()), fmt::format("Gamma({}) not nested", m));
    }
    std::mt19937_64 rng(99);
    int pairs = 0;
    for (int d = 1; d <= 3; ++d) {
        Box box;
        box.axes.assign(static_cast<std::size_t>(d), Interval{-1.0, 1.0});
        int valid = 0;
        while (valid < 1000) {
            std::vector<D> ref;
            for (int k = 0; k < d; ++k) {
                std::vector<D> g = gamma_set(static_cast<int>(rng() % 8));
                ref.push_back(g[rng() % g.size()]);
            }
            ParamPoint p(ref, box);
            PointSet nb = neighbours(p, box);
            if (nb.empty()) {
                continue;
            }
            auto it = nb.begin();
            std::advance(it, static_cast<long>(rng() % nb.size()));
            c.expect(forward_points(p, box).count(midpoint_toward(p, *it, box)) == 1,
                     "midpoint not a forward point at " + p.key());
            ++valid;
            ++pairs;
        }
    }
    c.detail = c.ok ? fmt::format("all fixtures exact, {} random pairs", pairs) : c.detail;
    return c;
}

Check property_suite(SnapshotStore& store)
{
    Check c;
    const RunConfig& cfg = store.config();
    double worst_norm = 0.0, worst_orth = 0.0;
    for (double mu : {0.4, 0.55, 0.625, 0.7, 0.775, 0.8125, 0.85, 1.0}) {
        SnapshotPtr s = store.get(snap_to_grid({mu}, cfg.box));
        Eigen::MatrixXd g = s->vectors.transpose() * (store.mass() * s->vectors);
        for (int j = 0; j < s->size(); ++j) {
            worst_norm = std::max(worst_norm, std::abs(g(j, j) - 1.0));
            for (int l = 0; l < s->size(); ++l) {
                double lj = s->values[static_cast<std::size_t>(j)], ll = s->values[static_cast<std::size_t>(l)];
                if (l != j && std::abs(lj - ll) / lj > 1e-6) {
                    worst_orth = std::max(worst_orth, std::abs(g(j, l)));
                }
            }
        }
    }
    c.expect(worst_norm <= 1e-10, fmt::format("normalization error {:.3g}", worst_norm));
    c.expect(worst_orth <= 1e-8, fmt::format("orthogonality error {:.3g}", worst_orth));

    SnapshotPtr a = store.get(snap_to_grid({0.4}, cfg.box));
    SnapshotPtr b = store.get(snap_to_grid({0.7}, cfg.box));
    Snapshot fa = *a, fb = *b;
    fa.vectors.col(1) *= -1.0;
    fb.vectors.col(0) *= -1.0;
    fb.vectors.col(6) *= -1.0;
    Eigen::MatrixXd base = cost_matrix(*a, *b, store.mass(), 1.0, 200.0).entries;
    c.expect(cost_matrix(fa, fb, store.mass(), 1.0, 200.0).entries == base, "sign flip changed the cost matrix");
    c.expect(solve_assignment(7.3 * base).sigma == solve_assignment(base).sigma, "scaling changed sigma");

    fs::path root = fixtures::scratch("acceptance");
    std::vector<fs::path> dirs{root / "determinism_a", root / "determinism_b"};
    for (std::size_t k = 0; k < dirs.size(); ++k) {
        fs::remove_all(dirs[k]);
        SnapshotStore own(cfg);  // no disk cache: both runs solve from scratch
        RunState s = run_adaptive(own, static_cast<int>(k) + 1);
        emit_reports(cfg, s, propagate_labels(build_match_graph(s)), std::nullopt, dirs[k]);
    }
    int files = 0;
    for (const auto& e : fs::directory_iterator(dirs[0])) {
        ++files;
        c.expect(slurp(e.path()) == slurp(dirs[1] / e.path().filename()),
                 e.path().filename().string() + " differs between runs");
    }
    c.detail = c.ok ? fmt::format("norm {:.2g}, orth {:.2g}, {} report files identical", worst_norm, worst_orth, files)
                    : c.detail;
    return c;
}

} // namespace

int main()
{
    fs::remove_all(fixtures::scratch("acceptance") / "cache");
    RunConfig cfg1 = fresh("paper_1d.cfg");
    SnapshotStore store1(cfg1, cfg1.cache_dir);
    int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    std::vector<std::pair<std::string, std::function<Check()>>> criteria{
        {"analytic spectrum", [] { return analytic_spectrum(); }},
        {"1D snapshot fixture", [&] { return snapshot_fixture(store1); }},
        {"1D matching fixture", [&] { return matching_fixture(store1); }},
        {"1D verification fixture", [&] { return verification_fixture(store1); }},
        {"full 1D run", [&] { return full_1d(store1); }},
        {"full 2D run", [&] { return full_2d(jobs); }},
        {"assignment oracle", [] { return assignment_oracle(); }},
        {"sparse-grid fixtures", [] { return sparse_grid_fixtures(); }},
        {"property suite", [&] { return property_suite(store1); }},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Check c;
        try {
            c = criteria[k].second();
        } catch (const std::exception& e) {
            c.ok = false;
            c.detail = std::string("exception: ") + e.what();
        }
        failed += !c.ok;
        std::cout << fmt::format("{} criterion {}: {}: {}\n", c.ok ? "PASS" : "FAIL", k + 1, criteria[k].first,
                                 c.detail)
                  << std::flush;
    }
    std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed),
                             criteria.size());
    return failed == 0 ? 0 : 1;
}
