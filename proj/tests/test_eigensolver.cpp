#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "eigentrack/eigensolver.hpp"
#include "eigentrack/snapshot.hpp"
#include "test_support.hpp"

using namespace eigentrack;

namespace {

constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

EigenPairs laplacian(int mesh_n, Interval window)
{
    Mesh m = build_mesh(mesh_n);
    return solve_window(assemble_stiffness(m, Eigen::Matrix2d::Identity()), assemble_mass(m), window);
}

RunConfig identity_config(int mesh_n, Interval window)
{
    RunConfig cfg;
    cfg.box.axes = {{0.0, 1.0}};
    cfg.window = window;
    cfg.coefficient = CoeffSpec::identity();
    cfg.mesh_n = mesh_n;
    cfg.initial_level = {1};
    return cfg;
}

ParamPoint at(const RunConfig& cfg, double mu) { return snap_to_grid({mu}, cfg.box); }

double max_residual(const SparseMatrix& a, const SparseMatrix& b, const Snapshot& s)
{
    double worst = 0.0;
    for (int j = 0; j < s.size(); ++j) {
        Eigen::VectorXd u = s.vectors.col(j);
        Eigen::VectorXd au = a * u;
        worst = std::max(worst, (au - s.values[static_cast<std::size_t>(j)] * (b * u)).norm() / au.norm());
    }
    return worst;
}

void expect_normalized(const Snapshot& s, const SparseMatrix& mass)
{
    Eigen::MatrixXd gram = s.vectors.transpose() * (mass * s.vectors);
    for (int j = 0; j < s.size(); ++j) {
        EXPECT_LE(std::abs(gram(j, j) - 1.0), 1e-10);
        for (int l = 0; l < s.size(); ++l) {
            double lj = s.values[static_cast<std::size_t>(j)], ll = s.values[static_cast<std::size_t>(l)];
            if (l != j && std::abs(lj - ll) / lj > 1e-6) {
                EXPECT_LE(std::abs(gram(j, l)), 1e-8) << j << "," << l;
            }
        }
    }
}

} // namespace

TEST(Eigensolver, DirichletLaplacianSpectrum)
{
    EigenPairs e = laplacian(65, {0.0, 100.0});
    // (1,3) and (3,1) at 10 pi^2 ~ 98.7 also fall inside the window
    ASSERT_EQ(e.values.size(), 6u);
    const double exact[] = {2 * kPi2, 5 * kPi2, 5 * kPi2, 8 * kPi2};
    for (int k = 0; k < 4; ++k) {
        EXPECT_LE(std::abs(e.values[static_cast<std::size_t>(k)] - exact[k]) / exact[k], 0.01) << k;
    }
}

TEST(Eigensolver, SecondOrderMeshConvergence)
{
    double coarse = laplacian(33, {0.0, 30.0}).values.at(0) - 2 * kPi2;
    double fine = laplacian(65, {0.0, 30.0}).values.at(0) - 2 * kPi2;
    double ratio = coarse / fine;
    EXPECT_GE(ratio, 3.0);
    EXPECT_LE(ratio, 5.0);
}

TEST(Eigensolver, InertiaCount)
{
    Mesh m = build_mesh(33);
    SparseMatrix a = assemble_stiffness(m, Eigen::Matrix2d::Identity());
    SparseMatrix b = assemble_mass(m);
    EXPECT_EQ(count_below(a, b, 10.0), 0);
    EXPECT_EQ(count_below(a, b, 30.0), 1);
    EXPECT_EQ(count_below(a, b, 60.0), 3);
    EXPECT_EQ(count_below(a, b, 90.0), 4);
    EXPECT_EQ(count_below(a, b, 110.0), 6);
}

TEST(Eigensolver, PaperSnapshots)
{
    RunConfig cfg = fixtures::paper_1d("eigensolver");
    SnapshotStore store(cfg, cfg.cache_dir);
    SnapshotPtr s04 = store.get(at(cfg, 0.4));
    SnapshotPtr s07 = store.get(at(cfg, 0.7));
    const std::vector<double> p04{80.8, 137.9, 230.6, 265.9};
    const std::vector<double> p07{38.2, 81.1, 109.7, 129.4, 188.6, 189.9, 214.8, 260.9, 261.9};
    ASSERT_EQ(s04->size(), 4);
    ASSERT_EQ(s07->size(), 9);
    for (std::size_t k = 0; k < p04.size(); ++k) {
        EXPECT_LE(std::abs(s04->values[k] - p04[k]) / p04[k], 0.015) << k;
    }
    for (std::size_t k = 0; k < p07.size(); ++k) {
        EXPECT_LE(std::abs(s07->values[k] - p07[k]) / p07[k], 0.015) << k;
    }
}

TEST(Eigensolver, NormalizationOrthogonalityResidual)
{
    RunConfig cfg = fixtures::paper_1d("eigensolver");
    SnapshotStore store(cfg, cfg.cache_dir);
    for (double mu : {0.4, 0.55, 0.7, 0.85, 1.0}) {
        SnapshotPtr s = store.get(at(cfg, mu));
        double coord = mu;
        SparseMatrix a = assemble_stiffness(store.mesh(), eval_coefficient(cfg.coefficient, {&coord, 1}));
        expect_normalized(*s, store.mass());
        EXPECT_LE(max_residual(a, store.mass(), *s), 1e-8) << mu;
    }
}

TEST(Eigensolver, MultipleEigenvaluesAreOrthonormal)
{
    RunConfig cfg = identity_config(33, {0.0, 90.0});
    SnapshotStore store(cfg);
    SnapshotPtr s = store.get(at(cfg, 0.5));
    ASSERT_EQ(s->size(), 4);
    EXPECT_LE(std::abs(s->values[1] - s->values[2]) / s->values[1], 1e-2);
    Eigen::MatrixXd gram = s->vectors.transpose() * (store.mass() * s->vectors);
    EXPECT_LE((gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Eigensolver, MonotoneWindow)
{
    RunConfig narrow = fixtures::paper_1d("eigensolver");
    narrow.window = {50.0, 150.0};
    RunConfig wide = fixtures::paper_1d("eigensolver");
    SnapshotStore small(narrow), large(wide);
    for (double mu : {0.4, 0.7}) {
        SnapshotPtr a = small.get(at(narrow, mu));
        SnapshotPtr b = large.get(at(wide, mu));
        for (double v : a->values) {
            bool found = false;
            for (double w : b->values) {
                found = found || std::abs(v - w) <= 1e-8 * w;
            }
            EXPECT_TRUE(found) << v;
        }
        EXPECT_LE(a->size(), b->size());
    }
}

TEST(Eigensolver, WindowAboveSpectrum)
{
    RunConfig cfg = fixtures::paper_1d("eigensolver");
    cfg.window = {1e6, 2e6};
    cfg.mesh_n = 9;
    SnapshotStore store(cfg);
    SnapshotPtr s = store.get(at(cfg, 0.4));
    EXPECT_EQ(s->size(), 0);
    EXPECT_EQ(s->vectors.cols(), 0);
}

TEST(Eigensolver, CacheHitPerformsNoSolve)
{
    RunConfig cfg = fixtures::paper_1d("eigensolver");
    cfg.cache_dir = fixtures::scratch("eigensolver") / "fresh_cache";
    std::filesystem::remove_all(cfg.cache_dir);
    ParamPoint p = at(cfg, 0.7);
    SnapshotPtr first;
    {
        SnapshotStore store(cfg, cfg.cache_dir);
        first = store.get(p);
        EXPECT_EQ(store.solves(), 1);
        SnapshotPtr again = store.get(p);
        EXPECT_EQ(store.solves(), 1);
        EXPECT_EQ(first.get(), again.get());
    }
    EXPECT_TRUE(std::filesystem::exists(SnapshotStore(cfg, cfg.cache_dir).cache_path(p)));
    SnapshotStore reopened(cfg, cfg.cache_dir);
    SnapshotPtr loaded = reopened.get(p);
    EXPECT_EQ(reopened.solves(), 0);
    EXPECT_EQ(loaded->values, first->values);
    EXPECT_EQ(loaded->vectors, first->vectors);
    EXPECT_EQ(loaded->size(), 9);
}

TEST(Eigensolver, StaleCacheIsRecomputed)
{
    RunConfig cfg = fixtures::paper_1d("eigensolver");
    cfg.cache_dir = fixtures::scratch("eigensolver") / "stale_cache";
    std::filesystem::remove_all(cfg.cache_dir);
    ParamPoint p = at(cfg, 0.4);
    SnapshotStore(cfg, cfg.cache_dir).get(p);
    RunConfig other = cfg;
    other.window = {0.0, 200.0};
    SnapshotStore store(other, other.cache_dir);
    SnapshotPtr s = store.get(p);
    EXPECT_EQ(store.solves(), 1);
    EXPECT_EQ(s->size(), 2);
}
