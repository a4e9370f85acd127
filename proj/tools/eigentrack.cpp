// eigentrack command-line interface.
//
// Exit codes: 0 success, 1 error, 2 usage error, 3 refinement stopped at max_level.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "eigentrack/config.hpp"
#include "eigentrack/error.hpp"
#include "eigentrack/matching.hpp"
#include "eigentrack/propagation.hpp"
#include "eigentrack/refinement.hpp"
#include "eigentrack/snapshot.hpp"
#include "eigentrack/surrogate_report.hpp"
#include "eigentrack/verification.hpp"

namespace fs = std::filesystem;
using namespace eigentrack;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitMaxLevel = 3;

struct Common {
    std::string config;
    int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::string out;
};

RunConfig load(const Common& c)
{
    RunConfig cfg = load_config(c.config);
    if (const char* cache = std::getenv("EIGENTRACK_CACHE"); cache && *cache) {
        cfg.cache_dir = cache;
    }
    if (!c.out.empty()) {
        cfg.output_dir = c.out;
    }
    return cfg;
}

std::string fmt_values(const std::vector<double>& v)
{
    std::string s;
    for (double x : v) {
        s += (s.empty() ? "" : " ") + format_double(x);
    }
    return s;
}

ParamPoint point_at(const RunConfig& cfg, const std::vector<double>& mu)
{
    if (static_cast<int>(mu.size()) != cfg.dim()) {
        throw InputError(fmt::format("expected {} coordinates, got {}", cfg.dim(), mu.size()));
    }
    return snap_to_grid(mu, cfg.box);
}

void print_summaries(const RunState& state)
{
    std::cout << fmt::format("{:>5}  {:>6}  {:>4}  {:>8}  {:>11}\n", "level", "points", "new",
                             "checked", "uncertified");
    for (const LevelSummary& s : state.summaries()) {
        std::cout << fmt::format("{:>5}  {:>6}  {:>4}  {:>8}  {:>11}\n", s.level, s.points_total,
                                 s.points_new, s.subintervals_checked, s.subintervals_uncertified);
    }
    std::cout << "termination: " << to_string(state.termination) << "\n";
}

/// Final labeling; a run stopped at max_level may leave the certified graph
/// disconnected, in which case every checked edge is used per component.
SurfaceLabeling final_labeling(const RunState& state)
{
    if (state.termination == Termination::converged) {
        return propagate_labels(build_match_graph(state));
    }
    return level_labeling(state, state.current().level);
}

int exit_for(const RunState& state)
{
    return state.termination == Termination::converged ? 0 : kExitMaxLevel;
}

} // namespace

int main(int argc, char** argv)
{
    spdlog::set_default_logger(spdlog::stderr_color_mt("eigentrack"));

    CLI::App app{"Track eigenvalue hypersurfaces of parametric elliptic eigenproblems"};
    app.require_subcommand(1);

    auto add_common = [](CLI::App* sub, Common& c, bool with_out) {
        sub->add_option("--config", c.config, "run configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--jobs", c.jobs, "concurrent snapshot solves")->check(CLI::PositiveNumber);
        if (with_out) {
            sub->add_option("--out", c.out, "output directory (overrides the config)");
        }
    };

    Common common;
    std::vector<double> at, first, second;
    int points = 129;
    int surface = 0;

    auto* snapshot = app.add_subcommand("snapshot", "solve the windowed eigenproblem at one point");
    add_common(snapshot, common, false);
    snapshot->add_option("--at", at, "physical parameter coordinates")->required();

    auto* match = app.add_subcommand("match", "a priori matching of two snapshots");
    auto* verify_cmd = app.add_subcommand("verify", "a priori matching then a posteriori verification");
    for (auto* sub : {match, verify_cmd}) {
        add_common(sub, common, false);
        sub->add_option("--first", first, "first parameter point")->required();
        sub->add_option("--second", second, "second parameter point")->required();
    }

    auto* refine = app.add_subcommand("refine", "adaptive sparse-grid refinement");
    add_common(refine, common, true);

    auto* reference = app.add_subcommand("reference", "dense uniform reference labeling");
    add_common(reference, common, true);
    reference->add_option("--points", points, "points per axis (2^m + 1)");

    auto* compare = app.add_subcommand("compare", "error table of the adaptive run against the reference");
    add_common(compare, common, true);
    compare->add_option("--points", points, "reference points per axis (2^m + 1)");

    auto* surrogate = app.add_subcommand("surrogate", "piecewise-linear surrogate");
    surrogate->require_subcommand(1);
    auto* sur_build = surrogate->add_subcommand("build", "refine and write surfaces.csv");
    add_common(sur_build, common, true);
    auto* sur_eval = surrogate->add_subcommand("eval", "evaluate a surface from surfaces.csv");
    add_common(sur_eval, common, true);
    sur_eval->add_option("--surface", surface, "surface id")->required();
    sur_eval->add_option("--at", at, "physical parameter coordinates")->required();

    auto* report = app.add_subcommand("report", "refine, reference, compare and write all reports");
    add_common(report, common, true);
    report->add_option("--points", points, "reference points per axis (2^m + 1)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        RunConfig cfg = load(common);
        SnapshotStore store(cfg, cfg.cache_dir);

        if (snapshot->parsed()) {
            SnapshotPtr s = store.get(point_at(cfg, at));
            std::cout << "point: " << s->point.label() << "\n"
                      << "eigenvalues (" << s->size() << "): " << fmt_values(s->values) << "\n";
            return 0;
        }
        if (match->parsed() || verify_cmd->parsed()) {
            SnapshotPtr a = store.get(point_at(cfg, first));
            SnapshotPtr b = store.get(point_at(cfg, second));
            MatchResult m = apriori_match(*a, *b, store.mass(), cfg.w1, cfg.w2);
            std::string sigma;
            for (int c : m.assignment.sigma) {
                sigma += (sigma.empty() ? "" : " ") + std::to_string(c + 1);
            }
            std::cout << "first " << a->point.label() << ": " << fmt_values(m.first.values) << "\n"
                      << "second " << b->point.label() << ": " << fmt_values(m.second.values) << "\n"
                      << "sigma (" << (m.assignment.rows_shorter ? "first->second" : "second->first")
                      << "): " << sigma << "\n"
                      << "cost: " << format_double(m.assignment.cost) << "\n";
            if (verify_cmd->parsed()) {
                CertificationReport r = verify(m.first, m.second, store.mass(), cfg.t_pi, cfg.t_lambda);
                std::cout << "projection:\n"
                          << r.projection.format(Eigen::IOFormat(4, 0, " ", "\n", "  ")) << "\n";
                for (const PatternDiagnostic& d : r.diagnostics) {
                    std::string r1, r2;
                    for (int x : d.r1) {
                        r1 += " " + std::to_string(x + 1);
                    }
                    for (int x : d.r2) {
                        r2 += " " + std::to_string(x + 1);
                    }
                    std::cout << "j=" << d.j + 1 << " r1={" << r1 << " } r2={" << r2 << " }\n";
                }
                std::cout << "verdict: " << (r.certified ? "certified" : "refine") << "\n";
            }
            return 0;
        }
        if (refine->parsed() || sur_build->parsed()) {
            RunState state = run_adaptive(store, common.jobs);
            print_summaries(state);
            SurfaceLabeling labeling = final_labeling(state);
            auto files = emit_reports(cfg, state, labeling, std::nullopt, cfg.output_dir);
            std::cout << "surfaces: " << labeling.num_surfaces << "\n"
                      << "wrote " << files.size() << " files to " << cfg.output_dir.string() << "\n";
            return exit_for(state);
        }
        if (reference->parsed()) {
            SurfaceLabeling ref = reference_solution(store, points, common.jobs);
            fs::create_directories(cfg.output_dir);
            fs::path path = cfg.output_dir / "reference_surfaces.csv";
            write_surfaces_csv(ref, path);
            std::cout << "reference: " << ref.points.size() << " points, " << ref.num_surfaces
                      << " surfaces\nwrote " << path.string() << "\n";
            return 0;
        }
        if (compare->parsed() || report->parsed()) {
            RunState state = run_adaptive(store, common.jobs);
            SurfaceLabeling ref = reference_solution(store, points, common.jobs);
            std::vector<ErrorRow> rows = error_table(state, ref);
            std::cout << error_table_text(rows);
            fs::create_directories(cfg.output_dir);
            if (report->parsed()) {
                auto files = emit_reports(cfg, state, final_labeling(state), rows, cfg.output_dir);
                write_surfaces_csv(ref, cfg.output_dir / "reference_surfaces.csv");
                std::cout << "wrote " << files.size() + 1 << " files to " << cfg.output_dir.string() << "\n";
            } else {
                std::ofstream(cfg.output_dir / "error_table.csv") << error_table_csv(rows);
                std::ofstream(cfg.output_dir / "error_table.txt") << error_table_text(rows);
            }
            return exit_for(state);
        }
        if (sur_eval->parsed()) {
            fs::path path = cfg.output_dir / "surfaces.csv";
            if (!fs::exists(path)) {
                throw InputError(path.string() + " not found; run 'surrogate build' first");
            }
            Surrogate s(cfg.box, read_surfaces_csv(path, cfg.box));
            if (static_cast<int>(at.size()) != cfg.dim()) {
                throw InputError(fmt::format("expected {} coordinates, got {}", cfg.dim(), at.size()));
            }
            std::optional<double> v = s.eval(surface, at);
            std::cout << (v ? format_double(*v) : std::string{"undefined"}) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitUsage;
}
