#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "eigentrack/config.hpp"
#include "eigentrack/error.hpp"
#include "eigentrack/matching.hpp"
#include "eigentrack/snapshot.hpp"
#include "eigentrack/sparse_grid.hpp"
#include "eigentrack/verification.hpp"

namespace eigentrack {

/// One checked local subinterval. `p` is the point whose neighbours were
/// scanned (first snapshot), `q` the neighbour (second snapshot).
struct Subinterval {
    ParamPoint p, q;
    int level = 0;
    Assignment assignment;
    std::vector<std::pair<int, int>> pairs;      // (index at p, index at q)
    std::vector<int> p_order, q_order;           // matched position -> original index
    std::vector<double> p_values, q_values;      // original eigenvalues
    CertificationReport report;

    [[nodiscard]] bool certified() const { return report.certified; }
};

enum class Termination { running, converged, max_level };

const char* to_string(Termination t);

struct LevelSummary {
    int level = 0;
    int points_total = 0;
    int points_new = 0;
    int subintervals_checked = 0;
    int subintervals_uncertified = 0;
};

struct RunState {
    Box box;
    std::vector<LevelState> levels;
    std::vector<Subinterval> checked;  // in check order
    Termination termination = Termination::running;
    /// Points marked at the last checked level but not added (max_level reached).
    PointSet pending;

    [[nodiscard]] const LevelState& current() const { return levels.back(); }
    [[nodiscard]] bool was_checked(const ParamPoint& a, const ParamPoint& b) const;
    [[nodiscard]] std::vector<LevelSummary> summaries() const;

    std::map<std::pair<ParamPoint, ParamPoint>, std::size_t> index; // unordered pair -> checked[]
};

/// Error that aborted an adaptive run, tagged with the level being processed.
class RunAborted : public Error {
public:
    RunAborted(int level, const std::string& what)
        : Error("level " + std::to_string(level) + ": " + what), level_(level)
    {}
    [[nodiscard]] int level() const { return level_; }

private:
    int level_;
};

/// Local check of one subinterval: a priori matching, then a posteriori verification.
Subinterval check_subinterval(const Snapshot& at_p, const Snapshot& at_q, const SparseMatrix& mass,
                              const RunConfig& cfg, int level);

/// Initial state: P^(0) = P^(0)_delta = tensor lattice of the initial levels.
RunState initial_state(const RunConfig& cfg);

/// Checks every not-yet-checked (p, q) with p in the newest delta set and q a
/// neighbour of p; forward points of refined subintervals that are not yet in
/// the grid form the next delta set, appended as a new level when non-empty.
/// Returns the new delta set.
PointSet refine_level(RunState& state, SnapshotStore& store, int jobs = 1);

/// Runs refine_level until a level adds nothing (converged) or the level cap
/// is reached (max_level; the marked points are kept in `pending`).
RunState run_adaptive(SnapshotStore& store, int jobs = 1);

} // namespace eigentrack
