#include "eigentrack/refinement.hpp"

#include <set>

#include <spdlog/spdlog.h>

namespace eigentrack {

const char* to_string(Termination t)
{
    switch (t) {
    case Termination::running: return "running";
    case Termination::converged: return "converged";
    case Termination::max_level: return "max_level";
    }
    return "unknown";
}

namespace {

std::pair<ParamPoint, ParamPoint> unordered(const ParamPoint& a, const ParamPoint& b)
{
    return a < b ? std::pair{a, b} : std::pair{b, a};
}

} // namespace

bool RunState::was_checked(const ParamPoint& a, const ParamPoint& b) const
{
    return index.contains(unordered(a, b));
}

std::vector<LevelSummary> RunState::summaries() const
{
    std::vector<LevelSummary> out;
    for (const LevelState& lv : levels) {
        LevelSummary s;
        s.level = lv.level;
        s.points_total = static_cast<int>(lv.points.size());
        s.points_new = static_cast<int>(lv.added.size());
        out.push_back(s);
    }
    for (const Subinterval& sub : checked) {
        LevelSummary& s = out[static_cast<std::size_t>(sub.level)];
        ++s.subintervals_checked;
        if (!sub.certified()) {
            ++s.subintervals_uncertified;
        }
    }
    return out;
}

Subinterval check_subinterval(const Snapshot& at_p, const Snapshot& at_q, const SparseMatrix& mass,
                              const RunConfig& cfg, int level)
{
    MatchResult m = apriori_match(at_p, at_q, mass, cfg.w1, cfg.w2);
    Subinterval sub;
    sub.p = at_p.point;
    sub.q = at_q.point;
    sub.level = level;
    sub.p_values = at_p.values;
    sub.q_values = at_q.values;
    sub.report = verify(m.first, m.second, mass, cfg.t_pi, cfg.t_lambda);
    sub.assignment = std::move(m.assignment);
    sub.pairs = std::move(m.pairs);
    sub.p_order = std::move(m.first_order);
    sub.q_order = std::move(m.second_order);
    return sub;
}

RunState initial_state(const RunConfig& cfg)
{
    cfg.validate();
    RunState state;
    state.box = cfg.box;
    LevelState zero;
    zero.level = 0;
    zero.points = tensor_grid(cfg.initial_level, cfg.box);
    zero.added = zero.points;
    state.levels.push_back(std::move(zero));
    return state;
}

PointSet refine_level(RunState& state, SnapshotStore& store, int jobs)
{
    const RunConfig& cfg = store.config();
    const LevelState& cur = state.current();
    const int level = cur.level;
    PointSet next;
    try {
        std::vector<std::pair<ParamPoint, ParamPoint>> todo;
        std::set<std::pair<ParamPoint, ParamPoint>> queued;
        PointSet needed;
        for (const ParamPoint& p : cur.added) {
            for (const ParamPoint& q : neighbours(p, state.box)) {
                auto key = unordered(p, q);
                if (state.index.contains(key) || !queued.insert(key).second) {
                    continue;
                }
                todo.emplace_back(p, q);
                needed.insert(p);
                needed.insert(q);
            }
        }
        store.prefetch(std::vector<ParamPoint>(needed.begin(), needed.end()), jobs);

        for (const auto& [p, q] : todo) {
            SnapshotPtr sp = store.get(p);
            SnapshotPtr sq = store.get(q);
            Subinterval sub = check_subinterval(*sp, *sq, store.mass(), cfg, level);
            if (!sub.certified()) {
                ParamPoint f = midpoint_toward(p, q, state.box);
                if (!cur.points.contains(f)) {
                    next.insert(f);
                }
            }
            state.index.emplace(unordered(p, q), state.checked.size());
            state.checked.push_back(std::move(sub));
        }
    } catch (const RunAborted&) {
        throw;
    } catch (const std::exception& e) {
        throw RunAborted(level, e.what());
    }

    if (!next.empty()) {
        LevelState lv;
        lv.level = level + 1;
        lv.points = cur.points;
        lv.points.insert(next.begin(), next.end());
        lv.added = next;
        state.levels.push_back(std::move(lv));
    }
    return next;
}

RunState run_adaptive(SnapshotStore& store, int jobs)
{
    const RunConfig& cfg = store.config();
    RunState state = initial_state(cfg);
    while (true) {
        PointSet next = refine_level(state, store, jobs);
        if (next.empty()) {
            state.termination = Termination::converged;
            break;
        }
        if (state.current().level > cfg.max_level) {
            state.pending = std::move(state.levels.back().added);
            state.levels.pop_back();
            state.termination = Termination::max_level;
            spdlog::warn("refinement stopped at max_level {} with {} marked points not added",
                         cfg.max_level, state.pending.size());
            break;
        }
    }
    return state;
}

} // namespace eigentrack
