#include "eigentrack/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "eigentrack/error.hpp"
#include "eigentrack/matching.hpp"

namespace eigentrack {

namespace {

double distance(const ParamPoint& p, const ParamPoint& q)
{
    double sum = 0.0;
    for (int k = 0; k < p.dim(); ++k) {
        double d = p.phys()[static_cast<std::size_t>(k)] - q.phys()[static_cast<std::size_t>(k)];
        sum += d * d;
    }
    return std::sqrt(sum);
}

MatchEdge edge_from(const Subinterval& sub, int a, int b)
{
    MatchEdge e;
    e.a = a;
    e.b = b;
    e.weight = distance(sub.p, sub.q);
    e.certified = sub.certified();
    const int rows = static_cast<int>(sub.p_order.size());
    const int cols = static_cast<int>(sub.q_order.size());
    std::set<int> in_cluster;
    for (const auto& members : sub.report.clusters) {
        std::vector<int> near, far;
        for (int x : members) {
            if (x < rows) {
                near.push_back(sub.p_order[static_cast<std::size_t>(x)]);
            }
            if (x < cols) {
                far.push_back(sub.q_order[static_cast<std::size_t>(x)]);
            }
            in_cluster.insert(x);
        }
        std::sort(near.begin(), near.end());
        std::sort(far.begin(), far.end());
        e.clusters.emplace_back(std::move(near), std::move(far));
    }
    for (std::size_t j = 0; j < sub.pairs.size(); ++j) {
        if (!in_cluster.contains(static_cast<int>(j))) {
            e.pairs.push_back(sub.pairs[j]);
        }
    }
    return e;
}

struct DisjointSets {
    std::vector<int> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x)
    {
        while (parent[static_cast<std::size_t>(x)] != x) {
            x = parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        }
        return x;
    }
    bool unite(int x, int y)
    {
        x = find(x);
        y = find(y);
        if (x == y) {
            return false;
        }
        parent[static_cast<std::size_t>(std::max(x, y))] = std::min(x, y);
        return true;
    }
};

} // namespace

void merge_entry_ids(SurfaceLabeling& labeling, const MatchGraph& g)
{
    const int n = labeling.num_surfaces;
    const std::size_t np = labeling.points.size();
    DisjointSets sets(static_cast<std::size_t>(n) + 1);
    std::vector<std::vector<char>> support(static_cast<std::size_t>(n) + 1, std::vector<char>(np, 0));
    for (std::size_t p = 0; p < np; ++p) {
        for (int id : labeling.ids[p]) {
            support[static_cast<std::size_t>(id)][p] = 1;
        }
    }
    const std::vector<int> tree = minimum_spanning_tree(g);
    const std::set<int> in_tree(tree.begin(), tree.end());
    for (int ei = 0; ei < static_cast<int>(g.edges.size()); ++ei) {
        if (in_tree.contains(ei)) {
            continue;
        }
        const MatchEdge& e = g.edges[static_cast<std::size_t>(ei)];
        for (auto [ia, ib] : e.pairs) {
            int x = sets.find(labeling.ids[static_cast<std::size_t>(e.a)][static_cast<std::size_t>(ia)]);
            int y = sets.find(labeling.ids[static_cast<std::size_t>(e.b)][static_cast<std::size_t>(ib)]);
            if (x == y) {
                continue;
            }
            auto& sx = support[static_cast<std::size_t>(x)];
            auto& sy = support[static_cast<std::size_t>(y)];
            bool overlap = false;
            for (std::size_t p = 0; p < np && !overlap; ++p) {
                overlap = sx[p] && sy[p];
            }
            if (overlap) {
                continue;
            }
            sets.unite(x, y);
            auto& merged = support[static_cast<std::size_t>(std::min(x, y))];
            const auto& other = support[static_cast<std::size_t>(std::max(x, y))];
            for (std::size_t p = 0; p < np; ++p) {
                merged[p] = merged[p] || other[p];
            }
        }
    }
    // Renumber classes by their smallest member id.
    std::map<int, int> renumber;
    for (int id = 1; id <= n; ++id) {
        int r = sets.find(id);
        if (!renumber.contains(r)) {
            renumber.emplace(r, static_cast<int>(renumber.size()) + 1);
        }
    }
    for (auto& row : labeling.ids) {
        for (int& id : row) {
            id = renumber.at(sets.find(id));
        }
    }
    labeling.num_surfaces = static_cast<int>(renumber.size());
}

int MatchGraph::node_index(const ParamPoint& p) const
{
    auto it = std::lower_bound(nodes.begin(), nodes.end(), p);
    return (it != nodes.end() && *it == p) ? static_cast<int>(it - nodes.begin()) : -1;
}

std::vector<std::vector<int>> MatchGraph::components() const
{
    DisjointSets sets(nodes.size());
    for (const MatchEdge& e : edges) {
        sets.unite(e.a, e.b);
    }
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
        groups[sets.find(i)].push_back(i);
    }
    std::vector<std::vector<int>> out;
    for (auto& [root, members] : groups) {
        out.push_back(std::move(members));
    }
    return out;
}

MatchGraph build_match_graph(const RunState& state, EdgeFilter filter, std::optional<int> level)
{
    const int lv = level.value_or(state.current().level);
    if (lv < 0 || lv >= static_cast<int>(state.levels.size())) {
        throw InputError("build_match_graph: level " + std::to_string(lv) + " does not exist");
    }
    MatchGraph g;
    const PointSet& points = state.levels[static_cast<std::size_t>(lv)].points;
    g.nodes.assign(points.begin(), points.end());
    g.values.resize(g.nodes.size());
    for (const Subinterval& sub : state.checked) {
        if (sub.level > lv) {
            continue;
        }
        int a = g.node_index(sub.p);
        int b = g.node_index(sub.q);
        if (a < 0 || b < 0) {
            continue;
        }
        g.values[static_cast<std::size_t>(a)] = sub.p_values;
        g.values[static_cast<std::size_t>(b)] = sub.q_values;
        if (filter == EdgeFilter::certified && !sub.certified()) {
            continue;
        }
        g.edges.push_back(edge_from(sub, a, b));
    }
    if (filter == EdgeFilter::certified && g.components().size() > 1) {
        std::ostringstream os;
        os << "certified subintervals leave the grid disconnected (" << g.components().size()
           << " components)";
        throw InputError(os.str());
    }
    return g;
}

std::vector<int> minimum_spanning_tree(const MatchGraph& g)
{
    std::vector<int> idx(g.edges.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto key = [&](int i) {
        const MatchEdge& e = g.edges[static_cast<std::size_t>(i)];
        return std::pair{std::min(e.a, e.b), std::max(e.a, e.b)};
    };
    std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) {
        const double wx = g.edges[static_cast<std::size_t>(x)].weight;
        const double wy = g.edges[static_cast<std::size_t>(y)].weight;
        if (wx != wy) {
            return wx < wy;
        }
        return key(x) < key(y);
    });
    DisjointSets sets(g.nodes.size());
    std::vector<int> tree;
    for (int i : idx) {
        const MatchEdge& e = g.edges[static_cast<std::size_t>(i)];
        if (sets.unite(e.a, e.b)) {
            tree.push_back(i);
        }
    }
    return tree;
}

int SurfaceLabeling::point_index(const ParamPoint& p) const
{
    auto it = std::lower_bound(points.begin(), points.end(), p);
    return (it != points.end() && *it == p) ? static_cast<int>(it - points.begin()) : -1;
}

std::optional<int> SurfaceLabeling::local_index(int pi, int surface) const
{
    const auto& row = ids[static_cast<std::size_t>(pi)];
    auto it = std::find(row.begin(), row.end(), surface);
    if (it == row.end()) {
        return std::nullopt;
    }
    return static_cast<int>(it - row.begin());
}

SurfaceLabeling propagate_labels(const MatchGraph& g, std::optional<ParamPoint> root,
                                 bool allow_forest)
{
    SurfaceLabeling out;
    out.points = g.nodes;
    out.values = g.values;
    out.ids.resize(g.nodes.size());
    out.clusters.resize(g.nodes.size());
    out.parent.assign(g.nodes.size(), -1);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        out.ids[i].assign(g.values[i].size(), 0);
    }
    if (g.nodes.empty()) {
        return out;
    }

    auto comps = g.components();
    if (comps.size() > 1 && !allow_forest) {
        throw InputError("propagate_labels: graph has " + std::to_string(comps.size()) +
                         " components");
    }
    std::vector<int> roots;
    for (const auto& c : comps) {
        roots.push_back(c.front());
    }
    if (root) {
        int r = g.node_index(*root);
        if (r < 0) {
            throw InputError("propagate_labels: root " + root->label() + " is not a grid point");
        }
        for (std::size_t c = 0; c < comps.size(); ++c) {
            if (std::binary_search(comps[c].begin(), comps[c].end(), r)) {
                roots[c] = r;
            }
        }
    }

    // Tree adjacency: node -> (edge index, neighbour).
    std::vector<std::vector<std::pair<int, int>>> adj(g.nodes.size());
    for (int i : minimum_spanning_tree(g)) {
        const MatchEdge& e = g.edges[static_cast<std::size_t>(i)];
        adj[static_cast<std::size_t>(e.a)].emplace_back(i, e.b);
        adj[static_cast<std::size_t>(e.b)].emplace_back(i, e.a);
    }
    for (auto& list : adj) {
        std::sort(list.begin(), list.end(), [](auto x, auto y) { return x.second < y.second; });
    }

    int next_id = 1;
    std::vector<char> seen(g.nodes.size(), 0);
    for (int r : roots) {
        auto& root_ids = out.ids[static_cast<std::size_t>(r)];
        for (int& id : root_ids) {
            id = next_id++;
        }
        std::queue<int> queue;
        queue.push(r);
        seen[static_cast<std::size_t>(r)] = 1;
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop();
            out.order.push_back(u);
            for (auto [ei, v] : adj[static_cast<std::size_t>(u)]) {
                if (seen[static_cast<std::size_t>(v)]) {
                    continue;
                }
                seen[static_cast<std::size_t>(v)] = 1;
                out.parent[static_cast<std::size_t>(v)] = u;
                const MatchEdge& e = g.edges[static_cast<std::size_t>(ei)];
                const bool forward = e.a == u;
                const auto& from = out.ids[static_cast<std::size_t>(u)];
                auto& to = out.ids[static_cast<std::size_t>(v)];
                for (auto [ia, ib] : e.pairs) {
                    int iu = forward ? ia : ib;
                    int iv = forward ? ib : ia;
                    to[static_cast<std::size_t>(iv)] = from[static_cast<std::size_t>(iu)];
                }
                const auto& vals_u = g.values[static_cast<std::size_t>(u)];
                const auto& vals_v = g.values[static_cast<std::size_t>(v)];
                for (const auto& [near_a, far_b] : e.clusters) {
                    std::vector<int> near = forward ? near_a : far_b;
                    std::vector<int> far = forward ? far_b : near_a;
                    auto by_value = [](const std::vector<double>& vals) {
                        return [&vals](int x, int y) {
                            return vals[static_cast<std::size_t>(x)] < vals[static_cast<std::size_t>(y)];
                        };
                    };
                    std::stable_sort(near.begin(), near.end(), by_value(vals_u));
                    std::stable_sort(far.begin(), far.end(), by_value(vals_v));
                    for (std::size_t k = 0; k < far.size() && k < near.size(); ++k) {
                        to[static_cast<std::size_t>(far[k])] = from[static_cast<std::size_t>(near[k])];
                    }
                    std::vector<int> group = far;
                    std::sort(group.begin(), group.end());
                    out.clusters[static_cast<std::size_t>(v)].push_back(group);
                    std::sort(near.begin(), near.end());
                    auto& near_groups = out.clusters[static_cast<std::size_t>(u)];
                    if (std::find(near_groups.begin(), near_groups.end(), near) == near_groups.end()) {
                        near_groups.push_back(near);
                    }
                }
                for (int& id : to) {
                    if (id == 0) {
                        id = next_id++; // entered the window across this edge
                    }
                }
                queue.push(v);
            }
        }
    }
    out.num_surfaces = next_id - 1;
    return out;
}

SurfaceLabeling reference_solution(SnapshotStore& store, int points_per_axis, int jobs,
                                   bool write_cache)
{
    // cells = 2^c intervals per axis; points_per_axis == 1 is the box centre.
    int c = 0;
    if (points_per_axis < 1) {
        throw ValidationError("reference points per axis must be positive");
    }
    const int cells = points_per_axis - 1;
    if (cells > 0) {
        if ((cells & (cells - 1)) != 0 || cells > (1 << 20)) {
            throw ValidationError("reference points per axis must be 2^c + 1, got " +
                                  std::to_string(points_per_axis));
        }
        while ((1 << c) < cells) {
            ++c;
        }
    }
    const RunConfig& cfg = store.config();
    const int d = cfg.dim();
    const Box& box = cfg.box;
    std::vector<DyadicCoord> axis;
    if (cells == 0) {
        axis.emplace_back(0, 0);
    }
    for (int j = 0; j <= cells && cells > 0; ++j) {
        axis.emplace_back(static_cast<std::int64_t>(2 * j - cells), c);
    }
    PointSet lattice;
    std::vector<std::size_t> digit(static_cast<std::size_t>(d), 0);
    while (true) {
        std::vector<DyadicCoord> ref;
        for (std::size_t k = 0; k < digit.size(); ++k) {
            ref.push_back(axis[digit[k]]);
        }
        lattice.emplace(ref, box);
        std::size_t k = digit.size();
        while (k > 0 && ++digit[k - 1] == axis.size()) {
            digit[--k] = 0;
        }
        if (k == 0) {
            break;
        }
    }

    MatchGraph g;
    g.nodes.assign(lattice.begin(), lattice.end());
    g.values.resize(g.nodes.size());

    // Slab s: lattice points whose first coordinate is axis[s]; contiguous in
    // the sorted node list because ParamPoint orders by the first coordinate first.
    const std::size_t per_slab = g.nodes.size() / axis.size();
    auto slab_points = [&](std::size_t s) {
        return std::vector<ParamPoint>(g.nodes.begin() + static_cast<std::ptrdiff_t>(s * per_slab),
                                       g.nodes.begin() + static_cast<std::ptrdiff_t>((s + 1) * per_slab));
    };
    const int exponent = c - 1; // lattice spacing 2 / cells = 2^-(c-1)

    auto add_edges = [&](const std::vector<ParamPoint>& pts, const std::vector<SnapshotPtr>& snaps,
                         std::size_t offset, const std::map<ParamPoint, std::size_t>& lookup,
                         const std::vector<SnapshotPtr>& other, int axis_k) {
        // Edges from each point to its lattice successor along axis_k; for
        // axis 0 the successor lives in `other`.
        std::vector<MatchEdge> found(pts.size());
        std::vector<char> has(pts.size(), 0);
        parallel_for(pts.size(), jobs, [&](std::size_t i) {
            std::vector<DyadicCoord> ref = pts[i].ref();
            if (cells == 0 || ref[static_cast<std::size_t>(axis_k)] == DyadicCoord(1, 0)) {
                return;
            }
            ref[static_cast<std::size_t>(axis_k)] = ref[static_cast<std::size_t>(axis_k)].shifted(1, exponent);
            ParamPoint q(ref, box);
            auto it = lookup.find(q);
            if (it == lookup.end()) {
                return;
            }
            const Snapshot& sp = *snaps[i];
            const Snapshot& sq = axis_k == 0 ? *other[it->second] : *snaps[it->second];
            MatchResult r = apriori_match(sp, sq, store.mass(), cfg.w1, cfg.w2);
            MatchEdge e;
            e.a = static_cast<int>(offset + i);
            e.b = g.node_index(q);
            e.weight = distance(pts[i], q);
            e.pairs = std::move(r.pairs);
            found[i] = std::move(e);
            has[i] = 1;
        });
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (has[i]) {
                g.edges.push_back(std::move(found[i]));
            }
        }
    };

    std::vector<ParamPoint> cur_pts = slab_points(0);
    std::vector<SnapshotPtr> cur = store.load_transient(cur_pts, jobs, write_cache);
    for (std::size_t s = 0; s < axis.size(); ++s) {
        std::map<ParamPoint, std::size_t> cur_lookup;
        for (std::size_t i = 0; i < cur_pts.size(); ++i) {
            cur_lookup.emplace(cur_pts[i], i);
            g.values[s * per_slab + i] = cur[i]->values;
        }
        for (int k = 1; k < d; ++k) {
            add_edges(cur_pts, cur, s * per_slab, cur_lookup, cur, k);
        }
        if (s + 1 == axis.size()) {
            break;
        }
        std::vector<ParamPoint> next_pts = slab_points(s + 1);
        std::vector<SnapshotPtr> next = store.load_transient(next_pts, jobs, write_cache);
        std::map<ParamPoint, std::size_t> next_lookup;
        for (std::size_t i = 0; i < next_pts.size(); ++i) {
            next_lookup.emplace(next_pts[i], i);
        }
        add_edges(cur_pts, cur, s * per_slab, next_lookup, next, 0);
        cur_pts = std::move(next_pts);
        cur = std::move(next);
    }

    SurfaceLabeling out = propagate_labels(g);
    merge_entry_ids(out, g);
    out.lattice_level = cells == 0 ? -1 : c;
    return out;
}

SurfaceLabeling level_labeling(const RunState& state, int level)
{
    return propagate_labels(build_match_graph(state, EdgeFilter::all, level), std::nullopt, true);
}

int wrongly_matched(const SurfaceLabeling& adaptive, const SurfaceLabeling& reference)
{
    auto reference_point = [&](const ParamPoint& p) {
        int ri = reference.point_index(p);
        if (ri >= 0 || reference.lattice_level < 0) {
            return ri;
        }
        // Nearest lattice point: -1 + 2 j / cells with j rounded.
        const std::int64_t cells = std::int64_t{1} << reference.lattice_level;
        std::vector<DyadicCoord> ref;
        for (const DyadicCoord& x : p.ref()) {
            std::int64_t j = std::llround((x.value() + 1.0) * 0.5 * static_cast<double>(cells));
            ref.emplace_back(2 * j - cells, reference.lattice_level);
        }
        auto it = std::lower_bound(reference.points.begin(), reference.points.end(), ref,
                                   [](const ParamPoint& x, const std::vector<DyadicCoord>& r) {
                                       return x.ref() < r;
                                   });
        if (it == reference.points.end() || it->ref() != ref) {
            return -1;
        }
        return static_cast<int>(it - reference.points.begin());
    };

    std::map<int, int> phi; // adaptive id -> reference id
    int wrong = 0;
    for (int pi : adaptive.order) {
        const ParamPoint& p = adaptive.points[static_cast<std::size_t>(pi)];
        const int ri = reference_point(p);
        if (ri < 0) {
            throw InputError("compare: point " + p.label() + " has no reference counterpart");
        }
        const auto& a_ids = adaptive.ids[static_cast<std::size_t>(pi)];
        const auto& r_ids = reference.ids[static_cast<std::size_t>(ri)];
        bool bad = a_ids.size() != r_ids.size();
        for (std::size_t i = 0; i < a_ids.size() && i < r_ids.size(); ++i) {
            auto [it, inserted] = phi.emplace(a_ids[i], r_ids[i]);
            if (!inserted && it->second != r_ids[i]) {
                bad = true;
            }
        }
        wrong += bad ? 1 : 0;
    }
    return wrong;
}

std::vector<ErrorRow> error_table(const RunState& state, const SurfaceLabeling& reference)
{
    std::vector<ErrorRow> rows;
    for (const LevelSummary& s : state.summaries()) {
        ErrorRow row;
        row.level = s.level;
        row.points_total = s.points_total;
        row.subintervals = s.subintervals_checked;
        row.uncertified = s.subintervals_uncertified;
        row.wrongly_matched = wrongly_matched(level_labeling(state, s.level), reference);
        rows.push_back(row);
    }
    return rows;
}

} // namespace eigentrack
