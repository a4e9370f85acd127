#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "eigentrack/refinement.hpp"
#include "eigentrack/snapshot.hpp"
#include "eigentrack/sparse_grid.hpp"

namespace eigentrack {

/// Edge between two grid points carrying the local matching, oriented a -> b.
struct MatchEdge {
    int a = 0;
    int b = 0;
    double weight = 0.0;  // Euclidean distance of the physical endpoints
    bool certified = true;
    std::vector<std::pair<int, int>> pairs;  // (local index at a, local index at b)
    /// Indistinguishable groups: (local indices at a, local indices at b).
    std::vector<std::pair<std::vector<int>, std::vector<int>>> clusters;
};

struct MatchGraph {
    std::vector<ParamPoint> nodes;             // ascending
    std::vector<std::vector<double>> values;   // eigenvalues per node, ascending
    std::vector<MatchEdge> edges;

    [[nodiscard]] int node_index(const ParamPoint& p) const; // -1 if absent
    /// Connected components as sorted node lists, ordered by smallest node.
    [[nodiscard]] std::vector<std::vector<int>> components() const;
};

/// Which checked subintervals become edges.
enum class EdgeFilter { certified, all };

/// Graph over the grid of `level` (default: final level) whose edges are the
/// checked subintervals up to that level with both endpoints on that grid.
/// With EdgeFilter::certified a disconnected result throws InputError.
MatchGraph build_match_graph(const RunState& state, EdgeFilter filter = EdgeFilter::certified,
                             std::optional<int> level = std::nullopt);

/// Kruskal minimum spanning forest; ties broken by lexicographic endpoint
/// order. Returns edge indices in the order they were accepted.
std::vector<int> minimum_spanning_tree(const MatchGraph& g);

/// Surface ids per (grid point, local eigenindex).
struct SurfaceLabeling {
    std::vector<ParamPoint> points;                  // ascending
    std::vector<std::vector<double>> values;         // per point, ascending
    std::vector<std::vector<int>> ids;               // ids[point][local index], 1-based
    /// Per point: local index groups that share a cluster.
    std::vector<std::vector<std::vector<int>>> clusters;
    /// Points in traversal order (root first, breadth-first over the tree).
    std::vector<int> order;
    /// Tree parent of each point (-1 for roots).
    std::vector<int> parent;
    int num_surfaces = 0;
    /// Lattice level m of a uniform reference (2^m + 1 points per axis), else -1.
    int lattice_level = -1;

    [[nodiscard]] int point_index(const ParamPoint& p) const; // -1 if absent
    /// Local index of `surface` at point `pi`, if present there.
    [[nodiscard]] std::optional<int> local_index(int pi, int surface) const;
};

/// Transports surface ids from `root` (default: smallest point of each
/// component) along the minimum spanning tree. A disconnected graph throws
/// InputError unless `allow_forest` is set, in which case every component
/// is labelled from its own smallest point.
SurfaceLabeling propagate_labels(const MatchGraph& g, std::optional<ParamPoint> root = std::nullopt,
                                 bool allow_forest = false);

/// Joins surface ids minted separately on different tree branches: every
/// non-tree edge pair (i, j) merges the ids at its ends when the two ids never
/// occur at the same point. Ids are then renumbered by smallest member.
void merge_entry_ids(SurfaceLabeling& labeling, const MatchGraph& g);

/// A priori matching and propagation on the uniform tensor lattice with
/// `points_per_axis` = 2^m + 1 points per axis (or 1). Snapshots are streamed
/// slab by slab along the first axis, so only two slabs are held at a time.
/// Ids of surfaces entering the window on several tree branches are joined
/// with merge_entry_ids.
SurfaceLabeling reference_solution(SnapshotStore& store, int points_per_axis, int jobs = 1,
                                   bool write_cache = false);

/// Labeling restricted to the grid of one level, all checked edges allowed.
SurfaceLabeling level_labeling(const RunState& state, int level);

/// Number of points whose induced pairing disagrees with `reference`.
/// The adaptive ids are aligned to the reference ids on first appearance
/// while walking the adaptive traversal order; a point is wrong when one of
/// its local indices contradicts that alignment or its eigenvalue count
/// differs from the reference point. Adaptive points absent from the
/// reference use the nearest reference point within half a lattice cell.
int wrongly_matched(const SurfaceLabeling& adaptive, const SurfaceLabeling& reference);

struct ErrorRow {
    int level = 0;
    int points_total = 0;
    int wrongly_matched = 0;
    int subintervals = 0;
    int uncertified = 0;
};

std::vector<ErrorRow> error_table(const RunState& state, const SurfaceLabeling& reference);

} // namespace eigentrack
