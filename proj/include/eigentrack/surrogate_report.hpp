#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eigentrack/config.hpp"
#include "eigentrack/propagation.hpp"
#include "eigentrack/refinement.hpp"
#include "eigentrack/sparse_grid.hpp"

namespace eigentrack {

/// Delaunay triangulation of 2D dyadic points in reference coordinates.
/// Bowyer-Watson with exact integer predicates; points are inserted in
/// ascending order, so the result is deterministic even for cocircular sets.
/// Returns counter-clockwise vertex triples indexing `points`. Collinear or
/// fewer than three points give no triangles.
std::vector<std::array<int, 3>> delaunay(const std::vector<ParamPoint>& points);

/// Piecewise-linear parameter-to-eigenvalue surrogate.
///
/// d = 1: linear interpolation between consecutive sample points of the grid
/// where the surface is present at both ends. d = 2: a Delaunay triangulation
/// of the grid; a triangle carries the surface when all three vertices do.
/// Elsewhere a surface is undefined. For d >= 3 surfaces evaluate only at
/// their samples.
class Surrogate {
public:
    /// Samples: (surface id, point, lambda).
    struct Sample {
        int surface = 0;
        ParamPoint point;
        double lambda = 0.0;
    };

    Surrogate() = default;
    Surrogate(const Box& box, const std::vector<Sample>& samples);

    static Surrogate build(const SurfaceLabeling& labeling, const Box& box);

    /// Value of `surface` at physical point mu; nullopt where it is undefined.
    /// Throws InputError for an unknown surface and DomainError outside the box.
    [[nodiscard]] std::optional<double> eval(int surface, std::span<const double> mu) const;

    [[nodiscard]] std::vector<int> surface_ids() const;
    /// True when the surface has no interpolation cell (evaluable only at samples).
    [[nodiscard]] bool point_only(int surface) const;
    [[nodiscard]] const std::vector<ParamPoint>& grid() const { return grid_; }
    [[nodiscard]] const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
    [[nodiscard]] const std::vector<Sample>& samples() const { return samples_; }
    [[nodiscard]] const Box& box() const { return box_; }

private:
    Box box_;
    std::vector<Sample> samples_;
    std::vector<ParamPoint> grid_;                 // ascending
    std::vector<std::array<int, 3>> triangles_;    // d = 2
    std::map<int, std::map<int, double>> values_;  // surface -> grid index -> lambda
};

/// Writes the artifacts of a finished run into `out_dir`:
///   grid_level_<l>.csv         point grid of each level (new points flagged)
///   eigenvalues_level_<l>.csv  labeled eigenvalues of each level
///   projections.csv            per-subinterval verdicts and ambiguous pairs
///   surfaces.csv               final labeled samples (surrogate input)
///   levels.json                per-level counts
///   error_table.csv/.txt       when `errors` is given
///   metadata.json              configuration and run summary
/// Returns the written paths. Throws InputError if the directory is unwritable.
std::vector<std::filesystem::path> emit_reports(const RunConfig& cfg, const RunState& state,
                                                const SurfaceLabeling& labeling,
                                                const std::optional<std::vector<ErrorRow>>& errors,
                                                const std::filesystem::path& out_dir);

/// surfaces.csv writer and reader (header: surface,local_index,mu1..mud,lambda).
void write_surfaces_csv(const SurfaceLabeling& labeling, const std::filesystem::path& path);
std::vector<Surrogate::Sample> read_surfaces_csv(const std::filesystem::path& path, const Box& box);

/// Error table as CSV text and as an aligned text table.
std::string error_table_csv(const std::vector<ErrorRow>& rows);
std::string error_table_text(const std::vector<ErrorRow>& rows);

/// Decimal text with 17 significant digits.
std::string format_double(double v);

} // namespace eigentrack
