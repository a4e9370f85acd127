#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "eigentrack/config.hpp"
#include "eigentrack/eigensolver.hpp"
#include "eigentrack/fem.hpp"
#include "eigentrack/sparse_grid.hpp"

namespace eigentrack {

/// Windowed, b-normalized eigenpairs at one parameter point.
struct Snapshot {
    ParamPoint point;
    std::vector<double> values;   // ascending, inside the window
    Eigen::MatrixXd vectors;      // N x n
    std::string fingerprint;

    [[nodiscard]] int size() const { return static_cast<int>(values.size()); }
};

using SnapshotPtr = std::shared_ptr<const Snapshot>;

/// Identifier of (mesh, coefficient family, box, window); cached snapshots
/// with a different fingerprint are recomputed.
std::string problem_fingerprint(const RunConfig& cfg, const Mesh& mesh);

/// Assembles and solves at `point`, then b-normalizes every eigenvector.
Snapshot compute_snapshot(const RunConfig& cfg, const Mesh& mesh, const SparseMatrix& mass,
                          const ParamPoint& point);

/// Binary cache layout (native little-endian):
///   char[8]  magic "EGTSNAP1"
///   uint32   fingerprint length L, then L bytes
///   uint64   N (dofs), uint64 n (eigenpairs)
///   double[n]      eigenvalues
///   double[N * n]  eigenvectors, column-major
void write_snapshot_file(const Snapshot& snap, const std::filesystem::path& path);

/// Returns nullopt if the file is missing, truncated or has a different fingerprint.
std::optional<Snapshot> read_snapshot_file(const std::filesystem::path& path,
                                           const ParamPoint& point,
                                           const std::string& expected_fingerprint);

/// Snapshot provider: memory memo in front of an optional on-disk cache.
/// get() is safe to call concurrently; each key is written by one thread at a time.
class SnapshotStore {
public:
    explicit SnapshotStore(RunConfig cfg, std::optional<std::filesystem::path> cache_dir = {});

    SnapshotPtr get(const ParamPoint& point);

    /// Computes the missing snapshots of `points` with up to `jobs` threads.
    void prefetch(const std::vector<ParamPoint>& points, int jobs);

    [[nodiscard]] const RunConfig& config() const { return cfg_; }
    [[nodiscard]] const Mesh& mesh() const { return mesh_; }
    [[nodiscard]] const SparseMatrix& mass() const { return mass_; }
    [[nodiscard]] const std::string& fingerprint() const { return fingerprint_; }
    [[nodiscard]] std::filesystem::path cache_path(const ParamPoint& point) const;

    /// Loads or computes snapshots without keeping them in the memo (memoized
    /// entries are reused). Used for dense sweeps that do not fit in memory.
    std::vector<SnapshotPtr> load_transient(const std::vector<ParamPoint>& points, int jobs,
                                            bool write_cache);

    /// Number of eigensolves performed (cache misses) so far.
    [[nodiscard]] int solves() const { return solves_.load(); }

private:
    Snapshot produce(const ParamPoint& point, bool write_cache);

    RunConfig cfg_;
    Mesh mesh_;
    SparseMatrix mass_;
    std::string fingerprint_;
    std::optional<std::filesystem::path> cache_dir_;
    std::mutex mutex_;
    std::map<ParamPoint, SnapshotPtr> memo_;
    std::atomic<int> solves_{0};
};

/// Runs body(0..count-1) on up to `jobs` threads; rethrows the first error.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body);

} // namespace eigentrack
