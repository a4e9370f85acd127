#include "eigentrack/snapshot.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "eigentrack/error.hpp"

namespace eigentrack {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'E', 'G', 'T', 'S', 'N', 'A', 'P', '1'};

template <typename T>
void put(std::ostream& os, const T& value)
{
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool get(std::istream& is, T& value)
{
    return static_cast<bool>(is.read(reinterpret_cast<char*>(&value), sizeof(T)));
}

} // namespace

std::string problem_fingerprint(const RunConfig& cfg, const Mesh& mesh)
{
    std::ostringstream os;
    os << std::hexfloat;
    os << mesh.fingerprint() << "|c=" << cfg.coefficient.c11.canonical() << ','
       << cfg.coefficient.c12.canonical() << ',' << cfg.coefficient.c22.canonical() << "|box=";
    for (const auto& axis : cfg.box.axes) {
        os << '[' << axis.lo << ',' << axis.hi << ']';
    }
    os << "|window=[" << cfg.window.lo << ',' << cfg.window.hi << ']';
    return os.str();
}

Snapshot compute_snapshot(const RunConfig& cfg, const Mesh& mesh, const SparseMatrix& mass,
                          const ParamPoint& point)
{
    if (!cfg.box.contains(point.phys())) {
        throw DomainError("snapshot point " + point.label() + " outside the parameter box");
    }
    Eigen::Matrix2d c = eval_coefficient(cfg.coefficient, point.phys());
    SparseMatrix stiffness = assemble_stiffness(mesh, c);
    EigenPairs pairs = solve_window(stiffness, mass, cfg.window);

    Snapshot snap;
    snap.point = point;
    snap.values = std::move(pairs.values);
    snap.vectors = std::move(pairs.vectors);
    for (Eigen::Index j = 0; j < snap.vectors.cols(); ++j) {
        double norm = std::sqrt(snap.vectors.col(j).dot(mass * snap.vectors.col(j)));
        snap.vectors.col(j) /= norm;
    }
    snap.fingerprint = problem_fingerprint(cfg, mesh);
    return snap;
}

void write_snapshot_file(const Snapshot& snap, const fs::path& path)
{
    fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw InputError("cannot write snapshot cache file " + tmp.string());
        }
        os.write(kMagic, sizeof kMagic);
        put(os, static_cast<std::uint32_t>(snap.fingerprint.size()));
        os.write(snap.fingerprint.data(), static_cast<std::streamsize>(snap.fingerprint.size()));
        put(os, static_cast<std::uint64_t>(snap.vectors.rows()));
        put(os, static_cast<std::uint64_t>(snap.values.size()));
        os.write(reinterpret_cast<const char*>(snap.values.data()),
                 static_cast<std::streamsize>(snap.values.size() * sizeof(double)));
        os.write(reinterpret_cast<const char*>(snap.vectors.data()),
                 static_cast<std::streamsize>(snap.vectors.size() * sizeof(double)));
        if (!os) {
            throw InputError("failed writing snapshot cache file " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

std::optional<Snapshot> read_snapshot_file(const fs::path& path, const ParamPoint& point,
                                           const std::string& expected_fingerprint)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        return std::nullopt;
    }
    char magic[8];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        spdlog::warn("snapshot cache {}: bad header, recomputing", path.string());
        return std::nullopt;
    }
    std::uint32_t length = 0;
    if (!get(is, length) || length > (1u << 20)) {
        return std::nullopt;
    }
    Snapshot snap;
    snap.point = point;
    snap.fingerprint.resize(length);
    if (!is.read(snap.fingerprint.data(), length)) {
        return std::nullopt;
    }
    if (snap.fingerprint != expected_fingerprint) {
        spdlog::warn("snapshot cache {}: fingerprint mismatch, recomputing", path.string());
        return std::nullopt;
    }
    std::uint64_t rows = 0, count = 0;
    if (!get(is, rows) || !get(is, count) || count > rows) {
        return std::nullopt;
    }
    snap.values.resize(count);
    snap.vectors.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(count));
    if (!is.read(reinterpret_cast<char*>(snap.values.data()),
                 static_cast<std::streamsize>(count * sizeof(double))) ||
        !is.read(reinterpret_cast<char*>(snap.vectors.data()),
                 static_cast<std::streamsize>(rows * count * sizeof(double)))) {
        spdlog::warn("snapshot cache {}: truncated, recomputing", path.string());
        return std::nullopt;
    }
    return snap;
}

SnapshotStore::SnapshotStore(RunConfig cfg, std::optional<fs::path> cache_dir)
    : cfg_(std::move(cfg)), mesh_(cfg_.mesh_n), mass_(assemble_mass(mesh_)),
      fingerprint_(problem_fingerprint(cfg_, mesh_)), cache_dir_(std::move(cache_dir))
{}

fs::path SnapshotStore::cache_path(const ParamPoint& point) const
{
    return cache_dir_.value_or(fs::path{}) / ("snap_" + point.key() + ".bin");
}

Snapshot SnapshotStore::produce(const ParamPoint& point, bool write_cache)
{
    std::optional<Snapshot> snap;
    if (cache_dir_) {
        snap = read_snapshot_file(cache_path(point), point, fingerprint_);
    }
    if (!snap) {
        snap = compute_snapshot(cfg_, mesh_, mass_, point);
        ++solves_;
        if (cache_dir_ && write_cache) {
            write_snapshot_file(*snap, cache_path(point));
        }
    }
    return std::move(*snap);
}

SnapshotPtr SnapshotStore::get(const ParamPoint& point)
{
    {
        std::lock_guard lock(mutex_);
        if (auto it = memo_.find(point); it != memo_.end()) {
            return it->second;
        }
    }
    auto ptr = std::make_shared<const Snapshot>(produce(point, true));
    std::lock_guard lock(mutex_);
    return memo_.emplace(point, std::move(ptr)).first->second;
}

std::vector<SnapshotPtr> SnapshotStore::load_transient(const std::vector<ParamPoint>& points,
                                                       int jobs, bool write_cache)
{
    std::vector<SnapshotPtr> out(points.size());
    parallel_for(points.size(), jobs, [&](std::size_t i) {
        {
            std::lock_guard lock(mutex_);
            if (auto it = memo_.find(points[i]); it != memo_.end()) {
                out[i] = it->second;
                return;
            }
        }
        out[i] = std::make_shared<const Snapshot>(produce(points[i], write_cache));
    });
    return out;
}

void SnapshotStore::prefetch(const std::vector<ParamPoint>& points, int jobs)
{
    std::vector<ParamPoint> missing;
    {
        std::lock_guard lock(mutex_);
        for (const auto& p : points) {
            if (!memo_.count(p)) {
                missing.push_back(p);
            }
        }
    }
    parallel_for(missing.size(), jobs, [&](std::size_t i) { get(missing[i]); });
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body)
{
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    {
        std::vector<std::jthread> workers;
        for (int t = 0; t < jobs; ++t) {
            workers.emplace_back([&, t] {
                try {
                    for (std::size_t i = next++; i < count; i = next++) {
                        body(i);
                    }
                } catch (...) {
                    errors[static_cast<std::size_t>(t)] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace eigentrack
