#include "eigentrack/surrogate_report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "eigentrack/error.hpp"

namespace eigentrack {

namespace fs = std::filesystem;

std::string format_double(double v)
{
    return fmt::format("{:.17g}", v);
}

// ---------------------------------------------------------------------------
// Delaunay

namespace {

using i128 = __int128;

struct IPoint {
    std::int64_t x, y;
};

constexpr int kInfinite = -1;

i128 orient(const IPoint& a, const IPoint& b, const IPoint& c)
{
    return static_cast<i128>(b.x - a.x) * (c.y - a.y) - static_cast<i128>(b.y - a.y) * (c.x - a.x);
}

/// > 0 when d lies strictly inside the circumcircle of the CCW triangle abc.
i128 incircle(const IPoint& a, const IPoint& b, const IPoint& c, const IPoint& d)
{
    const i128 adx = a.x - d.x, ady = a.y - d.y;
    const i128 bdx = b.x - d.x, bdy = b.y - d.y;
    const i128 cdx = c.x - d.x, cdy = c.y - d.y;
    const i128 alift = adx * adx + ady * ady;
    const i128 blift = bdx * bdx + bdy * bdy;
    const i128 clift = cdx * cdx + cdy * cdy;
    return adx * (bdy * clift - blift * cdy) - ady * (bdx * clift - blift * cdx) +
           alift * (bdx * cdy - bdy * cdx);
}

bool strictly_between(const IPoint& u, const IPoint& v, const IPoint& p)
{
    // p collinear with u, v.
    const i128 dot = static_cast<i128>(p.x - u.x) * (v.x - u.x) + static_cast<i128>(p.y - u.y) * (v.y - u.y);
    const i128 len = static_cast<i128>(v.x - u.x) * (v.x - u.x) + static_cast<i128>(v.y - u.y) * (v.y - u.y);
    return dot > 0 && dot < len;
}

using Tri = std::array<int, 3>; // ghost triangles keep kInfinite last

} // namespace

std::vector<std::array<int, 3>> delaunay(const std::vector<ParamPoint>& points)
{
    const int n = static_cast<int>(points.size());
    if (n < 3) {
        return {};
    }
    int scale = 0;
    for (const ParamPoint& p : points) {
        if (p.dim() != 2) {
            throw InputError("delaunay: points must be two-dimensional");
        }
        for (const DyadicCoord& c : p.ref()) {
            scale = std::max(scale, c.log2_den());
        }
    }
    if (scale > 28) {
        throw InputError("delaunay: grid too fine for exact predicates");
    }
    std::vector<IPoint> pts;
    for (const ParamPoint& p : points) {
        const auto& r = p.ref();
        pts.push_back({r[0].numerator() << (scale - r[0].log2_den()),
                       r[1].numerator() << (scale - r[1].log2_den())});
    }

    // Seed with the first non-degenerate triple in input order.
    int third = -1;
    for (int k = 2; k < n && third < 0; ++k) {
        if (orient(pts[0], pts[1], pts[static_cast<std::size_t>(k)]) != 0) {
            third = k;
        }
    }
    if (third < 0) {
        return {};
    }
    std::vector<Tri> tris;
    Tri seed{0, 1, third};
    if (orient(pts[0], pts[1], pts[static_cast<std::size_t>(third)]) < 0) {
        std::swap(seed[1], seed[2]);
    }
    tris.push_back(seed);
    for (int e = 0; e < 3; ++e) {
        tris.push_back({seed[static_cast<std::size_t>((e + 1) % 3)], seed[static_cast<std::size_t>(e)], kInfinite});
    }

    auto conflicts = [&](const Tri& t, const IPoint& p) {
        const IPoint& u = pts[static_cast<std::size_t>(t[0])];
        const IPoint& v = pts[static_cast<std::size_t>(t[1])];
        if (t[2] == kInfinite) {
            i128 o = orient(u, v, p);
            return o > 0 || (o == 0 && strictly_between(u, v, p));
        }
        return incircle(u, v, pts[static_cast<std::size_t>(t[2])], p) > 0;
    };

    for (int i = 1; i < n; ++i) {
        if (i == 1 || i == third) {
            continue;
        }
        const IPoint& p = pts[static_cast<std::size_t>(i)];
        std::vector<Tri> keep;
        std::set<std::pair<int, int>> cavity_edges;
        std::vector<std::pair<int, int>> edges;
        for (const Tri& t : tris) {
            if (conflicts(t, p)) {
                for (int e = 0; e < 3; ++e) {
                    std::pair<int, int> ed{t[static_cast<std::size_t>(e)], t[static_cast<std::size_t>((e + 1) % 3)]};
                    cavity_edges.insert(ed);
                    edges.push_back(ed);
                }
            } else {
                keep.push_back(t);
            }
        }
        if (edges.empty()) {
            throw Error("delaunay: point " + points[static_cast<std::size_t>(i)].label() +
                        " duplicates an earlier point");
        }
        for (auto [u, v] : edges) {
            if (cavity_edges.contains({v, u})) {
                continue; // interior edge of the cavity
            }
            Tri t{u, v, i};
            if (u == kInfinite) {
                t = {v, i, kInfinite};
            } else if (v == kInfinite) {
                t = {i, u, kInfinite};
            } else if (orient(pts[static_cast<std::size_t>(u)], pts[static_cast<std::size_t>(v)], p) <= 0) {
                throw Error("delaunay: degenerate cavity");
            }
            keep.push_back(t);
        }
        tris = std::move(keep);
    }

    std::vector<std::array<int, 3>> out;
    for (const Tri& t : tris) {
        if (t[2] != kInfinite) {
            // Rotate so the smallest index comes first; sort for determinism.
            auto m = std::min_element(t.begin(), t.end()) - t.begin();
            out.push_back({t[static_cast<std::size_t>(m)], t[static_cast<std::size_t>((m + 1) % 3)],
                           t[static_cast<std::size_t>((m + 2) % 3)]});
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Surrogate

Surrogate::Surrogate(const Box& box, const std::vector<Sample>& samples) : box_(box), samples_(samples)
{
    std::set<ParamPoint> grid;
    for (const Sample& s : samples_) {
        if (s.point.dim() != box_.dim()) {
            throw InputError("surrogate: sample dimension does not match the box");
        }
        grid.insert(s.point);
    }
    grid_.assign(grid.begin(), grid.end());
    for (const Sample& s : samples_) {
        auto idx = static_cast<int>(std::lower_bound(grid_.begin(), grid_.end(), s.point) - grid_.begin());
        if (!values_[s.surface].emplace(idx, s.lambda).second) {
            throw InputError("surrogate: surface " + std::to_string(s.surface) +
                             " sampled twice at " + s.point.label());
        }
    }
    if (box_.dim() == 2) {
        triangles_ = delaunay(grid_);
    }
}

Surrogate Surrogate::build(const SurfaceLabeling& labeling, const Box& box)
{
    std::vector<Sample> samples;
    for (std::size_t p = 0; p < labeling.points.size(); ++p) {
        for (std::size_t i = 0; i < labeling.ids[p].size(); ++i) {
            samples.push_back({labeling.ids[p][i], labeling.points[p], labeling.values[p][i]});
        }
    }
    return Surrogate(box, samples);
}

std::vector<int> Surrogate::surface_ids() const
{
    std::vector<int> ids;
    for (const auto& [id, vals] : values_) {
        ids.push_back(id);
    }
    return ids;
}

bool Surrogate::point_only(int surface) const
{
    auto it = values_.find(surface);
    if (it == values_.end()) {
        throw InputError("unknown surface id " + std::to_string(surface));
    }
    const auto& vals = it->second;
    if (box_.dim() == 1) {
        for (std::size_t k = 0; k + 1 < grid_.size(); ++k) {
            if (vals.contains(static_cast<int>(k)) && vals.contains(static_cast<int>(k + 1))) {
                return false;
            }
        }
        return true;
    }
    if (box_.dim() == 2) {
        return std::none_of(triangles_.begin(), triangles_.end(), [&](const auto& t) {
            return vals.contains(t[0]) && vals.contains(t[1]) && vals.contains(t[2]);
        });
    }
    return true;
}

std::optional<double> Surrogate::eval(int surface, std::span<const double> mu) const
{
    auto it = values_.find(surface);
    if (it == values_.end()) {
        throw InputError("unknown surface id " + std::to_string(surface));
    }
    if (static_cast<int>(mu.size()) != box_.dim()) {
        throw InputError("surrogate eval: expected " + std::to_string(box_.dim()) + " coordinates");
    }
    if (!box_.contains(mu)) {
        throw DomainError("surrogate eval: point outside the parameter box");
    }
    const auto& vals = it->second;
    std::vector<double> x(mu.size());
    for (std::size_t k = 0; k < mu.size(); ++k) {
        x[k] = std::clamp(to_reference(mu[k], box_.axes[k]), -1.0, 1.0);
    }
    constexpr double vertex_tol = 1e-13;

    // Exact sample reproduction.
    for (const auto& [gi, lambda] : vals) {
        const auto& r = grid_[static_cast<std::size_t>(gi)].ref();
        bool same = true;
        for (std::size_t k = 0; k < x.size() && same; ++k) {
            same = std::abs(r[k].value() - x[k]) <= vertex_tol;
        }
        if (same) {
            return lambda;
        }
    }

    if (box_.dim() == 1) {
        for (std::size_t k = 0; k + 1 < grid_.size(); ++k) {
            const double x0 = grid_[k].ref()[0].value();
            const double x1 = grid_[k + 1].ref()[0].value();
            if (x[0] < x0 || x[0] > x1) {
                continue;
            }
            auto v0 = vals.find(static_cast<int>(k));
            auto v1 = vals.find(static_cast<int>(k + 1));
            if (v0 == vals.end() || v1 == vals.end()) {
                return std::nullopt;
            }
            const double t = (x[0] - x0) / (x1 - x0);
            return (1.0 - t) * v0->second + t * v1->second;
        }
        return std::nullopt;
    }
    if (box_.dim() == 2) {
        constexpr double tol = 1e-12;
        for (const auto& t : triangles_) {
            auto va = vals.find(t[0]);
            auto vb = vals.find(t[1]);
            auto vc = vals.find(t[2]);
            if (va == vals.end() || vb == vals.end() || vc == vals.end()) {
                continue;
            }
            const auto& a = grid_[static_cast<std::size_t>(t[0])].ref();
            const auto& b = grid_[static_cast<std::size_t>(t[1])].ref();
            const auto& c = grid_[static_cast<std::size_t>(t[2])].ref();
            const double ax = a[0].value(), ay = a[1].value();
            const double bx = b[0].value(), by = b[1].value();
            const double cx = c[0].value(), cy = c[1].value();
            const double det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
            const double l1 = ((x[0] - ax) * (cy - ay) - (x[1] - ay) * (cx - ax)) / det;
            const double l2 = ((bx - ax) * (x[1] - ay) - (by - ay) * (x[0] - ax)) / det;
            const double l0 = 1.0 - l1 - l2;
            if (l0 >= -tol && l1 >= -tol && l2 >= -tol) {
                return l0 * va->second + l1 * vb->second + l2 * vc->second;
            }
        }
        return std::nullopt;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string mu_header(int dim)
{
    std::string h;
    for (int k = 1; k <= dim; ++k) {
        h += ",mu" + std::to_string(k);
    }
    return h;
}

std::string mu_fields(const ParamPoint& p)
{
    std::string s;
    for (double v : p.phys()) {
        s += "," + format_double(v);
    }
    return s;
}

void write_text(const fs::path& path, const std::string& text, std::vector<fs::path>& written)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();
    if (!out) {
        throw InputError("cannot write " + path.string());
    }
    written.push_back(path);
}

std::string join(const std::vector<std::string>& parts, const std::string& sep)
{
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        s += (i ? sep : "") + parts[i];
    }
    return s;
}

std::string labeling_csv(const SurfaceLabeling& labeling, int dim)
{
    std::string s = "surface,local_index" + mu_header(dim) + ",lambda\n";
    for (std::size_t p = 0; p < labeling.points.size(); ++p) {
        for (std::size_t i = 0; i < labeling.ids[p].size(); ++i) {
            s += std::to_string(labeling.ids[p][i]) + "," + std::to_string(i + 1) +
                 mu_fields(labeling.points[p]) + "," + format_double(labeling.values[p][i]) + "\n";
        }
    }
    return s;
}

std::string projections_csv(const RunState& state, int dim)
{
    std::string head = "level";
    for (int k = 1; k <= dim; ++k) {
        head += ",p_mu" + std::to_string(k);
    }
    for (int k = 1; k <= dim; ++k) {
        head += ",q_mu" + std::to_string(k);
    }
    std::string s = head + ",n_p,n_q,sigma,verdict,failed_at,min_diagonal,ambiguous,clusters\n";
    for (const Subinterval& sub : state.checked) {
        std::vector<std::string> sigma, ambiguous, clusters;
        for (int c : sub.assignment.sigma) {
            sigma.push_back(std::to_string(c + 1));
        }
        const Eigen::MatrixXd& pi = sub.report.truncated;
        double min_diag = pi.rows() && pi.cols() ? 1.0 : 0.0;
        for (Eigen::Index j = 0; j < std::min(pi.rows(), pi.cols()); ++j) {
            min_diag = std::min(min_diag, sub.report.projection(j, j));
        }
        for (Eigen::Index j = 0; j < pi.rows(); ++j) {
            for (Eigen::Index l = 0; l < pi.cols(); ++l) {
                if (j != l && pi(j, l) != 0.0) {
                    ambiguous.push_back(std::to_string(j + 1) + "-" + std::to_string(l + 1));
                }
            }
        }
        for (const auto& members : sub.report.clusters) {
            std::vector<std::string> m;
            for (int x : members) {
                m.push_back(std::to_string(x + 1));
            }
            clusters.push_back(join(m, "+"));
        }
        s += std::to_string(sub.level) + mu_fields(sub.p) + mu_fields(sub.q) + "," +
             std::to_string(sub.p_values.size()) + "," + std::to_string(sub.q_values.size()) + "," +
             join(sigma, " ") + "," + (sub.certified() ? "certified" : "refine") + "," +
             (sub.report.failed_at < 0 ? std::string{} : std::to_string(sub.report.failed_at + 1)) +
             "," + format_double(min_diag) + "," + join(ambiguous, " ") + "," + join(clusters, " ") +
             "\n";
    }
    return s;
}

nlohmann::ordered_json config_json(const RunConfig& cfg)
{
    nlohmann::ordered_json j;
    nlohmann::ordered_json box = nlohmann::ordered_json::array();
    for (const Interval& a : cfg.box.axes) {
        box.push_back({a.lo, a.hi});
    }
    j["box"] = box;
    j["window"] = {cfg.window.lo, cfg.window.hi};
    j["coefficient"] = {cfg.coefficient.c11.canonical(), cfg.coefficient.c12.canonical(),
                        cfg.coefficient.c21.canonical(), cfg.coefficient.c22.canonical()};
    j["mesh_n"] = cfg.mesh_n;
    j["w1"] = cfg.w1;
    j["w2"] = cfg.w2;
    j["t_pi"] = cfg.t_pi;
    j["t_lambda"] = cfg.t_lambda;
    j["initial_level"] = cfg.initial_level;
    j["max_level"] = cfg.max_level;
    return j;
}

nlohmann::ordered_json levels_json(const RunState& state)
{
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const LevelSummary& s : state.summaries()) {
        arr.push_back({{"level", s.level},
                       {"points_total", s.points_total},
                       {"points_new", s.points_new},
                       {"subintervals_checked", s.subintervals_checked},
                       {"subintervals_uncertified", s.subintervals_uncertified}});
    }
    return arr;
}

} // namespace

std::string error_table_csv(const std::vector<ErrorRow>& rows)
{
    std::string s = "level,points_total,wrongly_matched,subintervals,uncertified\n";
    for (const ErrorRow& r : rows) {
        s += fmt::format("{},{},{},{},{}\n", r.level, r.points_total, r.wrongly_matched,
                         r.subintervals, r.uncertified);
    }
    return s;
}

std::string error_table_text(const std::vector<ErrorRow>& rows)
{
    std::string s = fmt::format("{:>5}  {:>12}  {:>15}  {:>12}  {:>11}\n", "Level", "Total points",
                                "Wrongly matched", "Subintervals", "Uncertified");
    for (const ErrorRow& r : rows) {
        s += fmt::format("{:>5}  {:>12}  {:>15}  {:>12}  {:>11}\n", r.level, r.points_total,
                         r.wrongly_matched, r.subintervals, r.uncertified);
    }
    return s;
}

void write_surfaces_csv(const SurfaceLabeling& labeling, const fs::path& path)
{
    std::vector<fs::path> written;
    const int dim = labeling.points.empty() ? 0 : labeling.points.front().dim();
    write_text(path, labeling_csv(labeling, dim), written);
}

std::vector<Surrogate::Sample> read_surfaces_csv(const fs::path& path, const Box& box)
{
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot read " + path.string());
    }
    std::string line;
    std::getline(in, line);
    const std::string expected = "surface,local_index" + mu_header(box.dim()) + ",lambda";
    if (line != expected) {
        throw ParseError(path.string() + ": unexpected header '" + line + "'");
    }
    std::vector<Surrogate::Sample> samples;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ',');) {
            fields.push_back(f);
        }
        if (static_cast<int>(fields.size()) != 3 + box.dim()) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": wrong field count");
        }
        try {
            Surrogate::Sample s;
            s.surface = std::stoi(fields[0]);
            std::vector<double> mu;
            for (int k = 0; k < box.dim(); ++k) {
                mu.push_back(std::stod(fields[static_cast<std::size_t>(2 + k)]));
            }
            s.point = snap_to_grid(mu, box);
            s.lambda = std::stod(fields.back());
            samples.push_back(std::move(s));
        } catch (const std::logic_error&) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed number");
        }
    }
    return samples;
}

std::vector<fs::path> emit_reports(const RunConfig& cfg, const RunState& state,
                                   const SurfaceLabeling& labeling,
                                   const std::optional<std::vector<ErrorRow>>& errors,
                                   const fs::path& out_dir)
{
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw InputError("cannot create output directory " + out_dir.string() + ": " + ec.message());
    }
    const int dim = cfg.dim();
    std::vector<fs::path> written;

    for (const LevelState& lv : state.levels) {
        std::string grid = "level" + mu_header(dim) + ",new\n";
        for (const ParamPoint& p : lv.points) {
            grid += std::to_string(lv.level) + mu_fields(p) + "," + (lv.added.contains(p) ? "1" : "0") + "\n";
        }
        write_text(out_dir / fmt::format("grid_level_{}.csv", lv.level), grid, written);
        write_text(out_dir / fmt::format("eigenvalues_level_{}.csv", lv.level),
                   labeling_csv(level_labeling(state, lv.level), dim), written);
    }
    write_text(out_dir / "projections.csv", projections_csv(state, dim), written);
    write_text(out_dir / "surfaces.csv", labeling_csv(labeling, dim), written);
    write_text(out_dir / "levels.json", levels_json(state).dump(2) + "\n", written);
    if (errors) {
        write_text(out_dir / "error_table.csv", error_table_csv(*errors), written);
        write_text(out_dir / "error_table.txt", error_table_text(*errors), written);
    }

    nlohmann::ordered_json meta;
    meta["config"] = config_json(cfg);
    meta["termination"] = to_string(state.termination);
    meta["final_level"] = state.current().level;
    meta["points"] = state.current().points.size();
    meta["surfaces"] = labeling.num_surfaces;
    meta["subintervals_checked"] = state.checked.size();
    meta["levels"] = levels_json(state);
    nlohmann::ordered_json pending = nlohmann::ordered_json::array();
    for (const ParamPoint& p : state.pending) {
        pending.push_back(p.phys());
    }
    meta["pending_points"] = pending;
    write_text(out_dir / "metadata.json", meta.dump(2) + "\n", written);
    return written;
}

} // namespace eigentrack
