#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "eigentrack/expression.hpp"

namespace eigentrack {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

/// Axis-aligned parameter box M = [a_1,b_1] x ... x [a_d,b_d].
struct Box {
    std::vector<Interval> axes;

    [[nodiscard]] int dim() const { return static_cast<int>(axes.size()); }
    [[nodiscard]] bool contains(std::span<const double> mu, double slack = 1e-12) const;
};

/// The four entries of the 2x2 diffusion coefficient c(mu).
struct CoeffSpec {
    Expression c11, c12, c21, c22;

    /// Identity coefficient, c(mu) = I.
    static CoeffSpec identity();
};

struct RunConfig {
    Box box;
    Interval window;          // I_lambda = [lambda_min, lambda_max]
    CoeffSpec coefficient;
    int mesh_n = 65;
    double w1 = 1.0;
    double w2 = 200.0;
    double t_pi = 0.21;
    double t_lambda = 0.001;
    std::vector<int> initial_level; // one entry per axis
    int max_level = 10;
    std::filesystem::path cache_dir = "cache";
    std::filesystem::path output_dir = "out";

    [[nodiscard]] int dim() const { return box.dim(); }

    /// Throws ValidationError when an invariant is violated.
    void validate() const;
};

/// Parses the INI-style run configuration (sections [problem], [tolerances],
/// [grid], [output]). Relative cache/output paths are kept as written.
RunConfig parse_config(std::string_view text);

/// Reads and parses a configuration file.
RunConfig load_config(const std::filesystem::path& path);

/// Evaluates c(mu); throws ValidationError if the result is not SPD and
/// DomainError on division by zero.
Eigen::Matrix2d eval_coefficient(const CoeffSpec& spec, std::span<const double> mu);

} // namespace eigentrack
