#pragma once

#include <compare>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "eigentrack/config.hpp"

namespace eigentrack {

/// Exact dyadic rational numerator / 2^log2_den in [-1, 1], kept in lowest
/// terms (odd numerator, or 0 with log2_den 0).
class DyadicCoord {
public:
    DyadicCoord() = default;
    DyadicCoord(std::int64_t numerator, int log2_den);

    [[nodiscard]] std::int64_t numerator() const { return num_; }
    [[nodiscard]] int log2_den() const { return log2_den_; }
    [[nodiscard]] double value() const;

    /// Minimal m with this coordinate in Gamma(m): 0 for 0, 1 for +-1,
    /// log2_den + 1 otherwise.
    [[nodiscard]] int level() const;

    /// this + sign * 2^-exponent (exponent may be negative).
    [[nodiscard]] DyadicCoord shifted(int sign, int exponent) const;

    friend bool operator==(const DyadicCoord&, const DyadicCoord&) = default;
    friend std::strong_ordering operator<=>(const DyadicCoord& a, const DyadicCoord& b);

    [[nodiscard]] std::string str() const; // "3/8", "-1", "0"

private:
    std::int64_t num_ = 0;
    int log2_den_ = 0;
};

/// Midpoint of two dyadic coordinates.
DyadicCoord midpoint(const DyadicCoord& a, const DyadicCoord& b);

/// Grid point: exact reference coordinates in [-1,1]^d plus the derived
/// physical coordinates phys_k = a_k + (b_k - a_k)(ref_k + 1)/2.
class ParamPoint {
public:
    ParamPoint() = default;
    ParamPoint(std::vector<DyadicCoord> ref, const Box& box);

    [[nodiscard]] int dim() const { return static_cast<int>(ref_.size()); }
    [[nodiscard]] const std::vector<DyadicCoord>& ref() const { return ref_; }
    [[nodiscard]] const std::vector<double>& phys() const { return phys_; }
    [[nodiscard]] std::vector<int> levels() const;

    /// Filename-safe exact key, e.g. "n-1d0_n3d3".
    [[nodiscard]] std::string key() const;
    /// Human-readable physical coordinates, e.g. "(0.4, 0.8125)".
    [[nodiscard]] std::string label() const;

    friend bool operator==(const ParamPoint& a, const ParamPoint& b) { return a.ref_ == b.ref_; }
    friend std::strong_ordering operator<=>(const ParamPoint& a, const ParamPoint& b)
    {
        return a.ref_ <=> b.ref_;
    }

private:
    std::vector<DyadicCoord> ref_;
    std::vector<double> phys_;
};

using PointSet = std::set<ParamPoint>;

/// Gamma(0) = {0}; Gamma(m) = {2^(1-m) j : |j| <= 2^(m-1)}, ascending.
std::vector<DyadicCoord> gamma_set(int m);

/// Tensor lattice Gamma(m_1) x ... x Gamma(m_d) mapped to `box`.
PointSet tensor_grid(const std::vector<int>& levels, const Box& box);

/// Forward points p +- 2^-m_k e_k inside [-1,1]^d.
PointSet forward_points(const ParamPoint& p, const Box& box);

/// Neighbours p +- 2^-(m_k - 1) e_k inside [-1,1]^d.
PointSet neighbours(const ParamPoint& p, const Box& box);

/// Forward point of p on the axis where q differs, in the direction of q.
/// Throws InputError if q is not a neighbour of p.
ParamPoint midpoint_toward(const ParamPoint& p, const ParamPoint& q, const Box& box);

double to_physical(double ref, const Interval& axis);
double to_reference(double phys, const Interval& axis);

/// Exact dyadic point whose physical coordinates equal `phys` (within 1e-13
/// in reference coordinates) with denominators at most 2^max_depth; throws
/// DomainError otherwise.
ParamPoint snap_to_grid(const std::vector<double>& phys, const Box& box, int max_depth = 30);

/// P^(l) = P^(l-1) u P^(l)_delta.
struct LevelState {
    int level = 0;
    PointSet points;
    PointSet added;
};

} // namespace eigentrack
