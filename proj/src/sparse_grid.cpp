#include "eigentrack/sparse_grid.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "eigentrack/error.hpp"

namespace eigentrack {

namespace {

constexpr int kMaxLog2Den = 60;

std::int64_t scale_up(std::int64_t num, int by)
{
    return num * (std::int64_t{1} << by);
}

} // namespace

DyadicCoord::DyadicCoord(std::int64_t numerator, int log2_den) : num_(numerator), log2_den_(log2_den)
{
    if (log2_den_ < 0) {
        num_ = scale_up(num_, -log2_den_);
        log2_den_ = 0;
    }
    while (log2_den_ > 0 && num_ % 2 == 0) {
        num_ /= 2;
        --log2_den_;
    }
    if (num_ == 0) {
        log2_den_ = 0;
    }
    if (log2_den_ > kMaxLog2Den) {
        throw DomainError("dyadic coordinate too fine: 2^-" + std::to_string(log2_den_));
    }
}

double DyadicCoord::value() const
{
    return std::ldexp(static_cast<double>(num_), -log2_den_);
}

int DyadicCoord::level() const
{
    if (num_ == 0) {
        return 0;
    }
    return log2_den_ + 1;
}

DyadicCoord DyadicCoord::shifted(int sign, int exponent) const
{
    if (exponent <= 0) {
        return {num_ + sign * scale_up(scale_up(1, -exponent), log2_den_), log2_den_};
    }
    int common = std::max(log2_den_, exponent);
    return {scale_up(num_, common - log2_den_) + sign * scale_up(1, common - exponent), common};
}

std::strong_ordering operator<=>(const DyadicCoord& a, const DyadicCoord& b)
{
    int common = std::max(a.log2_den_, b.log2_den_);
    return scale_up(a.num_, common - a.log2_den_) <=> scale_up(b.num_, common - b.log2_den_);
}

std::string DyadicCoord::str() const
{
    if (log2_den_ == 0) {
        return std::to_string(num_);
    }
    return std::to_string(num_) + "/" + std::to_string(std::int64_t{1} << log2_den_);
}

DyadicCoord midpoint(const DyadicCoord& a, const DyadicCoord& b)
{
    int common = std::max(a.log2_den(), b.log2_den());
    return {scale_up(a.numerator(), common - a.log2_den()) +
                scale_up(b.numerator(), common - b.log2_den()),
            common + 1};
}

double to_physical(double ref, const Interval& axis)
{
    return axis.lo + (axis.hi - axis.lo) * (ref + 1.0) / 2.0;
}

double to_reference(double phys, const Interval& axis)
{
    return 2.0 * (phys - axis.lo) / (axis.hi - axis.lo) - 1.0;
}

ParamPoint::ParamPoint(std::vector<DyadicCoord> ref, const Box& box) : ref_(std::move(ref))
{
    if (static_cast<int>(ref_.size()) != box.dim()) {
        throw InputError("point dimension does not match the box");
    }
    phys_.reserve(ref_.size());
    for (std::size_t k = 0; k < ref_.size(); ++k) {
        if (ref_[k] < DyadicCoord(-1, 0) || ref_[k] > DyadicCoord(1, 0)) {
            throw DomainError("reference coordinate " + ref_[k].str() + " outside [-1, 1]");
        }
        phys_.push_back(to_physical(ref_[k].value(), box.axes[k]));
    }
}

std::vector<int> ParamPoint::levels() const
{
    std::vector<int> out;
    out.reserve(ref_.size());
    for (const auto& c : ref_) {
        out.push_back(c.level());
    }
    return out;
}

std::string ParamPoint::key() const
{
    std::ostringstream os;
    for (std::size_t k = 0; k < ref_.size(); ++k) {
        if (k) {
            os << '_';
        }
        os << 'n' << ref_[k].numerator() << 'd' << ref_[k].log2_den();
    }
    return os.str();
}

std::string ParamPoint::label() const
{
    std::ostringstream os;
    os.precision(10);
    os << '(';
    for (std::size_t k = 0; k < phys_.size(); ++k) {
        os << (k ? ", " : "") << phys_[k];
    }
    os << ')';
    return os.str();
}

std::vector<DyadicCoord> gamma_set(int m)
{
    if (m < 0) {
        throw DomainError("gamma_set needs m >= 0");
    }
    if (m == 0) {
        return {DyadicCoord(0, 0)};
    }
    std::vector<DyadicCoord> out;
    const std::int64_t half = std::int64_t{1} << (m - 1);
    out.reserve(static_cast<std::size_t>(2 * half + 1));
    for (std::int64_t j = -half; j <= half; ++j) {
        out.emplace_back(j, m - 1);
    }
    return out;
}

PointSet tensor_grid(const std::vector<int>& levels, const Box& box)
{
    if (static_cast<int>(levels.size()) != box.dim()) {
        throw InputError("tensor_grid needs one level per axis");
    }
    std::vector<std::vector<DyadicCoord>> axes;
    for (int m : levels) {
        axes.push_back(gamma_set(m));
    }
    PointSet out;
    std::vector<std::size_t> idx(levels.size(), 0);
    for (;;) {
        std::vector<DyadicCoord> ref;
        for (std::size_t k = 0; k < idx.size(); ++k) {
            ref.push_back(axes[k][idx[k]]);
        }
        out.emplace(std::move(ref), box);
        std::size_t k = 0;
        while (k < idx.size() && ++idx[k] == axes[k].size()) {
            idx[k++] = 0;
        }
        if (k == idx.size()) {
            return out;
        }
    }
}

namespace {

/// Points p +- 2^-(m_k - offset) e_k inside the reference cube.
PointSet axis_steps(const ParamPoint& p, const Box& box, int offset)
{
    PointSet out;
    const DyadicCoord lo(-1, 0), hi(1, 0);
    auto levels = p.levels();
    for (std::size_t k = 0; k < levels.size(); ++k) {
        for (int sign : {-1, 1}) {
            DyadicCoord c = p.ref()[k].shifted(sign, levels[k] - offset);
            if (c < lo || c > hi) {
                continue;
            }
            auto ref = p.ref();
            ref[k] = c;
            out.emplace(std::move(ref), box);
        }
    }
    return out;
}

} // namespace

PointSet forward_points(const ParamPoint& p, const Box& box)
{
    return axis_steps(p, box, 0);
}

PointSet neighbours(const ParamPoint& p, const Box& box)
{
    return axis_steps(p, box, 1);
}

ParamPoint midpoint_toward(const ParamPoint& p, const ParamPoint& q, const Box& box)
{
    if (!neighbours(p, box).count(q)) {
        throw InputError("midpoint_toward: " + q.label() + " is not a neighbour of " + p.label());
    }
    auto ref = p.ref();
    for (std::size_t k = 0; k < ref.size(); ++k) {
        if (!(ref[k] == q.ref()[k])) {
            ref[k] = midpoint(ref[k], q.ref()[k]);
        }
    }
    return {std::move(ref), box};
}

ParamPoint snap_to_grid(const std::vector<double>& phys, const Box& box, int max_depth)
{
    if (static_cast<int>(phys.size()) != box.dim()) {
        throw DomainError("expected " + std::to_string(box.dim()) + " coordinates");
    }
    std::vector<DyadicCoord> ref;
    for (std::size_t k = 0; k < phys.size(); ++k) {
        double r = to_reference(phys[k], box.axes[k]);
        bool found = false;
        for (int depth = 0; depth <= max_depth && !found; ++depth) {
            double scaled = std::ldexp(r, depth);
            double rounded = std::nearbyint(scaled);
            if (std::abs(std::ldexp(rounded, -depth) - r) <= 1e-13) {
                ref.emplace_back(static_cast<std::int64_t>(rounded), depth);
                found = true;
            }
        }
        if (!found) {
            std::ostringstream os;
            os << "coordinate " << phys[k] << " is not a dyadic grid location of axis " << k + 1;
            throw DomainError(os.str());
        }
    }
    return {std::move(ref), box};
}

} // namespace eigentrack
