#ifndef ETTREG_INTERVAL_HPP
#define ETTREG_INTERVAL_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace ettreg {

/// Closed real interval [lo, hi]. Degenerate (lo == hi) means the wrapped
/// value is known exactly. An infinite upper bound is allowed to express "no
/// constraint"; arithmetic extends monotonically to that case.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    constexpr Interval() = default;
    explicit constexpr Interval(double point) : lo(point), hi(point) {}
    Interval(double l, double h) : lo(l), hi(h) {
        if (!(l <= h)) {
            throw std::invalid_argument("interval bounds out of order");
        }
    }

    bool degenerate() const { return lo == hi; }
    bool contains(double x) const { return lo <= x && x <= hi; }

    friend bool operator==(const Interval& a, const Interval& b) {
        return a.lo == b.lo && a.hi == b.hi;
    }
};

/// Builds the symmetric interval [center - radius, center + radius].
inline Interval make_interval(double center, double radius) {
    if (radius < 0.0 || std::isnan(radius)) {
        throw std::invalid_argument("interval radius must be nonnegative");
    }
    return Interval(center - radius, center + radius);
}

inline Interval operator+(Interval a, Interval b) {
    return Interval(a.lo + b.lo, a.hi + b.hi);
}

inline Interval operator-(Interval a, Interval b) {
    return Interval(a.lo - b.hi, a.hi - b.lo);
}

namespace detail {
// Endpoint product with the 0 * inf = 0 convention, so that degenerate zero
// factors annihilate unbounded ones instead of producing NaN.
inline double eprod(double x, double y) {
    if (x == 0.0 || y == 0.0) {
        return 0.0;
    }
    return x * y;
}
} // namespace detail

inline Interval operator*(Interval a, Interval b) {
    const double p1 = detail::eprod(a.lo, b.lo);
    const double p2 = detail::eprod(a.lo, b.hi);
    const double p3 = detail::eprod(a.hi, b.lo);
    const double p4 = detail::eprod(a.hi, b.hi);
    return Interval(std::min(std::min(p1, p2), std::min(p3, p4)),
                    std::max(std::max(p1, p2), std::max(p3, p4)));
}

/// Scalar multiple a * X; for a < 0 the bounds swap.
inline Interval scale(double a, Interval x) {
    if (a >= 0.0) {
        return Interval(detail::eprod(a, x.lo), detail::eprod(a, x.hi));
    }
    return Interval(detail::eprod(a, x.hi), detail::eprod(a, x.lo));
}

inline double width(Interval x) { return x.hi - x.lo; }

inline std::ostream& operator<<(std::ostream& os, const Interval& x) {
    return os << '[' << x.lo << ", " << x.hi << ']';
}

} // namespace ettreg

#endif
