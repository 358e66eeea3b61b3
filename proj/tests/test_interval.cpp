#include <catch2/catch.hpp>

#include "ettreg/interval.hpp"
#include "ettreg/rng.hpp"

#include <cmath>
#include <limits>
#include <vector>

using ettreg::Interval;
using ettreg::make_interval;
using ettreg::scale;
using ettreg::width;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Brute-force min/max of x*y over an n-by-n grid of X x Y. The grid extremes
// bound the true interval product up to one grid cell of slack.
std::pair<double, double> mul_grid_oracle(Interval x, Interval y, int n) {
    double lo = kInf, hi = -kInf;
    for (int i = 0; i < n; ++i) {
        const double xv = x.lo + (x.hi - x.lo) * i / (n - 1);
        for (int j = 0; j < n; ++j) {
            const double yv = y.lo + (y.hi - y.lo) * j / (n - 1);
            lo = std::min(lo, xv * yv);
            hi = std::max(hi, xv * yv);
        }
    }
    return {lo, hi};
}

std::vector<double> probe_points(Interval x) {
    return {x.lo, 0.5 * (x.lo + x.hi), x.hi};
}

} // namespace

TEST_CASE("interval construction", "[interval]") {
    CHECK(make_interval(3.0, 1.0 / 3.0) == Interval(8.0 / 3.0, 10.0 / 3.0));
    CHECK(make_interval(5.0, 0.0) == Interval(5.0, 5.0));
    CHECK(make_interval(-2.0, 1.0) == Interval(-3.0, -1.0));
    CHECK(make_interval(5.0, 0.0).degenerate());
    CHECK_THROWS_AS(make_interval(1.0, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(Interval(2.0, 1.0), std::invalid_argument);
}

TEST_CASE("interval addition and subtraction", "[interval]") {
    CHECK(Interval(16.0 / 3.0, 20.0 / 3.0) + Interval(8.0 / 3.0, 16.0 / 3.0) ==
          Interval(8.0, 12.0));
    CHECK(Interval(0.0, 0.0) + Interval(-4.0, 7.0) == Interval(-4.0, 7.0));
    CHECK(Interval(1.0, 2.0) + Interval(3.0, 4.0) == Interval(4.0, 6.0));

    CHECK(Interval(8.0, 12.0) - Interval(9.0, 9.0) == Interval(-1.0, 3.0));
    CHECK(Interval(1.0, 2.0) - Interval(1.0, 2.0) == Interval(-1.0, 1.0));
    CHECK(Interval(5.0, 6.0) - Interval(0.0, 0.0) == Interval(5.0, 6.0));
}

TEST_CASE("interval multiplication", "[interval]") {
    CHECK(Interval(-2.0, -2.0) * Interval(1.0, 3.0) == Interval(-6.0, -2.0));
    CHECK(Interval(1.0, 1.0) * Interval(-4.0, 7.0) == Interval(-4.0, 7.0));
    CHECK(Interval(-1.0, 2.0) * Interval(-3.0, 4.0) == Interval(-6.0, 8.0));
}

TEST_CASE("scalar scaling", "[interval]") {
    CHECK(scale(2.0, Interval(8.0 / 3.0, 10.0 / 3.0)) ==
          Interval(16.0 / 3.0, 20.0 / 3.0));
    CHECK(scale(-1.0, Interval(1.0, 2.0)) == Interval(-2.0, -1.0));
    CHECK(scale(0.0, Interval(-5.0, 7.0)) == Interval(0.0, 0.0));
}

TEST_CASE("width", "[interval]") {
    CHECK(width(Interval(8.0, 12.0)) == 4.0);
    CHECK(width(Interval(3.25, 3.25)) == 0.0);
}

TEST_CASE("unbounded upper endpoint", "[interval]") {
    const Interval unbounded(1.0, kInf);
    CHECK(width(unbounded) == kInf);
    CHECK((unbounded + Interval(1.0, 2.0)).hi == kInf);
    CHECK(scale(0.0, unbounded) == Interval(0.0, 0.0));
    CHECK((Interval(0.0, 0.0) * unbounded) == Interval(0.0, 0.0));
}

// Multiplying a non-degenerate interval by a negative scalar reverses it:
// scale(a, X) == [a*hi, a*lo], exactly.
TEST_CASE("negative scaling reverses bounds exactly", "[interval]") {
    ettreg::CounterRng rng(2024, 1);
    for (std::uint64_t i = 0; i < 20000; ++i) {
        const double a = -10.0 * rng.uniform01(4 * i) - 1e-9;
        const double lo = 20.0 * rng.uniform01(4 * i + 1) - 10.0;
        const double w = 10.0 * rng.uniform01(4 * i + 2) + 1e-12;
        const Interval x(lo, lo + w);
        const Interval s = scale(a, x);
        REQUIRE(s.lo == a * x.hi);
        REQUIRE(s.hi == a * x.lo);
    }
}

// Width of a scaled-and-combined pair of symmetric intervals is
// 2|aX|dx + 2|aY|dy, exactly, for every sign combination.
TEST_CASE("combined width identity over all sign cases", "[interval]") {
    ettreg::CounterRng rng(2024, 2);
    const double signs[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
    for (std::uint64_t i = 0; i < 20000; ++i) {
        const auto& sg = signs[i % 4];
        const double ax = sg[0] * (5.0 * rng.uniform01(6 * i) + 0.1);
        const double ay = sg[1] * (5.0 * rng.uniform01(6 * i + 1) + 0.1);
        const double dx = 3.0 * rng.uniform01(6 * i + 2);
        const double dy = 3.0 * rng.uniform01(6 * i + 3);
        const Interval x = make_interval(10.0 * rng.uniform01(6 * i + 4) - 5.0, dx);
        const Interval y = make_interval(10.0 * rng.uniform01(6 * i + 5) - 5.0, dy);
        const double expect = 2.0 * std::abs(ax) * dx + 2.0 * std::abs(ay) * dy;
        REQUIRE(width(scale(ax, x) + scale(ay, y)) == Approx(expect).margin(1e-12));
        REQUIRE(width(scale(ax, x) - scale(ay, y)) == Approx(expect).margin(1e-12));
    }
}

TEST_CASE("containment under +,-,*", "[interval]") {
    ettreg::CounterRng rng(2024, 3);
    for (std::uint64_t i = 0; i < 100000; ++i) {
        const Interval x = make_interval(8.0 * rng.uniform01(4 * i) - 4.0,
                                         4.0 * rng.uniform01(4 * i + 1));
        const Interval y = make_interval(8.0 * rng.uniform01(4 * i + 2) - 4.0,
                                         4.0 * rng.uniform01(4 * i + 3));
        const Interval sum = x + y;
        const Interval diff = x - y;
        const Interval prod = x * y;
        for (double xv : probe_points(x)) {
            for (double yv : probe_points(y)) {
                REQUIRE(sum.lo - 1e-12 <= xv + yv);
                REQUIRE(xv + yv <= sum.hi + 1e-12);
                REQUIRE(diff.lo - 1e-12 <= xv - yv);
                REQUIRE(xv - yv <= diff.hi + 1e-12);
                REQUIRE(prod.lo - 1e-12 <= xv * yv);
                REQUIRE(xv * yv <= prod.hi + 1e-12);
            }
        }
    }
}

TEST_CASE("multiplication matches grid oracle", "[interval]") {
    ettreg::CounterRng rng(2024, 4);
    const int n = 10;
    for (std::uint64_t i = 0; i < 5000; ++i) {
        const Interval x = make_interval(8.0 * rng.uniform01(4 * i) - 4.0,
                                         4.0 * rng.uniform01(4 * i + 1));
        const Interval y = make_interval(8.0 * rng.uniform01(4 * i + 2) - 4.0,
                                         4.0 * rng.uniform01(4 * i + 3));
        const auto [glo, ghi] = mul_grid_oracle(x, y, n);
        const Interval prod = x * y;
        const double resolution =
            width(x) / (n - 1) * std::max(std::abs(y.lo), std::abs(y.hi)) +
            width(y) / (n - 1) * std::max(std::abs(x.lo), std::abs(x.hi)) + 1e-12;
        REQUIRE(prod.lo <= glo + 1e-12);
        REQUIRE(prod.lo >= glo - resolution);
        REQUIRE(prod.hi >= ghi - 1e-12);
        REQUIRE(prod.hi <= ghi + resolution);
    }
}
