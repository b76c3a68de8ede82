#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <numbers>
#include <random>

#include "nlpot/geometry.hpp"

using namespace nlpot;
using std::numbers::pi;

namespace {

// Area of a disk of radius r cut by the half-plane {x <= c}.
double segment_area(double r, double c) {
    if (c <= -r) return 0.0;
    if (c >= r) return pi * r * r;
    return r * r * std::acos(-c / r) + c * std::sqrt(r * r - c * c);
}

// Midpoint cell count on an m x m sub-grid of the box.
double counted_area(const Point& center, double r, const Point& lo, const Point& hi, int m) {
    const double hx = (hi[0] - lo[0]) / m, hy = (hi[1] - lo[1]) / m;
    long inside = 0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const double x = lo[0] + (i + 0.5) * hx - center[0];
            const double y = lo[1] + (j + 0.5) * hy - center[1];
            if (x * x + y * y <= r * r) ++inside;
        }
    return inside * hx * hy;
}

}  // namespace

TEST(BallBoxVolume, DiskInsideBoxIsFullDisk) {
    Point c{0.5, 0.5};
    EXPECT_NEAR(geometry::ball_box_volume(c, 0.1, Box::unit(2)), pi * 0.01, 1e-15);
}

TEST(BallBoxVolume, HalfPlaneCutsMatchSegmentFormula) {
    for (double cut : {-0.7, -0.2, 0.0, 0.3, 0.9}) {
        Point lo{-5.0, -5.0}, hi{cut, 5.0};
        EXPECT_NEAR(geometry::ball_box_volume(Point{0.0, 0.0}, 1.0, lo, hi), segment_area(1.0, cut), 1e-13) << cut;
    }
}

TEST(BallBoxVolume, RandomBoxesMatchCellCounting) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Point c{u(rng), u(rng)};
        Point lo{u(rng), u(rng)};
        Point hi{lo[0] + 0.1 + std::abs(u(rng)), lo[1] + 0.1 + std::abs(u(rng))};
        const double r = 0.2 + std::abs(u(rng));
        const double exact = geometry::ball_box_volume(c, r, lo, hi);
        EXPECT_NEAR(exact, counted_area(c, r, lo, hi, 2000), 2e-4) << trial;
    }
}

TEST(BallBoxVolume, ThreeDimensionalCapAndFullBall) {
    Point c{0.0, 0.0, 0.0};
    EXPECT_NEAR(geometry::ball_box_volume(c, 0.5, Point{-1.0, -1.0, -1.0}, Point{1.0, 1.0, 1.0}),
                4.0 / 3.0 * pi * 0.125, 1e-14);
    for (double h : {0.1, 0.5, 1.0, 1.7}) {
        // Cap of height h of the unit ball: {z <= -1 + h}.
        const double cap = pi * h * h * (3.0 - h) / 3.0;
        EXPECT_NEAR(geometry::ball_box_volume(c, 1.0, Point{-2.0, -2.0, -2.0}, Point{2.0, 2.0, -1.0 + h}), cap,
                    1e-10 * (1.0 + cap))
            << h;
    }
}

TEST(BallBoxVolume, FourDimensionalBallInsideBox) {
    const Point c = Point::filled(4, 0.0);
    EXPECT_NEAR(geometry::ball_box_volume(c, 1.0, Point::filled(4, -2.0), Point::filled(4, 2.0)), pi * pi / 2.0,
                1e-12);
    // Orthant: one sixteenth.
    EXPECT_NEAR(geometry::ball_box_volume(c, 1.0, Point::filled(4, 0.0), Point::filled(4, 2.0)), pi * pi / 32.0,
                1e-9);
}

TEST(PowerIntegralBox, ZeroExponentIsVolume) {
    EXPECT_NEAR(geometry::power_integral_box(Point{0.3, 0.1}, 0.0, Point{0.0, 0.0}, Point{2.0, 0.5}), 1.0, 1e-12);
}

TEST(PowerIntegralBox, CenteredSquareMatchesPolarIntegral) {
    // ∫_{[-a,a]^2} |x|^{-k} = 8 ∫_0^{π/4} (a/cos θ)^{2-k}/(2-k) dθ.
    const double a = 0.7;
    for (double k : {0.5, 1.0, 1.5, 1.9}) {
        auto f = [&](double th) { return std::pow(a / std::cos(th), 2.0 - k) / (2.0 - k); };
        const double ref = 8.0 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, pi / 4, 10, 1e-14);
        const double got = geometry::power_integral_box(Point{0.0, 0.0}, k, Point{-a, -a}, Point{a, a});
        EXPECT_NEAR(got, ref, 1e-10 * ref) << k;
    }
}

TEST(PowerIntegralBox, OffsetSingularityMatchesSplitting) {
    // The box integral is additive under splitting at any plane.
    const Point a{0.2, -0.1};
    const double k = 1.3;
    const double whole = geometry::power_integral_box(a, k, Point{-1.0, -1.0}, Point{1.0, 1.0});
    const double left = geometry::power_integral_box(a, k, Point{-1.0, -1.0}, Point{0.5, 1.0});
    const double right = geometry::power_integral_box(a, k, Point{0.5, -1.0}, Point{1.0, 1.0});
    EXPECT_NEAR(whole, left + right, 1e-11 * whole);
}

TEST(PowerIntegralBox, ThreeDimensionalBallShellOracle) {
    // Centered cube of half-width a contains the ball of radius a: ∫_B |x|^{-1} = 2π a^2.
    const double a = 0.5;
    const double cube = geometry::power_integral_box(Point{0.0, 0.0, 0.0}, 1.0, Point::filled(3, -a), Point::filled(3, a));
    EXPECT_GT(cube, 2.0 * pi * a * a);
    // Far-field check: a small remote cube is nearly volume / distance.
    const double far = geometry::power_integral_box(Point{0.0, 0.0, 0.0}, 1.0, Point{10.0, 0.0, 0.0},
                                                    Point{10.01, 0.01, 0.01});
    EXPECT_NEAR(far, 1e-6 / 10.005, 1e-12);
}
