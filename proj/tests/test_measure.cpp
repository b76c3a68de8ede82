#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "nlpot/measure.hpp"

using namespace nlpot;
using std::numbers::pi;

namespace {

GridDensity constant_density(const Box& box, int cells, double rho) {
    Grid g = Grid::uniform(box, cells);
    return GridDensity(g, std::vector<double>(g.cell_count(), rho));
}

}  // namespace

TEST(BallMass, ClosedBallIncludesAtomOnBoundary) {
    auto m = RadonMeasure::dirac(Point{0.0, 0.0}, 2.0);
    EXPECT_EQ(ball_mass(m, Point{0.5, 0.0}, 0.5), 2.0);
    EXPECT_EQ(ball_mass(m, Point{0.5, 0.0}, 0.49), 0.0);
    EXPECT_EQ(ball_mass(m, Point{0.0, 0.0}, 0.0), 2.0);
}

TEST(BallMass, UniformDensityMatchesDiskArea) {
    auto m = RadonMeasure::density(constant_density(Box::unit(2), 64, 1.0));
    EXPECT_NEAR(ball_mass(m, Point{0.5, 0.5}, 0.1), pi * 0.01, 1e-12);
    auto coarse = RadonMeasure::uniform(Box::unit(2), 1.0);
    EXPECT_NEAR(ball_mass(coarse, Point{0.5, 0.5}, 0.1), pi * 0.01, 1e-12);
}

TEST(BallMass, RejectsNegativeRadius) {
    auto m = RadonMeasure::dirac(Point{0.0, 0.0}, 1.0);
    EXPECT_THROW(ball_mass(m, Point{0.0, 0.0}, -1.0), InvalidArgument);
}

TEST(BallMass, MonotoneInRadiusOnRandomMeasures) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Grid g = Grid::uniform(Box::unit(2), 16);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> rho(g.cell_count());
        for (auto& v : rho) v = u(rng);
        std::vector<Atom> atoms;
        for (int j = 0; j < 5; ++j) atoms.push_back({Point{u(rng), u(rng)}, u(rng)});
        RadonMeasure m(2, atoms, {GridDensity(g, rho)});
        const Point x{u(rng), u(rng)};
        double prev = 0.0;
        for (int k = 0; k <= 200; ++k) {
            const double r = 1.5 * k / 200.0;
            const double b = ball_mass(m, x, r);
            EXPECT_GE(b, prev - 1e-14);
            prev = b;
        }
        EXPECT_NEAR(prev, total_mass(m), 1e-12 * total_mass(m));
    }
}

TEST(BallMass, AdditiveOverSums) {
    Grid g = Grid::uniform(Box::unit(2), 8);
    std::vector<double> rho(g.cell_count());
    for (std::size_t k = 0; k < rho.size(); ++k) rho[k] = 0.1 * (k % 7);
    auto a = RadonMeasure(2, {Atom{Point{0.3, 0.3}, 0.4}}, {GridDensity(g, rho)});
    auto b = RadonMeasure(2, {Atom{Point{0.6, 0.2}, 0.7}}, {constant_density(Box::unit(2), 8, 0.5)});
    auto s = sum(a, b);
    EXPECT_EQ(s.layers().size(), 1u);
    for (double r : {0.05, 0.2, 0.37, 0.8}) {
        const Point x{0.45, 0.4};
        EXPECT_NEAR(ball_mass(s, x, r), ball_mass(a, x, r) + ball_mass(b, x, r), 1e-13);
    }
}

TEST(TotalMass, AtomsAndDensity) {
    RadonMeasure two(2, {Atom{Point{0.1, 0.1}, 0.3}, Atom{Point{0.2, 0.1}, 0.7}}, {});
    EXPECT_DOUBLE_EQ(total_mass(two), 1.0);
    EXPECT_EQ(total_mass(RadonMeasure(2)), 0.0);
    RadonMeasure mixed(2, {Atom{Point{0.5, 0.5}, 0.5}}, {constant_density(Box::unit(2), 10, 2.0)});
    EXPECT_NEAR(total_mass(mixed), 2.5, 1e-14);
}

TEST(Construction, RejectsNegativeMassAndDensity) {
    EXPECT_THROW(RadonMeasure::dirac(Point{0.0, 0.0}, -1.0), InvalidArgument);
    Grid g = Grid::uniform(Box::unit(2), 2);
    EXPECT_THROW(GridDensity(g, {1.0, -1.0, 1.0, 1.0}), InvalidArgument);
    EXPECT_THROW(Point(5), InvalidArgument);
}

TEST(MakeBarMu, ZeroScaleIsIdentity) {
    auto m = RadonMeasure::dirac(Point{0.5, 0.5}, 0.3);
    auto b = make_bar_mu(m, 0.0, Box::unit(2));
    EXPECT_EQ(total_mass(b), 0.3);
    EXPECT_TRUE(b.layers().empty());
}

TEST(MakeBarMu, LebesguePartIsVolumeFraction) {
    auto b = make_bar_mu(RadonMeasure(2), 1.0, Box::unit(2));
    const double ref = 1.0 / (pi * 200.0);  // |[0,1]^2| / |B_{10√2}|
    EXPECT_NEAR(total_mass(b), ref, 1e-15);
}

TEST(MakeBarMu, ScaledDiracStaysBelowTwiceScale) {
    const double M = 0.37;
    auto b = make_bar_mu(RadonMeasure::dirac(Point{0.5, 0.5}, M), M, Box::unit(2));
    EXPECT_LE(total_mass(b), 2.0 * M);
    EXPECT_THROW(make_bar_mu(RadonMeasure(2), -1.0, Box::unit(2)), InvalidArgument);
}

TEST(Restrict, DropsOutsideAtomsAndCutsDensity) {
    const Box half(Point{0.0, 0.0}, Point{0.5, 0.5});
    EXPECT_EQ(restrict(RadonMeasure::dirac(Point{0.2, 0.2}, 1.0), half).atoms().size(), 1u);
    EXPECT_TRUE(restrict(RadonMeasure::dirac(Point{0.8, 0.8}, 1.0), half).empty());
    auto u = RadonMeasure::density(constant_density(Box::unit(2), 10, 1.0));
    EXPECT_NEAR(total_mass(restrict(u, half)), 0.25, 1e-14);
    auto coarse = RadonMeasure::uniform(Box::unit(2), 1.0);
    EXPECT_NEAR(total_mass(restrict(coarse, half)), 0.25, 1e-14);
    EXPECT_LE(total_mass(restrict(u, Box(Point{0.1, 0.3}, Point{0.77, 0.9}))), total_mass(u));
}
