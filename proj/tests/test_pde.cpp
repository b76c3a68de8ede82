#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "nlpot/pde.hpp"

using namespace nlpot;
using std::numbers::pi;

namespace {

double total(const ScalarField& density) {
    double s = 0.0;
    for (std::size_t k = 0; k < density.size(); ++k) s += density[k] * density.grid.dual_volume(density.grid.node_index(k));
    return s;
}

double sup_error(const ScalarField& u, double (*exact)(const Point&)) {
    double e = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) e = std::max(e, std::abs(u[k] - exact(u.grid.node(k))));
    return e;
}

double sinsin(const Point& x) { return std::sin(pi * x[0]) * std::sin(pi * x[1]); }
double sin3(const Point& x) { return std::sin(pi * x[0]) * std::sin(pi * x[1]) * std::sin(pi * x[2]); }

ScalarField poisson_rhs(const Grid& g) {
    return ScalarField::sample(g, [](const Point& x) { return 2.0 * pi * pi * sinsin(x); });
}

// -div(|∇u| ∇u) for u = sin3, by central differences of the exact flux.
double p3_rhs(const Point& x) {
    auto flux = [](Point y, int a) {
        const double s0 = std::sin(pi * y[0]), s1 = std::sin(pi * y[1]), s2 = std::sin(pi * y[2]);
        const double g[3] = {pi * std::cos(pi * y[0]) * s1 * s2, pi * s0 * std::cos(pi * y[1]) * s2,
                             pi * s0 * s1 * std::cos(pi * y[2])};
        return std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]) * g[a];
    };
    const double d = 1e-5;
    double div = 0.0;
    for (int a = 0; a < 3; ++a) {
        Point xp = x, xm = x;
        xp[a] += d;
        xm[a] -= d;
        div += (flux(xp, a) - flux(xm, a)) / (2.0 * d);
    }
    return std::max(-div, 0.0);
}

}  // namespace

TEST(Mollify, AtomOnNodeAndAtCellCenter) {
    Grid g = Grid::uniform(Box::unit(2), 4);
    auto onNode = mollify_rhs(RadonMeasure::dirac(g.node(Index{1, 2}), 1.0), g);
    EXPECT_NEAR(onNode.at(Index{1, 2}) * g.cell_volume(), 1.0, 1e-15);
    EXPECT_NEAR(total(onNode), 1.0, 1e-15);
    auto center = mollify_rhs(RadonMeasure::dirac(g.cell_center(Index{1, 1}), 1.0), g);
    for (Index i : {Index{1, 1}, Index{2, 1}, Index{1, 2}, Index{2, 2}})
        EXPECT_NEAR(center.at(i) * g.cell_volume(), 0.25, 1e-15);
    EXPECT_THROW(mollify_rhs(RadonMeasure::dirac(Point{1.5, 0.5}, 1.0), g), InvalidArgument);
}

TEST(Mollify, ConservesMassOnRandomMeasures) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Grid g = Grid::uniform(Box::unit(2), 12);
    Grid layer = Grid::uniform(Box(Point{0.1, 0.2}, Point{0.9, 0.7}), 5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Atom> atoms;
        for (int j = 0; j < 4; ++j) atoms.push_back({Point{u(rng), u(rng)}, u(rng)});
        std::vector<double> rho(layer.cell_count());
        for (auto& v : rho) v = u(rng);
        RadonMeasure m(2, atoms, {GridDensity(layer, rho)});
        const double ref = total_mass(m);
        EXPECT_LT(std::abs(total(mollify_rhs(m, g)) - ref) / ref, 1e-12);
    }
}

TEST(Poisson, ManufacturedSolutionIsSecondOrder) {
    double err[2];
    int k = 0;
    for (int n : {64, 128}) {
        Grid g = Grid::uniform(Box::unit(2), n);
        auto sol = solve_plaplace(PdeProblem::from_density(poisson_rhs(g), 2.0));
        EXPECT_LE(sol.report.residualNorm, 1e-10);
        err[k++] = sup_error(sol.u, sinsin);
        if (n == 128) {
            EXPECT_NEAR(sol.u.at(Index{64, 64}), 1.0, 1e-3);
            EXPECT_LE(err[1], 1e-3);
        }
    }
    EXPECT_NEAR(err[0] / err[1], 4.0, 0.8);
}

TEST(Poisson, ZeroRhsGivesZero) {
    Grid g = Grid::uniform(Box::unit(2), 8);
    auto sol = solve_plaplace(PdeProblem::from_measure(RadonMeasure(2), g, 2.0));
    EXPECT_EQ(sol.u.max(), 0.0);
    EXPECT_EQ(sol.u.min(), 0.0);
}

TEST(Poisson, GreenFunctionRegularPartIsGridStable) {
    // u - (1/2π) ln(1/r) is the bounded regular part; compare it on two grids.
    const Point c{0.5, 0.5};
    auto regular = [&](int n) {
        Grid g = Grid::uniform(Box::unit(2), n);
        auto sol = solve_plaplace(PdeProblem::from_measure(RadonMeasure::dirac(c, 1.0), g, 2.0));
        return sol.u;
    };
    auto coarse = regular(64), fine = regular(128);
    const double h = 1.0 / 64;
    double diff = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < coarse.size(); ++k) {
        const Index i = coarse.grid.node_index(k);
        const Point x = coarse.grid.node(i);
        const double r = distance(x, c);
        if (r < 4 * h || r > 0.25) continue;
        const double green = std::log(1.0 / r) / (2.0 * pi);
        const double vc = coarse[k] - green;
        const double vf = fine.at(Index{2 * i[0], 2 * i[1]}) - green;
        diff = std::max(diff, std::abs(vc - vf));
        scale = std::max(scale, std::abs(vf));
    }
    EXPECT_LT(diff / scale, 0.05);
}

TEST(Poisson, LinearityAndNonnegativity) {
    Grid g = Grid::uniform(Box::unit(2), 24);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto f1 = ScalarField::sample(g, [&](const Point&) { return u(rng); });
    auto f2 = ScalarField::sample(g, [&](const Point&) { return u(rng) * u(rng); });
    PlaplaceSolver solver(g, 2.0);
    auto a = solver.solve(f1).u, b = solver.solve(f2).u;
    auto combo = solver.solve(2.0 * f1 + 3.0 * f2).u;
    EXPECT_LT(max_abs_diff(combo, 2.0 * a + 3.0 * b), 1e-12);
    EXPECT_GE(a.min(), -1e-12);
    EXPECT_GE(b.min(), -1e-12);
}

TEST(PLaplace, ManufacturedSolutionConvergesAtP3) {
    double err[2];
    int k = 0;
    for (int n : {8, 16}) {
        Grid g = Grid::uniform(Box::unit(3), n);
        auto rhs = ScalarField::sample(g, p3_rhs);
        auto sol = solve_plaplace(PdeProblem::from_density(rhs, 3.0), 1e-10);
        err[k++] = sup_error(sol.u, sin3);
        const auto& e = sol.report.energyHistory;
        for (std::size_t j = 1; j < e.size(); ++j) EXPECT_LE(e[j], e[j - 1] + 1e-14 * std::abs(e[j - 1]));
    }
    EXPECT_GT(err[0] / err[1], 2.5);
    EXPECT_LT(err[1], 0.02);
}

TEST(PLaplace, RejectsExponentOutsideRange) {
    EXPECT_THROW(PlaplaceSolver(Grid::uniform(Box::unit(2), 4), 3.0), InvalidArgument);
    EXPECT_THROW(PlaplaceSolver(Grid::uniform(Box::unit(2), 4), 1.5), InvalidArgument);
    Grid g = Grid::uniform(Box::unit(2), 4);
    ScalarField f(g, 1.0);
    f[6] = -1.0;
    EXPECT_THROW(PlaplaceSolver(g, 2.0).solve(f), InvalidArgument);
}

TEST(PLaplace, EpsilonRobustAndNonnegative) {
    Grid g = Grid::uniform(Box::unit(3), 8);
    auto m = RadonMeasure::dirac(Point{0.5, 0.5, 0.5}, 1.0);
    SolveOptions a, b;
    b.eps = 0.5 * a.eps;
    auto ua = PlaplaceSolver(g, 3.0, a).solve(m).u;
    auto ub = PlaplaceSolver(g, 3.0, b).solve(m).u;
    EXPECT_LT(max_abs_diff(ua, ub), 1e-6);
    EXPECT_GE(ua.min(), -1e-12);
}

TEST(Comparison, IdenticalAndDoubledRhs) {
    Grid g = Grid::uniform(Box::unit(2), 16);
    auto rhs = mollify_rhs(RadonMeasure::dirac(Point{0.3, 0.6}, 1.0), g);
    PlaplaceSolver solver(g, 2.0);
    auto u1 = solver.solve(rhs).u;
    auto u1b = solver.solve(rhs).u;
    EXPECT_EQ(u1.values, u1b.values);
    EXPECT_TRUE(check_comparison(u1, u1b, rhs, rhs).passed);
    auto u2 = solver.solve(2.0 * rhs).u;
    EXPECT_LT(max_abs_diff(u2, 2.0 * u1), 1e-12);
    EXPECT_TRUE(check_comparison(u1, u2, rhs, 2.0 * rhs).passed);
    EXPECT_THROW(check_comparison(u2, u1, 2.0 * rhs, rhs), InvalidArgument);
}

TEST(Comparison, RandomNestedRhsAtP3) {
    Grid g = Grid::uniform(Box::unit(3), 8);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PlaplaceSolver solver(g, 3.0);
    for (int trial = 0; trial < 3; ++trial) {
        auto r1 = ScalarField::sample(g, [&](const Point&) { return u(rng); });
        auto r2 = r1;
        for (auto& v : r2.values) v += u(rng) * u(rng);
        auto rep = check_comparison(solver.solve(r1).u, solver.solve(r2).u, r1, r2);
        EXPECT_TRUE(rep.passed) << rep.get("max_violation");
    }
}

TEST(Sandwich, ZeroMeasureUsesConvention) {
    Grid g = Grid::uniform(Box::unit(2), 8);
    auto rep = check_wolff_sandwich(ScalarField(g, 0.0), RadonMeasure(2), 2.0);
    EXPECT_TRUE(rep.passed);
    EXPECT_EQ(rep.get("K1"), 1.0);
}

TEST(Sandwich, DiracFiniteAndScaleInvariantAtP2) {
    Grid g = Grid::uniform(Box::unit(2), 64);
    auto m = RadonMeasure::dirac(Point{0.5, 0.5}, 1.0);
    PlaplaceSolver solver(g, 2.0);
    auto rep = check_wolff_sandwich(solver.solve(m).u, m, 2.0);
    EXPECT_TRUE(rep.passed);
    EXPECT_GT(rep.get("K_lower"), 0.0);
    EXPECT_GT(rep.get("K_upper"), 0.0);
    auto m3 = scaled(m, 3.0);
    auto rep3 = check_wolff_sandwich(solver.solve(m3).u, m3, 2.0);
    EXPECT_NEAR(rep3.get("K1"), rep.get("K1"), 1e-10 * rep.get("K1"));
}
