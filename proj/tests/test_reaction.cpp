#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <random>

#include "nlpot/reaction.hpp"

using namespace nlpot;
using namespace nlpot::reaction;
using Big = boost::multiprecision::cpp_dec_float_50;

namespace {

// Tail Σ_{j>=l} r^j/j! in 50-digit arithmetic.
double oracle(int l, double r) {
    Big x(r), term(1), sum(0);
    for (int j = 1; j <= l; ++j) term *= x / j;
    for (int j = l; j < 400; ++j) {
        sum += term;
        term *= x / (j + 1);
    }
    return static_cast<double>(sum);
}

}  // namespace

TEST(HL, ClosedFormValues) {
    EXPECT_EQ(h_l(ReactionParams(1), 0.0), 0.0);
    EXPECT_NEAR(h_l(ReactionParams(2), 1.0), std::exp(1.0) - 2.0, 1e-15);
    EXPECT_NEAR(h_l(ReactionParams(3), 0.01), 1.6708416805754e-7, 1e-19);
    const double v = h_l(ReactionParams(4), 30.0);
    EXPECT_NEAR(v / (std::exp(30.0) - 4981.0), 1.0, 1e-14);
}

TEST(HL, MatchesHighPrecisionOracle) {
    for (int l = 1; l <= 8; ++l)
        for (int k = 0; k <= 300; ++k) {
            const double r = 30.0 * k / 300.0;
            const double ref = oracle(l, r);
            const double got = h_l(ReactionParams(l), r);
            if (ref == 0.0) {
                EXPECT_EQ(got, 0.0);
            } else {
                EXPECT_LT(std::abs(got - ref) / ref, 1e-12) << "l=" << l << " r=" << r;
            }
        }
}

TEST(HL, RejectsNegativeArgumentAndMapsInfinity) {
    EXPECT_THROW(h_l(ReactionParams(2), -0.1), InvalidArgument);
    EXPECT_EQ(h_l(ReactionParams(2), kInf), kInf);
    EXPECT_THROW(ReactionParams(0), InvalidArgument);
}

TEST(HL, BoundsAndOrderingInCutoff) {
    for (int l = 1; l <= 10; ++l)
        for (double r = 0.0; r <= 40.0; r += 0.37) {
            const double h = h_l(ReactionParams(l), r);
            EXPECT_LE(h, std::exp(r) * (1 + 1e-15));
            EXPECT_GE(h, std::pow(r, l) / std::tgamma(l + 1.0) * (1 - 1e-14));
            EXPECT_LE(h_l(ReactionParams(l + 1), r), h * (1 + 1e-15));
        }
}

TEST(HL, MonotoneAndConvex) {
    for (int l = 1; l <= 6; ++l) {
        const ReactionParams p(l);
        const double d = 0.01;
        for (double r = d; r < 20.0; r += 0.1) {
            const double a = h_l(p, r - d), b = h_l(p, r), c = h_l(p, r + d);
            EXPECT_LE(a, b);
            EXPECT_GE(a + c - 2.0 * b, -1e-12 * c);
        }
    }
}

TEST(HL, BranchesAgreeOnOverlapWindow) {
    for (int l = 1; l <= 10; ++l)
        for (int k = 0; k <= 100; ++k) {
            const double r = 0.5 * l + 1.5 * l * k / 100.0;
            const double a = h_l_series(l, r), b = h_l_subtract(l, r);
            EXPECT_LT(std::abs(a - b) / a, 1e-10) << "l=" << l << " r=" << r;
        }
}

TEST(HLApplied, NodewiseAndPreservesGrid) {
    Grid g = Grid::uniform(Box::unit(2), 4);
    EXPECT_EQ(h_l_applied(ReactionParams(2), ScalarField(g, 0.0)).max(), 0.0);
    auto ones = h_l_applied(ReactionParams(2), ScalarField(g, 1.0));
    EXPECT_EQ(ones.grid, g);
    for (double v : ones.values) EXPECT_NEAR(v, std::exp(1.0) - 2.0, 1e-15);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 25.0);
    ScalarField f = ScalarField::sample(g, [&](const Point&) { return u(rng); });
    f[7] = kInf;
    auto h = h_l_applied(ReactionParams(3), f);
    for (std::size_t k = 0; k < f.size(); ++k)
        if (std::isfinite(f[k])) {
            EXPECT_NEAR(h[k], oracle(3, f[k]), 1e-12 * oracle(3, f[k]));
        } else {
            EXPECT_EQ(h[k], kInf);
        }
}

TEST(ThetaScaling, Examples) {
    auto one = check_theta_scaling(ReactionParams(3), 1.0, 2.5);
    EXPECT_TRUE(one.holds);
    EXPECT_NEAR(one.ratio, 1.0, 1e-14);
    auto half = check_theta_scaling(ReactionParams(2), 0.5, 1.0);
    EXPECT_TRUE(half.holds);
    EXPECT_NEAR(half.ratio, (std::exp(2.0) - 3.0) / (4.0 * (std::exp(1.0) - 2.0)), 1e-13);
    auto zero = check_theta_scaling(ReactionParams(2), 0.1, 0.0);
    EXPECT_TRUE(zero.holds);
    EXPECT_THROW(check_theta_scaling(ReactionParams(2), 0.0, 1.0), InvalidArgument);
}

TEST(ThetaScaling, HoldsOnRandomTriples) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> th(0.0, 1.0), tt(0.0, 50.0);
    std::uniform_int_distribution<int> ll(1, 10);
    int violations = 0;
    for (int i = 0; i < 100000; ++i) {
        const double theta = 1.0 - th(rng);  // (0, 1]
        if (!check_theta_scaling(ReactionParams(ll(rng)), theta, tt(rng)).holds) ++violations;
    }
    EXPECT_EQ(violations, 0);
}
