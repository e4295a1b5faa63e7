#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ldhole/geometry.hpp"
#include "ldhole/primal.hpp"

using namespace ldhole;

namespace {

MatrixCovariance not_equal_cov(double r0 = 0.5, double sigma = 0.8) {
    Eigen::Matrix3d m;
    m << 1, r0, sigma, r0, r0 * r0, r0 * sigma, sigma, r0 * sigma, sigma * sigma + 1;
    return MatrixCovariance(m);
}

PairCollection<MatrixCovariance> not_equal_collection(double r) {
    const auto cov = not_equal_cov();
    return {cov, {{cov.points({0}), cov.points({1})}, {cov.points({0}), cov.points({2})}}, r};
}

// Brute-force min c^T S c over a grid of c with (S c)_1 >= 1, (S c)_2 <= r.
double two_point_grid(double rho0, double r) {
    double best = 1e300;
    for (int i = 0; i <= 2000; ++i)
        for (int j = 0; j <= 2000; ++j) {
            const double c1 = -5 + 0.005 * i, c2 = -5 + 0.005 * j;
            const double w1 = c1 + rho0 * c2, w2 = rho0 * c1 + c2;
            if (w1 >= 1 && w2 <= r) best = std::min(best, c1 * c1 + 2 * rho0 * c1 * c2 + c2 * c2);
        }
    return best;
}

HoleProblem<MatrixCovariance> two_point(double rho0, double r) {
    Eigen::Matrix2d m;
    m << 1, rho0, rho0, 1;
    MatrixCovariance cov(m);
    return {cov, cov.points({0}), cov.points({1}), r};
}

} // namespace

TEST(Primal, SinglePoint) {
    const auto k = IsotropicKernel::squared_exponential();
    HoleProblem<IsotropicKernel> p{k, PointSet{{0.3, 0.2}}, PointSet(2), 0.5};
    const auto s = solve_primal(p);
    ASSERT_EQ(s.status, SolveStatus::optimal);
    EXPECT_NEAR(s.value, 1.0, 1e-12);
    EXPECT_NEAR(s.coefficients(0), 1.0, 1e-12);
    EXPECT_NEAR(witness_eval(k, s, std::vector<double>{0.3, 0.2}), 1.0, 1e-12);
}

TEST(Primal, TwoPointClosedFormAndGrid) {
    const auto s = solve_primal(two_point(0.8, 0.5));
    ASSERT_EQ(s.status, SolveStatus::optimal);
    EXPECT_NEAR(s.value, 1.25, 1e-12);
    // the grid only sees feasible points, so it brackets the optimum from above
    const double grid = two_point_grid(0.8, 0.5);
    EXPECT_GE(grid, 1.25 - 1e-12);
    EXPECT_LE(grid, 1.25 + 1.5e-2);
    EXPECT_GE(s.coefficients(0), 0.0);
    EXPECT_LE(s.coefficients(1), 0.0);
    EXPECT_NEAR(s.witness_at_nodes(0), 1.0, 1e-12);
    EXPECT_NEAR(s.witness_at_nodes(1), 0.5, 1e-12);
}

TEST(Primal, TwoPointInactiveUpperConstraint) {
    // correlation below r: H = X(t1) already satisfies the upper constraint
    const auto s = solve_primal(two_point(0.3, 0.5));
    EXPECT_NEAR(s.value, 1.0, 1e-12);
    EXPECT_NEAR(s.coefficients(1), 0.0, 1e-12);
}

TEST(Primal, TwoPointAgreesWithGridAcrossParameters) {
    for (double rho0 : {-0.5, 0.2, 0.6, 0.9})
        for (double r : {0.1, 0.5, 0.9}) {
            const double closed = (rho0 > r) ? (1 - 2 * r * rho0 + r * r) / (1 - rho0 * rho0) : 1.0;
            EXPECT_NEAR(solve_primal(two_point(rho0, r)).value, closed, 1e-10 * closed);
        }
    const double closed = (1 - 0.12 + 0.01) / 0.64;
    EXPECT_GE(two_point_grid(0.6, 0.1), closed - 1e-12);
    EXPECT_LE(two_point_grid(0.6, 0.1), closed + 2e-2);
}

TEST(Primal, NotEqualExample) {
    const double sigma = 0.8, r0 = 0.5;
    for (double r : {0.1, 0.3, 0.45}) {
        const auto res = rate_over_collection(not_equal_collection(r));
        EXPECT_NEAR(res.value, 1 + (sigma - r) * (sigma - r), 1e-10) << r;
        EXPECT_EQ(res.argmin, 1u);
        EXPECT_EQ(res.solutions[0].status, SolveStatus::infeasible);
    }
    for (double r : {0.5, 0.7, 0.9}) {
        const auto res = rate_over_collection(not_equal_collection(r));
        EXPECT_NEAR(res.value, 1.0, 1e-10) << r;
        EXPECT_EQ(res.argmin, 0u);
    }
    // jump at r0
    const double left = rate_over_collection(not_equal_collection(r0 - 1e-3)).value;
    const double at = rate_over_collection(not_equal_collection(r0)).value;
    EXPECT_GE(left - at, (sigma - r0) * (sigma - r0) - 0.01);
}

TEST(Primal, SinglePairCollectionEqualsSolve) {
    const auto p = two_point(0.8, 0.4);
    PairCollection<MatrixCovariance> c{p.covariance, {{p.k1, p.k2}}, p.r};
    EXPECT_DOUBLE_EQ(rate_over_collection(c).value, solve_primal(p).value);
}

TEST(Primal, AllInfeasibleCollectionIsInfinite) {
    Eigen::Matrix2d m;
    m << 1, 1, 1, 1; // identical variables
    MatrixCovariance cov(m);
    PairCollection<MatrixCovariance> c{cov, {{cov.points({0}), cov.points({1})}}, 0.5};
    const auto res = rate_over_collection(c);
    EXPECT_TRUE(std::isinf(res.value));
}

TEST(Primal, ContradictoryNodeIsInfeasibleAtRBelowOne) {
    const auto k = IsotropicKernel::exponential();
    HoleProblem<IsotropicKernel> p{k, PointSet{{0.0}, {1.0}}, PointSet{{1.0}}, 0.9};
    EXPECT_EQ(solve_primal(p).status, SolveStatus::infeasible);
    p.r = 1.0; // X > u and X < u at one node: the rate is still finite at the closure
    EXPECT_EQ(solve_primal(p).status, SolveStatus::optimal);
}

TEST(Primal, ValidatesInputs) {
    const auto k = IsotropicKernel::exponential();
    HoleProblem<IsotropicKernel> p{k, PointSet(1), PointSet(1), 0.5};
    EXPECT_THROW(solve_primal(p), DomainError);
    p.k1 = PointSet{{0.0}};
    p.r = 1.5;
    EXPECT_THROW(solve_primal(p), DomainError);
    p.r = 0.5;
    p.k2 = PointSet{{0.0, 1.0}};
    EXPECT_THROW(solve_primal(p), DomainError);
}

TEST(Primal, WitnessFeasibleOnRandomInstances) {
    std::mt19937 g(21);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    const auto k = IsotropicKernel::squared_exponential();
    for (int trial = 0; trial < 20; ++trial) {
        PointSet k1(2), k2(2);
        for (int i = 0; i < 12; ++i) k1.push_back({u(g), u(g)});
        for (int i = 0; i < 5; ++i) k2.push_back({0.4 * u(g), 0.4 * u(g)});
        HoleProblem<IsotropicKernel> p{k, k1, k2, 0.6};
        const auto s = solve_primal(p);
        ASSERT_EQ(s.status, SolveStatus::optimal);
        for (std::size_t i = 0; i < k1.size(); ++i) EXPECT_GE(witness_eval(k, s, k1[i]), 1 - 1e-6);
        for (std::size_t i = 0; i < k2.size(); ++i) EXPECT_LE(witness_eval(k, s, k2[i]), 0.6 + 1e-6);
        const auto sig = gram(k, s.nodes);
        EXPECT_NEAR(s.coefficients.dot(sig.entries * s.coefficients), s.value, 1e-8 * s.value);
    }
}

TEST(Primal, EmptyK2MatchesEnergyMinimum) {
    // uniform measure on the circle is optimal, so D = 1 / D(rho)
    const auto k = IsotropicKernel::squared_exponential();
    const auto grid = sphere_grid(2, 1.0, 64);
    HoleProblem<IsotropicKernel> p{k, grid.measure.support(), PointSet(2), 0.5};
    const double d = double_integral(k, grid.measure, grid.measure);
    EXPECT_NEAR(solve_primal(p).value, 1.0 / d, 1e-8 / d);
}
