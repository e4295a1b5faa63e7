#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ldhole/dual.hpp"
#include "oracles.hpp"

using namespace ldhole;

namespace {

MatrixCovariance corr2(double rho0) {
    Eigen::Matrix2d m;
    m << 1, rho0, rho0, 1;
    return MatrixCovariance(m);
}

// unit circle of radius rho with n nodes plus the center as K2
struct SphereCenter {
    PointSet k1, k2{PointSet{{0.0, 0.0}}};
};

SphereCenter sphere_center(double rho, int n) { return {sphere_grid(2, rho, n).measure.support()}; }

} // namespace

TEST(AbFunctionals, SamePointMassIsDegenerate) {
    const auto cov = corr2(0.8);
    const auto mu = DiscreteMeasure::point_mass(cov.points({0}), 0);
    const auto v = ab_functionals(cov, mu, mu, 1.0);
    EXPECT_NEAR(v.A, 0.0, 1e-15);
    EXPECT_NEAR(v.B, 0.0, 1e-15);
    EXPECT_TRUE(v.degenerate);
    EXPECT_TRUE(cond1_holds(cov, mu, mu, 1.0));
}

TEST(AbFunctionals, SingletonPair) {
    const auto cov = corr2(0.8);
    const auto mu1 = DiscreteMeasure::point_mass(cov.points({0}), 0);
    const auto mu2 = DiscreteMeasure::point_mass(cov.points({1}), 0);
    const auto v = ab_functionals(cov, mu1, mu2, 0.5);
    EXPECT_NEAR(v.abc.a, 1.0, 1e-15);
    EXPECT_NEAR(v.abc.b, 0.8, 1e-15);
    EXPECT_NEAR(v.abc.c, 1.0, 1e-15);
    EXPECT_NEAR(v.A, 0.36, 1e-14);
    EXPECT_NEAR(v.B, 0.45, 1e-14);
    EXPECT_FALSE(v.degenerate);
    EXPECT_TRUE(cond1_holds(cov, mu1, mu2, 0.5));
    EXPECT_FALSE(cond1_holds(corr2(0.3), mu1, DiscreteMeasure::point_mass(corr2(0.3).points({1}), 0), 0.5));
}

TEST(AbFunctionals, OrnsteinUhlenbeckLine) {
    const auto k = IsotropicKernel::exponential();
    const auto g = sphere_grid(1, 0.7, 1);
    const auto v = ab_functionals(k, g.measure, g.measure, 0.5);
    EXPECT_NEAR(v.abc.a, (1 + std::exp(-1.4)) / 2, 1e-15);
}

TEST(AbFunctionals, CauchySchwarzOnRandomMeasures) {
    std::mt19937 gen(4);
    std::uniform_real_distribution<double> u(-2, 2), w(0, 1);
    const auto k = IsotropicKernel::exponential(0.7);
    for (int trial = 0; trial < 50; ++trial) {
        PointSet p1(2), p2(2);
        Eigen::VectorXd w1(6), w2(4);
        for (int i = 0; i < 6; ++i) { p1.push_back({u(gen), u(gen)}); w1(i) = w(gen); }
        for (int i = 0; i < 4; ++i) { p2.push_back({u(gen), u(gen)}); w2(i) = w(gen); }
        const auto v = ab_functionals(k, DiscreteMeasure::normalized(p1, w1), DiscreteMeasure::normalized(p2, w2), 0.5);
        EXPECT_LE(v.abc.b * v.abc.b, v.abc.a * v.abc.c + 1e-10);
        EXPECT_GE(v.A, -1e-12);
        EXPECT_GE(v.B, -1e-12);
    }
}

TEST(SepSolve, FirstBranch) {
    const auto s = sep_solve(1, 0.3, 1, 0.5);
    EXPECT_FALSE(s.second_branch);
    EXPECT_DOUBLE_EQ(s.value, 1.0);
    EXPECT_DOUBLE_EQ(s.m1, 1.0);
    EXPECT_DOUBLE_EQ(s.m2, 0.0);
}

TEST(SepSolve, SecondBranchAndGrid) {
    const auto s = sep_solve(1, 0.8, 1, 0.5);
    EXPECT_TRUE(s.second_branch);
    EXPECT_NEAR(s.value, std::sqrt(1.25), 1e-15);
    EXPECT_GT(s.m1, 0.0);
    EXPECT_GT(s.m2, 0.0);
    EXPECT_NEAR(s.m1 / s.m2, (0.5 * 0.8 - 1) / (0.5 - 0.8), 1e-13);
    EXPECT_NEAR(s.m1 * s.m1 - 1.6 * s.m1 * s.m2 + s.m2 * s.m2, 1.0, 1e-13);
    EXPECT_NEAR(s.m1 - 0.5 * s.m2, s.value, 1e-13);
    EXPECT_NEAR(oracle::sep_grid(1, 0.8, 1, 0.5), s.value, 2e-3);
}

TEST(SepSolve, RandomAgainstBruteForce) {
    std::mt19937 gen(12);
    std::uniform_real_distribution<double> pos(0.1, 2.0), corr(-0.995, 0.995), rr(0.05, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double a = pos(gen), c = pos(gen), b = corr(gen) * std::sqrt(a * c), r = rr(gen);
        const auto s = sep_solve(a, b, c, r);
        EXPECT_NEAR(s.value, oracle::sep_scan(a, b, c, r), 2e-3) << a << ' ' << b << ' ' << c << ' ' << r;
        // the second-branch expression never undercuts the first
        if (a * c > b * b) {
            EXPECT_GE(std::sqrt((c + r * r * a - 2 * r * b) / (a * c - b * b)), 1 / std::sqrt(a) - 1e-12);
        }
    }
}

TEST(SepSolve, BranchSplitIsExact) {
    const double a = 1.3, c = 0.9, r = 0.6;
    const double b = r * a;
    EXPECT_FALSE(sep_solve(a, b, c, r).second_branch);
    EXPECT_TRUE(sep_solve(a, std::nextafter(b, 1.0), c, r).second_branch);
    // both formulas agree at the split
    EXPECT_NEAR(std::sqrt((c + r * r * a - 2 * r * b) / (a * c - b * b)), 1 / std::sqrt(a), 1e-14);
}

TEST(SepSolve, DegenerateAndErrors) {
    EXPECT_TRUE(sep_solve(0, 0, 1, 0.5).degenerate);
    EXPECT_TRUE(std::isinf(sep_solve(0, 0, 1, 0.5).value));
    EXPECT_TRUE(sep_solve(1, 1, 1, 0.5).degenerate);
    EXPECT_THROW(sep_solve(-1, 0, 1, 0.5), DomainError);
    EXPECT_THROW(sep_solve(1, 2, 1, 0.5), DomainError);
    EXPECT_THROW(sep_solve(1, 0, 1, 0.0), DomainError);
}

TEST(DualValue, SingletonPairMatchesPrimal) {
    const auto v = dual_value(AbcCoefficients{1, 0.8, 1}, 0.5);
    EXPECT_TRUE(v.cond1);
    EXPECT_NEAR(v.value, 0.8, 1e-15);
    EXPECT_NEAR(1 / v.value, oracle::two_point_rate(0.8, 0.5), 1e-14);
    const auto w = dual_value(AbcCoefficients{1, 0.3, 1}, 0.5);
    EXPECT_FALSE(w.cond1);
    EXPECT_DOUBLE_EQ(w.value, 1.0);
}

TEST(DualValue, UniformCircleReproducesClosedForm) {
    const auto k = IsotropicKernel::squared_exponential();
    const double rho = 1.0, r = 0.5;
    const auto sc = sphere_center(rho, 256);
    const auto v = dual_value(k, DiscreteMeasure::uniform(sc.k1), DiscreteMeasure::uniform(sc.k2), r);
    const double w = oracle::sphere_center_w(oracle::se_circle_energy(rho), std::exp(-rho * rho), r);
    EXPECT_NEAR(v.value, w, 1e-10);
}

TEST(DualOptimize, NotEqualPair) {
    const MatrixCovariance cov(oracle::not_equal_matrix());
    const auto res = dual_optimize(cov, cov.points({0}), cov.points({2}), 0.3);
    EXPECT_NEAR(res.D, 1.25, 1e-8);
    EXPECT_EQ(res.governing, DualCase::second);
    const auto primal = solve_primal(HoleProblem<MatrixCovariance>{cov, cov.points({0}), cov.points({2}), 0.3});
    EXPECT_LT(duality_gap(res, primal), 1e-8);
}

TEST(DualOptimize, NotEqualInfeasiblePair) {
    const MatrixCovariance cov(oracle::not_equal_matrix());
    const auto res = dual_optimize(cov, cov.points({0}), cov.points({1}), 0.3);
    EXPECT_TRUE(std::isinf(res.D));
}

TEST(DualOptimize, EmptyK2) {
    const auto k = IsotropicKernel::squared_exponential();
    const auto sc = sphere_center(1.0, 64);
    const auto res = dual_optimize(k, sc.k1, PointSet(2), 0.5);
    EXPECT_NEAR(res.D, 1 / oracle::se_circle_energy(1.0), 1e-8);
    EXPECT_EQ(res.governing, DualCase::first);
}

TEST(DualOptimize, SphereCenterMatchesClosedForm) {
    const auto k = IsotropicKernel::squared_exponential();
    for (double rho : {0.5, 1.0, 2.0}) {
        const auto sc = sphere_center(rho, 64);
        const auto res = dual_optimize(k, sc.k1, sc.k2, 0.5);
        const double w = oracle::sphere_center_w(oracle::se_circle_energy(rho), std::exp(-rho * rho), 0.5);
        EXPECT_NEAR(res.D * w, 1.0, 1e-5) << rho;
    }
}

TEST(DualOptimize, StrongDualityOnRandomInstances) {
    std::mt19937 gen(31);
    std::uniform_real_distribution<double> u(-1, 1), rr(0.2, 0.9);
    const auto k = IsotropicKernel::squared_exponential(1.3);
    for (int trial = 0; trial < 15; ++trial) {
        PointSet k1(2), k2(2);
        for (int i = 0; i < 10 + trial; ++i) k1.push_back({2 * u(gen), 2 * u(gen)});
        for (int i = 0; i < 10 + trial % 5; ++i) k2.push_back({0.6 * u(gen), 0.6 * u(gen)});
        const double r = rr(gen);
        const auto primal = solve_primal(HoleProblem<IsotropicKernel>{k, k1, k2, r});
        const auto dual = dual_optimize(k, k1, k2, r);
        EXPECT_LT(duality_gap(dual, primal), 1e-4) << trial << " primal " << primal.value << " dual " << dual.D;
    }
}

TEST(DualOptimize, WeakDualityForRandomCandidates) {
    std::mt19937 gen(8);
    std::uniform_real_distribution<double> u(-1, 1), w(0, 1);
    const auto k = IsotropicKernel::exponential();
    PointSet k1(2), k2(2);
    for (int i = 0; i < 12; ++i) k1.push_back({2 * u(gen), 2 * u(gen)});
    for (int i = 0; i < 5; ++i) k2.push_back({0.5 * u(gen), 0.5 * u(gen)});
    const double r = 0.6;
    const double primal = solve_primal(HoleProblem<IsotropicKernel>{k, k1, k2, r}).value;
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd w1(12), w2(5);
        for (auto& x : w1) x = std::pow(w(gen), 3);
        for (auto& x : w2) x = std::pow(w(gen), 3);
        const auto v = dual_value(k, DiscreteMeasure::normalized(k1, w1), DiscreteMeasure::normalized(k2, w2), r);
        EXPECT_LE(1 / v.value, primal + 1e-8);
    }
}

TEST(FirstOrder, UniformCircleIsOptimal) {
    const auto k = IsotropicKernel::squared_exponential();
    const auto g = sphere_grid(2, 1.2, 128);
    const auto chk = check_first_order(k, g.measure);
    EXPECT_TRUE(chk.is_optimal);
    EXPECT_LT(chk.slack.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FirstOrder, PointMassOnTwoPointsIsNot) {
    Eigen::Matrix2d m;
    m << 1, 0.5, 0.5, 1;
    const MatrixCovariance cov(m);
    const auto mu = DiscreteMeasure::point_mass(cov.points({0, 1}), 0);
    const auto chk = check_first_order(cov, mu);
    EXPECT_FALSE(chk.is_optimal);
    EXPECT_NEAR(chk.slack(1), -0.5, 1e-15);
    EXPECT_NEAR(chk.slack(0), 0.0, 1e-15);
    EXPECT_TRUE(check_first_order(cov, DiscreteMeasure::uniform(cov.points({0, 1}))).is_optimal);
    EXPECT_NEAR(check_first_order(cov, DiscreteMeasure::uniform(cov.points({0, 1}))).energy, 0.75, 1e-15);
}

TEST(FirstOrder, Singleton) {
    const auto k = IsotropicKernel::exponential();
    EXPECT_TRUE(check_first_order(k, DiscreteMeasure::uniform(PointSet{{1.0, 2.0}})).is_optimal);
}

TEST(FirstOrder, QpOptimumPassesCheck) {
    std::mt19937 gen(2);
    std::uniform_real_distribution<double> u(-2, 2);
    const auto k = IsotropicKernel::exponential();
    PointSet k1(2);
    for (int i = 0; i < 30; ++i) k1.push_back({u(gen), u(gen)});
    const auto res = dual_optimize(k, k1, PointSet(2), 0.5);
    EXPECT_TRUE(check_first_order(k, res.mu_first).is_optimal);
}

TEST(NecCond2, UniformCircleWithCenterPasses) {
    const auto k = IsotropicKernel::squared_exponential();
    const double rho = 1.0, r = 0.5; // R(1) > r D(1)
    const auto g = sphere_grid(2, rho, 128);
    const std::vector<double> center{0.0, 0.0};
    const auto chk = check_nec_cond2(k, g.measure, center, r);
    EXPECT_EQ(chk.status, NecStatus::passes);
    EXPECT_LT(chk.max_violation, 1e-10);
}

TEST(NecCond2, PerturbedMeasureFails) {
    const auto k = IsotropicKernel::squared_exponential();
    const auto g = sphere_grid(2, 1.0, 32);
    Eigen::VectorXd w = g.measure.weights();
    w(0) += 0.1;
    const auto mu = DiscreteMeasure::normalized(g.measure.support(), w);
    const std::vector<double> center{0.0, 0.0};
    const auto chk = check_nec_cond2(k, mu, center, 0.5);
    EXPECT_EQ(chk.status, NecStatus::fails);
    EXPECT_GT(chk.max_violation, 1e-4);
}

TEST(NecCond2, SingletonPassesAndInconclusiveCases) {
    const auto k = IsotropicKernel::squared_exponential();
    const auto mu = DiscreteMeasure::uniform(PointSet{{0.5, 0.0}});
    const std::vector<double> b{0.0, 0.0};
    EXPECT_EQ(check_nec_cond2(k, mu, b, 0.5).status, NecStatus::passes);
    // R(rho) <= r D(rho): the constraint is not strict
    const auto far = sphere_grid(2, 3.0, 32);
    EXPECT_EQ(check_nec_cond2(k, far.measure, b, 0.5).status, NecStatus::inconclusive);
}
