#include <cmath>

#include <gtest/gtest.h>

#include "ldhole/kernels.hpp"

using namespace ldhole;

TEST(Kernels, EvalClosedForms) {
    EXPECT_DOUBLE_EQ(IsotropicKernel::squared_exponential().eval(0.0), 1.0);
    EXPECT_NEAR(IsotropicKernel::exponential(1.0).eval(std::log(2.0)), 0.5, 1e-15);
    EXPECT_NEAR(IsotropicKernel::squared_exponential().eval(1.0), 0.36787944117144233, 1e-15);
    EXPECT_DOUBLE_EQ(IsotropicKernel::exponential(2.0, 3.0).eval(0.0), 3.0);
}

TEST(Kernels, NegativeDistanceIsDomainError) {
    EXPECT_THROW(IsotropicKernel::exponential().eval(-1e-9), DomainError);
    EXPECT_THROW(IsotropicKernel::exponential(-1.0), DomainError);
    EXPECT_THROW(IsotropicKernel::squared_exponential(1.0, 0.0), DomainError);
}

TEST(Kernels, MonotoneAndBoundedOnGrid) {
    for (const auto& k : {IsotropicKernel::squared_exponential(1.3, 2.0), IsotropicKernel::exponential(0.7, 2.0),
                          IsotropicKernel::tabulated({0.0, 0.5, 1.0, 3.0}, {1.0, 0.6, 0.5, 0.0})}) {
        double prev = k.eval(0.0);
        EXPECT_GT(prev, 0.0);
        for (int i = 1; i <= 2000; ++i) {
            const double v = k.eval(0.0025 * i);
            EXPECT_LE(v, prev + 1e-15) << k.name() << " at " << 0.0025 * i;
            EXPECT_GE(v, 0.0);
            prev = v;
        }
    }
}

TEST(Kernels, TabulatedInterpolatesSamplesAndHoldsTail) {
    const auto k = IsotropicKernel::tabulated({0.0, 1.0, 2.0}, {2.0, 1.0, 0.25});
    EXPECT_DOUBLE_EQ(k.variance(), 2.0);
    EXPECT_DOUBLE_EQ(k.eval(1.0), 1.0);
    EXPECT_DOUBLE_EQ(k.eval(2.0), 0.25);
    EXPECT_DOUBLE_EQ(k.eval(10.0), 0.25);
    EXPECT_THROW(IsotropicKernel::tabulated({0.0, 1.0, 1.0}, {1.0, 0.5, 0.2}), DomainError);
    EXPECT_THROW(IsotropicKernel::tabulated({0.1, 1.0}, {1.0, 0.5}), DomainError);
    EXPECT_THROW(IsotropicKernel::tabulated({0.0, 1.0}, {1.0, 1.5}), DomainError);
}

TEST(Kernels, GramExamples) {
    const auto se = IsotropicKernel::squared_exponential();
    const auto one = gram(se, PointSet{{0.3, 0.4}});
    ASSERT_EQ(one.entries.rows(), 1);
    EXPECT_DOUBLE_EQ(one.entries(0, 0), 1.0);

    const auto twin = gram(se, PointSet{{1.0, 1.0}, {1.0, 1.0}});
    EXPECT_TRUE(twin.entries.isApprox(Eigen::MatrixXd::Ones(2, 2)));

    const auto ex = gram(IsotropicKernel::exponential(), PointSet{{0.0}, {1.0}});
    EXPECT_DOUBLE_EQ(ex.entries(0, 1), std::exp(-1.0));
    EXPECT_DOUBLE_EQ(ex.entries(1, 0), std::exp(-1.0));
    EXPECT_DOUBLE_EQ(ex.entries(1, 1), 1.0);

    EXPECT_THROW(gram(se, PointSet(2)), DomainError);
}

TEST(Kernels, GramRejectsIndefiniteMatrix) {
    MatrixCovariance bad(Eigen::Matrix2d{{1.0, 2.0}, {2.0, 1.0}});
    EXPECT_THROW(gram(bad, bad.points({0, 1})), NumericalError);
}

TEST(Kernels, GramSymmetricPsdOnRandomSets) {
    std::srand(7);
    for (int trial = 0; trial < 20; ++trial) {
        PointSet pts(2);
        const int n = 5 + trial * 3;
        for (int i = 0; i < n; ++i)
            pts.push_back({3.0 * std::rand() / RAND_MAX, 3.0 * std::rand() / RAND_MAX});
        for (const auto& k : {IsotropicKernel::squared_exponential(), IsotropicKernel::exponential()}) {
            const auto g = gram(k, pts);
            EXPECT_EQ((g.entries - g.entries.transpose()).norm(), 0.0);
            EXPECT_TRUE((g.entries.diagonal().array() == k.variance()).all());
            // pivoted LDL^T: D must be nonnegative up to the PSD tolerance
            Eigen::LDLT<Eigen::MatrixXd> ldlt(g.entries);
            EXPECT_GE(ldlt.vectorD().minCoeff(), -kPsdTolerance * g.entries.norm());
        }
    }
}

TEST(Kernels, SpectralFactorReproducesMatrix) {
    PointSet pts(1);
    for (int i = 0; i < 30; ++i) pts.push_back({0.05 * i});
    const auto g = gram(IsotropicKernel::squared_exponential(), pts);
    const Eigen::MatrixXd f = spectral_factor(g.entries);
    EXPECT_LT(f.cols(), 30); // numerically rank deficient
    EXPECT_LT((f * f.transpose() - g.entries).cwiseAbs().maxCoeff(), 1e-10);
    const Eigen::MatrixXd l = cholesky_with_jitter(g.entries);
    EXPECT_LT((l * l.transpose() - g.entries).cwiseAbs().maxCoeff(), 1e-8);
}
