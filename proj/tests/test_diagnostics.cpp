#include "gpmcmc/diagnostics.hpp"
#include "gpmcmc/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gpmcmc;

namespace {

Matrix iid_normal(Eigen::Index n, Eigen::Index dim, Rng& rng) {
    return Matrix::NullaryExpr(n, dim, [&] { return standard_normal(rng); });
}

Vector ar1(Eigen::Index n, double rho, Rng& rng) {
    Vector x(n);
    x[0] = standard_normal(rng) / std::sqrt(1.0 - rho * rho);
    for (Eigen::Index t = 1; t < n; ++t) x[t] = rho * x[t - 1] + standard_normal(rng);
    return x;
}

}  // namespace

TEST(Geweke, IidChainsRarelyExceedThree) {
    int within = 0;
    for (int seed = 0; seed < 100; ++seed) {
        Rng rng = make_stream(1000, static_cast<std::uint64_t>(seed));
        within += std::abs(geweke(iid_normal(10000, 1, rng))[0]) < 3.0 ? 1 : 0;
    }
    EXPECT_GE(within, 99);
}

TEST(Geweke, DetectsShiftedStart) {
    Rng rng(2);
    Matrix chain = iid_normal(10000, 1, rng);
    chain.topRows(1000).array() += 5.0;
    EXPECT_GT(std::abs(geweke(chain)[0]), 10.0);
}

TEST(Geweke, ConstantChainIsZero) {
    EXPECT_EQ(geweke(Matrix::Constant(500, 2, 0.3)), Vector::Zero(2));
    EXPECT_THROW(geweke(Matrix::Zero(50, 1)), ConfigError);
}

TEST(GelmanRubin, IdenticalChainsGiveOne) {
    // Each half holds the same values, so B = 0 and the raw formula is sqrt((n-1)/n) < 1.
    Matrix c(600, 1);
    for (Eigen::Index i = 0; i < 600; ++i) c(i, 0) = static_cast<double>(i % 3);
    const std::vector<Matrix> chains(4, c);
    EXPECT_EQ(gelman_rubin(chains)[0], 1.0);
}

TEST(GelmanRubin, IidChainsNearOne) {
    Rng rng(3);
    std::vector<Matrix> chains;
    for (int c = 0; c < 4; ++c) chains.push_back(iid_normal(10000, 2, rng));
    const Vector r = gelman_rubin(chains);
    EXPECT_LT(r.maxCoeff(), 1.05);
    EXPECT_GE(r.minCoeff(), 1.0 - 1e-6);
}

TEST(GelmanRubin, DistinctConstantsDiverge) {
    std::vector<Matrix> chains;
    for (int c = 0; c < 4; ++c) chains.push_back(Matrix::Constant(100, 1, c));
    EXPECT_GT(gelman_rubin(chains)[0], 1.1);
    Rng rng(4);
    std::vector<Matrix> shifted;
    for (int c = 0; c < 4; ++c) shifted.push_back((iid_normal(1000, 1, rng).array() + 3.0 * c).matrix());
    EXPECT_GT(gelman_rubin(shifted)[0], 1.1);
}

TEST(GelmanRubin, AffineInvariance) {
    Rng rng(5);
    std::vector<Matrix> chains;
    std::vector<Matrix> moved;
    for (int c = 0; c < 4; ++c) {
        chains.push_back(iid_normal(2000, 1, rng) + Matrix::Constant(2000, 1, 0.1 * c));
        moved.push_back((chains.back().array() * -3.5 + 7.0).matrix());
    }
    EXPECT_NEAR(gelman_rubin(chains)[0], gelman_rubin(moved)[0], 1e-12);
    EXPECT_NEAR(autocorr_ess(chains[0].col(0)).ess, autocorr_ess(moved[0].col(0)).ess, 1e-9);
}

TEST(GelmanRubin, Validation) {
    EXPECT_THROW(gelman_rubin({Matrix::Zero(100, 1)}), ConfigError);
    EXPECT_THROW(gelman_rubin({Matrix::Zero(100, 1), Matrix::Zero(90, 1)}), ConfigError);
}

TEST(Ess, IidChain) {
    Rng rng(6);
    const Vector x = iid_normal(10000, 1, rng).col(0);
    const auto r = autocorr_ess(x);
    EXPECT_NEAR(r.ess / 10000.0, 1.0, 0.2);
    EXPECT_EQ(r.acf.size(), 51);
    EXPECT_DOUBLE_EQ(r.acf[0], 1.0);
}

TEST(Ess, Ar1MatchesAnalyticValue) {
    // Integrated autocorrelation of AR(1): (1 + rho) / (1 - rho).
    Rng rng(7);
    const Vector x = ar1(20000, 0.5, rng);
    const auto r = autocorr_ess(x);
    EXPECT_NEAR(r.ess / 20000.0, 1.0 / 3.0, 0.25 / 3.0);
    EXPECT_NEAR(r.acf[1], 0.5, 0.03);
    EXPECT_NEAR(r.acf[2], 0.25, 0.03);
}

TEST(Ess, ConstantChainFloorsAtOne) {
    const auto r = autocorr_ess(Vector::Constant(500, 2.0));
    EXPECT_EQ(r.ess, 1.0);
}

TEST(Diagnose, ReportShapeAndFlags) {
    Rng rng(8);
    std::vector<Matrix> chains;
    for (int c = 0; c < 4; ++c) chains.push_back(iid_normal(4000, 2, rng));
    const auto rep = diagnose(chains);
    EXPECT_EQ(rep.geweke_z.rows(), 4);
    EXPECT_EQ(rep.rhat.size(), 2);
    EXPECT_EQ(rep.total_samples, 12000);
    EXPECT_LE(rep.ess.maxCoeff(), static_cast<double>(rep.total_samples));
    EXPECT_EQ(rep.acf.cols(), 51);

    std::vector<Matrix> stuck = chains;
    stuck[0].array() += 10.0;
    EXPECT_FALSE(diagnose(stuck).converged);
}

TEST(Kde, PeaksAndBandwidth) {
    Rng rng(9);
    Vector s(4000);
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = (i % 2 ? 0.15 : 0.5) + 0.01 * standard_normal(rng);
    const KdeGrid g = kde(s, -0.3, 0.9);
    EXPECT_EQ(g.x.size(), 512);
    const double area = g.density.sum() * (g.x[1] - g.x[0]);
    EXPECT_NEAR(area, 1.0, 0.02);
    const auto peaks = kde_peaks(g);
    ASSERT_GE(peaks.size(), 2u);
}

TEST(Summarize, PointMass) {
    const auto s = summarize(Matrix::Constant(200, 2, 0.3));
    EXPECT_EQ(s.mean, Vector::Constant(2, 0.3));
    EXPECT_EQ(s.mode, Vector::Constant(2, 0.3));
    EXPECT_EQ(s.std, Vector::Zero(2));
}

TEST(Summarize, NearPointMassFallsBackToMedian) {
    // Spread of 1e-9: the bandwidth is far below the grid spacing.
    Matrix s(5000, 1);
    for (Eigen::Index i = 0; i < s.rows(); ++i) s(i, 0) = 0.2 + 1e-9 * static_cast<double>(i % 7);
    const auto sum = summarize(s);
    EXPECT_EQ(sum.mode[0], 0.2 + 3e-9);
    EXPECT_FALSE(sum.bimodal[0]);
}

TEST(Summarize, TruncatedNormalMeanAndMode) {
    Rng rng(10);
    Matrix s(20000, 1);
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        double x;
        do x = 0.2 + 0.01 * standard_normal(rng);
        while (x < 0.0 || x > 0.52);
        s(i, 0) = x;
    }
    const auto sum = summarize(s);
    EXPECT_NEAR(sum.mean[0], 0.2, 0.005);
    EXPECT_NEAR(sum.mode[0], 0.2, 0.005);
    EXPECT_NEAR(sum.std[0], 0.01, 0.001);
    EXPECT_FALSE(sum.bimodal[0]);
    EXPECT_GE(sum.mode[0], s.minCoeff());
    EXPECT_LE(sum.mode[0], s.maxCoeff());
}

TEST(Summarize, BimodalFlag) {
    Rng rng(11);
    Matrix s(10000, 1);
    for (Eigen::Index i = 0; i < s.rows(); ++i) s(i, 0) = (i % 2 ? 0.15 : 0.5) + 0.01 * standard_normal(rng);
    const auto sum = summarize(s);
    EXPECT_TRUE(sum.bimodal[0]);
    EXPECT_TRUE(std::abs(sum.mode[0] - 0.15) < 0.01 || std::abs(sum.mode[0] - 0.5) < 0.01);
}

TEST(Summarize, MapsArePiecewiseConstant) {
    const auto grid = build_grid(9, 9, 1.0);
    const auto part = partition_grid(grid, 3, 3);
    Rng rng(12);
    Matrix s(500, 9);
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        for (Eigen::Index r = 0; r < 9; ++r) s(i, r) = 0.05 * r + 0.01 * uniform01(rng);
    }
    const auto sum = summarize(s, &part);
    ASSERT_EQ(sum.mean_map.size(), 81u);
    for (const auto& members : part.members()) {
        for (int n : members) {
            EXPECT_EQ(sum.mean_map[static_cast<std::size_t>(n)], sum.mean_map[static_cast<std::size_t>(members[0])]);
            EXPECT_EQ(sum.mode_map[static_cast<std::size_t>(n)], sum.mode_map[static_cast<std::size_t>(members[0])]);
            EXPECT_EQ(sum.std_map[static_cast<std::size_t>(n)], sum.std_map[static_cast<std::size_t>(members[0])]);
        }
    }
    for (double v : sum.std_map) EXPECT_GE(v, 0.0);
    EXPECT_NEAR(sum.correlation(0, 0), 1.0, 1e-15);
}

TEST(Switching, Scores) {
    Rng rng(13);
    Matrix c(10000, 2);
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        c(i, 0) = standard_normal(rng);
        c(i, 1) = -c(i, 0);
    }
    EXPECT_NEAR(switching_score(c, 0, 1), -1.0, 1e-12);
    c.col(1) = iid_normal(10000, 1, rng);
    EXPECT_LT(std::abs(switching_score(c, 0, 1)), 0.1);
    c.col(1).setConstant(0.2);
    EXPECT_EQ(switching_score(c, 0, 1), 0.0);
    EXPECT_THROW(switching_score(c.topRows(999), 0, 1), ConfigError);
}

TEST(Switching, AlternatingPairIsFlagged) {
    Rng rng(14);
    Matrix c(4000, 2);
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        const bool high = (i / 200) % 2 == 0;
        c(i, 0) = (high ? 0.45 : 0.15) + 0.01 * standard_normal(rng);
        c(i, 1) = (high ? 0.15 : 0.45) + 0.01 * standard_normal(rng);
    }
    EXPECT_LT(switching_score(c, 0, 1), -0.9);
    const auto sum = summarize(c);
    EXPECT_TRUE(sum.bimodal[0]);
    EXPECT_TRUE(sum.bimodal[1]);
}
