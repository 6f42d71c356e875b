#include "gpmcmc/gp_surrogate.hpp"
#include "gpmcmc/optimize.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace gpmcmc;

namespace {

TrainingSet random_set(int m, int r, Rng& rng, const std::function<double(const Vector&)>& f) {
    TrainingSet t;
    const auto box = Bounds::uniform(r, 0.0, 1.0);
    const Matrix X = latin_hypercube(m, box, rng);
    for (Eigen::Index i = 0; i < X.rows(); ++i) t.append(X.row(i).transpose(), f(X.row(i).transpose()));
    t.recenter();
    return t;
}

double smooth(const Vector& x) { return std::sin(3.0 * x[0]) + (x.size() > 1 ? x[1] * x[1] : 0.0) - 0.5 * x.sum(); }

KernelHyper hyper_for(int r, double ell, double amp2 = 1.0) {
    KernelHyper h;
    h.lengthscales = Vector::Constant(r, ell);
    h.amplitude2 = amp2;
    return h;
}

}  // namespace

TEST(Matern, ClosedFormValues) {
    const Vector a = Vector::Zero(1);
    const Vector b = Vector::Ones(1);
    const auto h = hyper_for(1, 1.0);
    EXPECT_NEAR(matern52(a, b, h), (1.0 + std::sqrt(5.0) + 5.0 / 3.0) * std::exp(-std::sqrt(5.0)), 1e-12);
    EXPECT_NEAR(matern52(a, b, h), 0.52399410883182, 1e-12);
    EXPECT_EQ(matern52(b, b, hyper_for(1, 0.3, 2.5)), 2.5);
    double prev = 1.0;
    for (double d2 : {0.5, 1.0, 4.0, 25.0, 400.0, 1e6}) {
        const double v = matern52_from_sqdist(d2, 1.0);
        EXPECT_LT(v, prev);
        prev = v;
    }
    EXPECT_LT(prev, 1e-100);
    EXPECT_THROW(matern52(a, Vector::Zero(2), h), ConfigError);
}

TEST(Matern, SymmetricAndPositiveSemidefinite) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 2 + trial % 19;
        const int r = 1 + trial % 4;
        const Matrix X = latin_hypercube(m, Bounds::uniform(r, -1.0, 2.0), rng);
        KernelHyper h = hyper_for(r, 0.2 + 0.1 * trial, 1.0 + trial);
        const Matrix K = kernel_matrix(X, h);
        EXPECT_EQ(K, K.transpose());
        const Eigen::SelfAdjointEigenSolver<Matrix> es(K);
        EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
        EXPECT_EQ(matern52(X.row(0).transpose(), X.row(1).transpose(), h),
                  matern52(X.row(1).transpose(), X.row(0).transpose(), h));
    }
}

TEST(TrainingSetTest, RejectsNonFiniteAndDuplicates) {
    TrainingSet t;
    t.append(Vector::Zero(2), 1.0);
    EXPECT_THROW(t.append(Vector::Ones(2), -std::numeric_limits<double>::infinity()), ConfigError);
    EXPECT_THROW(t.append(Vector::Zero(2), 2.0), ConfigError);
    EXPECT_THROW(t.append(Vector::Zero(3), 2.0), ConfigError);
    t.append(Vector::Ones(2), 3.0);
    EXPECT_EQ(t.size(), 2);
    EXPECT_NEAR(t.nearest_distance(Vector::Constant(2, 0.9)), std::sqrt(0.02), 1e-12);
}

TEST(Fit, SinglePointInterpolation) {
    TrainingSet t;
    t.append(Vector::Constant(2, 0.5), -3.0);
    t.recenter();
    const GPModel gp = fit_gp(t, hyper_for(2, 0.3));
    const Prediction p = gp.predict(Vector::Constant(2, 0.5));
    EXPECT_NEAR(p.mu, -3.0, 1e-12);
    EXPECT_NEAR(p.sigma * p.sigma, gp.hyper().nugget(), 1e-12);
}

TEST(Fit, CholeskyReconstructsKernel) {
    Rng rng(5);
    const TrainingSet t = random_set(5, 2, rng, smooth);
    const GPModel gp = fit_gp(t, hyper_for(2, 0.4));
    Matrix K = kernel_matrix(t.X, gp.hyper());
    K.diagonal().array() += gp.hyper().nugget();
    const Matrix L = gp.chol();
    EXPECT_LT((L * L.transpose() - K).norm() / K.norm(), 1e-8);
    // Direct dense solve of K^{-1}(y - mean).
    const Vector direct = K.fullPivLu().solve((t.y.array() - t.y_mean).matrix());
    EXPECT_LT((gp.weights() - direct).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Fit, InterpolatesTrainingTargets) {
    Rng rng(6);
    for (int r = 1; r <= 3; ++r) {
        const TrainingSet t = random_set(12, r, rng, smooth);
        const GPModel gp = fit_gp(t, hyper_for(r, 0.3));
        const double range = t.y.maxCoeff() - t.y.minCoeff();
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            const Prediction p = gp.predict(t.X.row(i).transpose());
            EXPECT_LE(std::abs(p.mu - t.y[i]), 1e-4 * range);
            EXPECT_LE(p.sigma, std::sqrt(gp.hyper().nugget()) * 10.0);
        }
    }
}

TEST(Predict, MatchesDenseOracle) {
    Rng rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const int r = 1 + trial % 4;
        const TrainingSet t = random_set(10, r, rng, smooth);
        KernelHyper h;
        h.lengthscales = Vector::NullaryExpr(r, [&] { return 0.2 + u(rng); });
        h.amplitude2 = 0.5 + u(rng);
        const GPModel gp = fit_gp(t, h);
        for (int probe = 0; probe < 5; ++probe) {
            const Vector x = Vector::NullaryExpr(r, [&] { return u(rng); });
            const auto ref = oracle::dense_gp(t.X, t.y, t.y_mean, gp.hyper().lengthscales, gp.hyper().amplitude2,
                                              gp.hyper().nugget(), x);
            const Prediction p = gp.predict(x);
            EXPECT_NEAR(p.mu, ref.mu, 1e-8);
            EXPECT_NEAR(p.sigma * p.sigma, std::max(0.0, ref.var), 1e-8);
        }
    }
}

TEST(Predict, RevertsToPriorFarAway) {
    Rng rng(8);
    const TrainingSet t = random_set(6, 2, rng, smooth);
    const GPModel gp = fit_gp(t, hyper_for(2, 0.2, 2.0));
    const Prediction p = gp.predict(Vector::Constant(2, 1e4));
    EXPECT_NEAR(p.mu, t.y_mean, 1e-12);
    EXPECT_NEAR(p.sigma, std::sqrt(2.0), 1e-12);
}

TEST(Predict, VarianceNeverIncreasesWithMoreData) {
    Rng rng(9);
    const TrainingSet base = random_set(6, 2, rng, smooth);
    const auto h = hyper_for(2, 0.35);
    const GPModel before = fit_gp(base, h);
    TrainingSet more = base;
    more.append(Vector::Constant(2, 0.37), smooth(Vector::Constant(2, 0.37)));
    more.recenter();
    const GPModel after = fit_gp(more, h);
    const Matrix probes = latin_hypercube(20, Bounds::uniform(2, 0.0, 1.0), rng);
    for (Eigen::Index i = 0; i < probes.rows(); ++i) {
        const Vector x = probes.row(i).transpose();
        const double vb = std::pow(before.predict(x).sigma, 2);
        const double va = std::pow(after.predict(x).sigma, 2);
        EXPECT_LE(va, vb + 1e-10);
    }
}

TEST(Ucb, Arithmetic) {
    Rng rng(10);
    const TrainingSet t = random_set(5, 1, rng, smooth);
    const GPModel gp = fit_gp(t, hyper_for(1, 0.3));
    const Vector x = Vector::Constant(1, 0.123);
    EXPECT_EQ(ucb(gp, x, 0.0), gp.predict(x).mu);
    const Vector xi = t.X.row(2).transpose();
    // sigma at a training input is about sqrt(nugget).
    for (double beta : {1.0, 4.0, 100.0})
        EXPECT_NEAR(ucb(gp, xi, beta), t.y[2], 1e-6 + 1.5 * std::sqrt(beta * gp.hyper().nugget()));
    const Prediction p = gp.predict(x);
    EXPECT_DOUBLE_EQ(ucb(gp, x, 4.0), p.mu + 2.0 * p.sigma);
}

TEST(Acquire, ExploresToBoundaryWithOnePoint) {
    TrainingSet t;
    t.append(Vector::Constant(2, 0.5), 0.0);
    t.recenter();
    const GPModel gp = fit_gp(t, hyper_for(2, 0.3));
    const auto box = Bounds::uniform(2, 0.0, 1.0);
    AcquisitionConfig cfg;
    cfg.beta = 100.0;
    Rng rng(1);
    const Vector x = acquire_next(gp, box, cfg, rng);
    // Grid oracle at 50 points per axis.
    double grid_best = -std::numeric_limits<double>::infinity();
    Vector grid_x;
    for (int i = 0; i < 50; ++i) {
        for (int j = 0; j < 50; ++j) {
            Vector g(2);
            g << i / 49.0, j / 49.0;
            const double v = ucb(gp, g, cfg.beta);
            if (v > grid_best) {
                grid_best = v;
                grid_x = g;
            }
        }
    }
    const bool grid_on_boundary = (grid_x.array() == 0.0).any() || (grid_x.array() == 1.0).any();
    EXPECT_TRUE(grid_on_boundary);
    const bool on_boundary = (x.array() <= 1e-9).any() || (x.array() >= 1.0 - 1e-9).any();
    EXPECT_TRUE(on_boundary);
    EXPECT_GE(ucb(gp, x, cfg.beta), grid_best - 1e-9);
}

TEST(Acquire, PureExploitationFindsInteriorMeanMaximum) {
    Rng rng(2);
    auto f = [](const Vector& x) { return -8.0 * ((x[0] - 0.63) * (x[0] - 0.63) + (x[1] - 0.41) * (x[1] - 0.41)); };
    const TrainingSet t = random_set(25, 2, rng, f);
    const GPModel gp = fit_gp(t, hyper_for(2, 0.5));
    const auto box = Bounds::uniform(2, 0.0, 1.0);
    AcquisitionConfig cfg;
    cfg.beta = 0.0;
    const Vector x = acquire_next(gp, box, cfg, rng);

    // Coarse 50x50 grid, then a 201x201 refinement around the coarse argmax.
    auto argmax_on = [&](double x0, double x1, double y0, double y1, int n) {
        Vector best(2);
        double best_v = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                Vector g(2);
                g << x0 + (x1 - x0) * i / (n - 1), y0 + (y1 - y0) * j / (n - 1);
                const double v = gp.predict_mean(g);
                if (v > best_v) {
                    best_v = v;
                    best = g;
                }
            }
        }
        return best;
    };
    const Vector coarse = argmax_on(0.0, 1.0, 0.0, 1.0, 50);
    const double step = 1.0 / 49.0;
    const Vector fine = argmax_on(coarse[0] - step, coarse[0] + step, coarse[1] - step, coarse[1] + step, 201);
    EXPECT_GT(fine.minCoeff(), 0.05);
    EXPECT_LT(fine.maxCoeff(), 0.95);
    EXPECT_LT((x - fine).norm(), 1e-3);
}

TEST(Acquire, DegenerateBox) {
    TrainingSet t;
    t.append(Vector::Constant(2, 0.2), 1.0);
    t.recenter();
    const GPModel gp = fit_gp(t, hyper_for(2, 0.3));
    Bounds box{Vector::Constant(2, 0.3), Vector::Constant(2, 0.3)};
    Rng rng(3);
    EXPECT_EQ(acquire_next(gp, box, AcquisitionConfig{}, rng), Vector::Constant(2, 0.3));
}

TEST(Hyper, RecoversLengthscalesFromGpDraw) {
    // Draw targets from a GP with known hyperparameters, then re-estimate.
    Rng rng(20240601);
    const auto box = Bounds::uniform(2, 0.0, 1.0);
    const Matrix X = latin_hypercube(40, box, rng);
    KernelHyper truth;
    truth.lengthscales.resize(2);
    truth.lengthscales << 0.25, 0.6;
    truth.amplitude2 = 1.0;
    Matrix K = kernel_matrix(X, truth);
    K.diagonal().array() += 1e-8;
    const Matrix L = K.llt().matrixL();
    const Vector z = Vector::NullaryExpr(40, [&] { return standard_normal(rng); });
    TrainingSet t;
    t.X = X;
    t.y = L * z;
    t.recenter();
    const KernelHyper start = default_hyper(t, box);
    const KernelHyper fit = optimize_hypers(t, start, 12, rng);
    for (int i = 0; i < 2; ++i) {
        EXPECT_NEAR(std::log(fit.lengthscales[i]), std::log(truth.lengthscales[i]), 0.5) << "dim " << i;
    }
    EXPECT_GE(log_marginal_likelihood(t, fit), log_marginal_likelihood(t, start));
}

TEST(Hyper, ConstantTargetsDriveAmplitudeDown) {
    Rng rng(4);
    TrainingSet t = random_set(8, 2, rng, [](const Vector&) { return 2.0; });
    const KernelHyper start = hyper_for(2, 0.3, 1.0);
    const KernelHyper fit = optimize_hypers(t, start, 6, rng);
    // Lower search bound is 1e-3 times the unit default.
    EXPECT_LT(fit.amplitude2, 1.1e-3);
    KernelHyper interior = fit;
    interior.amplitude2 = 0.1;
    EXPECT_GT(log_marginal_likelihood(t, fit), log_marginal_likelihood(t, interior));
}

TEST(Hyper, NeverWorseThanCurrent) {
    Rng rng(12);
    const TrainingSet t = random_set(10, 2, rng, smooth);
    const KernelHyper start = hyper_for(2, 0.3, 0.5);
    const KernelHyper fit = optimize_hypers(t, start, 1, rng);
    EXPECT_GE(log_marginal_likelihood(t, fit), log_marginal_likelihood(t, start));
    TrainingSet tiny;
    tiny.append(Vector::Zero(1), 0.0);
    EXPECT_THROW(optimize_hypers(tiny, hyper_for(1, 1.0), 3, rng), ConfigError);
}

TEST(Build, ZeroAcquisitionWhenBudgetEqualsDesign) {
    const auto box = Bounds::uniform(2, 0.0, 1.0);
    AcquisitionConfig cfg;
    cfg.budget_max = 8;
    Rng rng(5);
    int calls = 0;
    const auto b = build_surrogate([&](const Vector& x) { ++calls; return smooth(x); }, box, cfg, 8, rng);
    EXPECT_EQ(b.acquired, 0);
    EXPECT_EQ(b.exact_evaluations, 8u);
    EXPECT_EQ(calls, 8);
    EXPECT_EQ(b.gp().training().size(), 8);
}

TEST(Build, BudgetAccountingIsExact) {
    const auto box = Bounds::uniform(2, 0.0, 1.0);
    AcquisitionConfig cfg;
    cfg.budget_max = 20;
    Rng rng(6);
    int calls = 0;
    const auto b = build_surrogate([&](const Vector& x) { ++calls; return smooth(x); }, box, cfg, 6, rng);
    EXPECT_EQ(b.exact_evaluations, static_cast<std::uint64_t>(6 + b.acquired));
    EXPECT_EQ(static_cast<std::uint64_t>(calls), b.exact_evaluations);
    EXPECT_LE(b.gp().training().size(), cfg.budget_max);
}

TEST(Build, QuadraticArgmaxLocated) {
    const auto box = Bounds::uniform(1, 0.0, 0.52);
    const double peak = 0.337;
    auto f = [&](const Vector& x) { return -200.0 * (x[0] - peak) * (x[0] - peak); };
    AcquisitionConfig cfg;
    cfg.budget_max = 15;
    Rng rng(7);
    const auto b = build_surrogate(f, box, cfg, 4, rng);
    double best = -std::numeric_limits<double>::infinity();
    double arg = 0.0;
    for (int i = 0; i <= 5200; ++i) {
        const double x = 0.52 * i / 5200.0;
        const double v = b.gp().predict_mean(Vector::Constant(1, x));
        if (v > best) {
            best = v;
            arg = x;
        }
    }
    EXPECT_LT(std::abs(arg - peak), 0.02 * 0.52);
}

TEST(Build, ValidatesConfig) {
    const auto box = Bounds::uniform(2, 0.0, 1.0);
    Rng rng(1);
    AcquisitionConfig cfg;
    cfg.budget_max = 3;
    EXPECT_THROW(build_surrogate(smooth, box, cfg, 3, rng), ConfigError);
    cfg.budget_max = 10;
    cfg.beta = -1.0;
    EXPECT_THROW(build_surrogate(smooth, box, cfg, 4, rng), ConfigError);
    cfg.beta = 4.0;
    EXPECT_THROW(build_surrogate(smooth, box, cfg, 11, rng), ConfigError);
}

TEST(Optimize, NelderMeadRespectsBox) {
    auto f = [](const Vector& x) { return (x.array() - 2.0).square().sum(); };
    const auto box = Bounds::uniform(3, -1.0, 1.0);
    const OptimResult r = minimize_bounded(f, Vector::Zero(3), box);
    EXPECT_TRUE(box.contains(r.x));
    EXPECT_NEAR(r.x.minCoeff(), 1.0, 1e-6);
    EXPECT_LE(r.f, f(Vector::Zero(3)));
}

TEST(Optimize, NelderMeadFindsInteriorMinimum) {
    auto rosen = [](const Vector& x) { return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2); };
    NelderMeadOptions opts;
    opts.max_evals = 4000;
    const OptimResult r = minimize_bounded(rosen, Vector::Constant(2, -0.5), Bounds::uniform(2, -2.0, 2.0), opts);
    EXPECT_NEAR(r.x[0], 1.0, 1e-3);
    EXPECT_NEAR(r.x[1], 1.0, 2e-3);
}

TEST(Optimize, LatinHypercubeStratifies) {
    Rng rng(3);
    const auto box = Bounds::uniform(3, 0.0, 2.0);
    const Matrix X = latin_hypercube(10, box, rng);
    for (Eigen::Index c = 0; c < 3; ++c) {
        std::vector<int> seen(10, 0);
        for (Eigen::Index i = 0; i < 10; ++i) {
            const double v = X(i, c);
            ASSERT_GE(v, 0.0);
            ASSERT_LE(v, 2.0);
            ++seen[static_cast<std::size_t>(std::min(9, static_cast<int>(v / 0.2)))];
        }
        for (int s : seen) EXPECT_EQ(s, 1);
    }
}
