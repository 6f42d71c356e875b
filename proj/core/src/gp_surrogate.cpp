#include "gpmcmc/gp_surrogate.hpp"

#include "gpmcmc/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gpmcmc {

namespace {

constexpr double kSqrt5 = 2.23606797749978969640917366873127623544;

}  // namespace

void KernelHyper::validate() const {
    if (lengthscales.size() == 0) throw ConfigError("KernelHyper: lengthscales empty");
    for (Eigen::Index i = 0; i < lengthscales.size(); ++i) {
        if (!(lengthscales[i] > 0.0) || !std::isfinite(lengthscales[i]))
            throw ConfigError("KernelHyper: lengthscales must be positive and finite");
    }
    if (!(amplitude2 > 0.0) || !std::isfinite(amplitude2)) throw ConfigError("KernelHyper: amplitude2 must be positive");
    if (!(jitter >= kMinJitter)) throw ConfigError("KernelHyper: jitter must be at least 1e-10");
}

double matern52_from_sqdist(double d2, double amplitude2) {
    const double s = std::sqrt(5.0 * d2);
    return amplitude2 * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double scaled_sqdist(const Vector& x1, const Vector& x2, const Vector& lengthscales) {
    return ((x1 - x2).array() / lengthscales.array()).square().sum();
}

double matern52(const Vector& x1, const Vector& x2, const KernelHyper& hyper) {
    if (x1.size() != x2.size() || x1.size() != hyper.lengthscales.size())
        throw ConfigError("matern52: dimension mismatch");
    return matern52_from_sqdist(scaled_sqdist(x1, x2, hyper.lengthscales), hyper.amplitude2);
}

Matrix kernel_matrix(const Matrix& X, const KernelHyper& hyper) {
    const Eigen::Index m = X.rows();
    const Matrix Xs = X.array().rowwise() / hyper.lengthscales.transpose().array();
    Matrix K(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        K(i, i) = hyper.amplitude2;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double d2 = (Xs.row(i) - Xs.row(j)).squaredNorm();
            K(i, j) = K(j, i) = matern52_from_sqdist(d2, hyper.amplitude2);
        }
    }
    return K;
}

// ---------------------------------------------------------------------------
// TrainingSet

double TrainingSet::nearest_distance(const Vector& x) const {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < X.rows(); ++i) best = std::min(best, (X.row(i).transpose() - x).norm());
    return best;
}

void TrainingSet::append(const Vector& x, double value) {
    if (!std::isfinite(value)) throw ConfigError("TrainingSet: targets must be finite");
    if (X.rows() > 0 && x.size() != X.cols()) throw ConfigError("TrainingSet: dimension mismatch");
    if (nearest_distance(x) <= kDuplicateTol) throw ConfigError("TrainingSet: duplicate input");
    const Eigen::Index m = X.rows();
    Matrix Xn(m + 1, x.size());
    if (m > 0) Xn.topRows(m) = X;
    Xn.row(m) = x.transpose();
    X = std::move(Xn);
    y.conservativeResize(m + 1);
    y[m] = value;
}

void TrainingSet::validate() const {
    if (X.rows() < 1) throw ConfigError("TrainingSet: need at least one point");
    if (y.size() != X.rows()) throw ConfigError("TrainingSet: X and y sizes differ");
    if (!y.allFinite() || !X.allFinite()) throw ConfigError("TrainingSet: non-finite entries");
}

// ---------------------------------------------------------------------------
// GPModel

GPModel::GPModel(TrainingSet training, KernelHyper hyper) : training_(std::move(training)), hyper_(std::move(hyper)) {
    training_.validate();
    hyper_.validate();
    if (hyper_.lengthscales.size() != training_.dim()) throw ConfigError("GPModel: lengthscale dimension mismatch");

    Matrix K = kernel_matrix(training_.X, hyper_);
    K.diagonal().array() += hyper_.nugget();
    Eigen::LLT<Matrix> llt(K);
    if (llt.info() != Eigen::Success) throw NumericalError("GPModel: kernel matrix is not positive definite");
    chol_ = llt.matrixL();
    if (!chol_.allFinite() || chol_.diagonal().minCoeff() <= 0.0)
        throw NumericalError("GPModel: degenerate Cholesky factor");

    const Vector centred = training_.y.array() - training_.y_mean;
    weights_ = llt.solve(centred);
    if (!weights_.allFinite()) throw NumericalError("GPModel: non-finite weights");
    const double m = static_cast<double>(training_.size());
    log_marginal_ = -0.5 * centred.dot(weights_) - chol_.diagonal().array().log().sum() -
                    0.5 * m * std::log(2.0 * std::numbers::pi);
}

Vector GPModel::cross_covariance(const Vector& theta) const {
    const Eigen::Index m = training_.size();
    Vector k(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double d2 = ((training_.X.row(i).transpose() - theta).array() / hyper_.lengthscales.array()).square().sum();
        k[i] = matern52_from_sqdist(d2, hyper_.amplitude2);
    }
    return k;
}

double GPModel::predict_mean(const Vector& theta) const {
    return training_.y_mean + cross_covariance(theta).dot(weights_);
}

Prediction GPModel::predict(const Vector& theta) const {
    if (theta.size() != training_.dim()) throw ConfigError("predict: dimension mismatch");
    if (!theta.allFinite()) throw ConfigError("predict: non-finite input");
    const Vector k = cross_covariance(theta);
    const Vector v = chol_.triangularView<Eigen::Lower>().solve(k);
    const double var = hyper_.amplitude2 - v.squaredNorm();
    return {training_.y_mean + k.dot(weights_), std::sqrt(std::max(0.0, var))};
}

GPModel fit_gp(TrainingSet training, const KernelHyper& hyper) {
    KernelHyper h = hyper;
    h.jitter = std::max(h.jitter, kMinJitter);
    for (;;) {
        try {
            return GPModel(training, h);
        } catch (const NumericalError&) {
            if (h.jitter >= kMaxJitter) throw;
            h.jitter = std::min(h.jitter * 10.0, kMaxJitter);
        }
    }
}

Prediction predict(const GPModel& gp, const Vector& theta) { return gp.predict(theta); }

double ucb(const GPModel& gp, const Vector& theta, double beta) {
    const Prediction p = gp.predict(theta);
    return p.mu + std::sqrt(beta) * p.sigma;
}

double log_marginal_likelihood(const TrainingSet& training, const KernelHyper& hyper) {
    try {
        return GPModel(training, hyper).log_marginal_likelihood();
    } catch (const std::exception&) {
        return -std::numeric_limits<double>::infinity();
    }
}

// ---------------------------------------------------------------------------
// Acquisition

void AcquisitionConfig::validate(Eigen::Index dim) const {
    if (!(beta >= 0.0)) throw ConfigError("AcquisitionConfig: beta must be non-negative");
    if (budget_max < dim + 2) throw ConfigError("AcquisitionConfig: budget_max must be at least R + 2");
    if (!(stall_tol > 0.0)) throw ConfigError("AcquisitionConfig: stall_tol must be positive");
    if (hyperopt_every < 1) throw ConfigError("AcquisitionConfig: hyperopt_every must be positive");
    if (restarts < 1) throw ConfigError("AcquisitionConfig: restarts must be positive");
}

Vector acquire_next(const GPModel& gp, const Bounds& bounds, const AcquisitionConfig& cfg, Rng& rng) {
    if (bounds.width().maxCoeff() <= 0.0) return bounds.lower;
    const auto neg_ucb = [&](const Vector& x) { return -ucb(gp, x, cfg.beta); };

    Matrix starts = latin_hypercube(cfg.restarts, bounds, rng);
    // The incumbent best training input is a cheap extra start for exploitation.
    Eigen::Index best_idx = 0;
    gp.training().y.maxCoeff(&best_idx);
    starts.conservativeResize(starts.rows() + 1, Eigen::NoChange);
    starts.row(starts.rows() - 1) = bounds.clamp(gp.training().X.row(best_idx).transpose()).transpose();

    NelderMeadOptions opts;
    opts.max_evals = 300;
    opts.initial_step = 0.05;
    Vector best_x = starts.row(0).transpose();
    double best_f = std::numeric_limits<double>::infinity();
    for (Eigen::Index s = 0; s < starts.rows(); ++s) {
        const OptimResult r = minimize_bounded(neg_ucb, starts.row(s).transpose(), bounds, opts);
        if (r.f < best_f) {
            best_f = r.f;
            best_x = r.x;
        }
    }
    return bounds.clamp(best_x);
}

KernelHyper default_hyper(const TrainingSet& training, const Bounds& bounds) {
    KernelHyper h;
    h.lengthscales = 0.25 * bounds.width().cwiseMax(1e-12);
    const double var = training.y.size() > 1 ? (training.y.array() - training.y.mean()).square().mean() : 0.0;
    h.amplitude2 = var > 0.0 ? var : 1.0;
    return h;
}

KernelHyper optimize_hypers(const TrainingSet& training, const KernelHyper& current, int restarts, Rng& rng) {
    if (training.size() < 3) throw ConfigError("optimize_hypers: need at least 3 training points");
    const Eigen::Index dim = training.dim();

    // Search box in log space around data-derived defaults.
    Vector log_default(dim + 1);
    for (Eigen::Index i = 0; i < dim; ++i) {
        const double range = training.X.col(i).maxCoeff() - training.X.col(i).minCoeff();
        log_default[i] = std::log(range > 0.0 ? range : 1.0);
    }
    const double var = (training.y.array() - training.y.mean()).square().mean();
    log_default[dim] = std::log(var > 0.0 ? var : 1.0);
    const double span = std::log(1e3);
    const Bounds box{log_default.array() - span, log_default.array() + span};

    auto unpack = [&](const Vector& z) {
        KernelHyper h = current;
        h.lengthscales = z.head(dim).array().exp();
        h.amplitude2 = std::exp(z[dim]);
        return h;
    };
    auto objective = [&](const Vector& z) { return -log_marginal_likelihood(training, unpack(z)); };

    const double current_lml = log_marginal_likelihood(training, current);
    Vector z_current(dim + 1);
    z_current.head(dim) = current.lengthscales.array().log();
    z_current[dim] = std::log(current.amplitude2);

    Matrix starts = latin_hypercube(std::max(restarts - 1, 0), box, rng);
    starts.conservativeResize(starts.rows() + 1, Eigen::NoChange);
    starts.row(starts.rows() - 1) = box.clamp(z_current).transpose();

    NelderMeadOptions opts;
    opts.max_evals = 200 * static_cast<int>(dim + 1);
    opts.initial_step = 0.05;
    double best = std::numeric_limits<double>::infinity();
    Vector best_z = z_current;
    for (Eigen::Index s = 0; s < starts.rows(); ++s) {
        const OptimResult r = minimize_bounded(objective, starts.row(s).transpose(), box, opts);
        if (r.f < best) {
            best = r.f;
            best_z = r.x;
        }
    }
    if (!std::isfinite(best) || -best < current_lml) return current;
    return unpack(best_z);
}

// ---------------------------------------------------------------------------
// Surrogate construction

SurrogateBuild build_surrogate(const LogDensity& log_post, const Bounds& bounds, const AcquisitionConfig& cfg,
                               int init_design_size, Rng& rng) {
    bounds.validate();
    const Eigen::Index dim = bounds.dim();
    cfg.validate(dim);
    if (init_design_size < dim + 1) throw ConfigError("build_surrogate: init_design_size must be at least R + 1");
    if (init_design_size > cfg.budget_max) throw ConfigError("build_surrogate: init_design_size exceeds budget_max");

    SurrogateBuild out;
    TrainingSet training;
    const Matrix design = latin_hypercube(init_design_size, bounds, rng);
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const Vector x = design.row(i).transpose();
        const double value = log_post(x);
        ++out.exact_evaluations;
        if (std::isfinite(value) && training.nearest_distance(x) > TrainingSet::kDuplicateTol) training.append(x, value);
    }
    out.initial_points = static_cast<int>(training.size());
    if (training.size() == 0) throw NumericalError("build_surrogate: no finite log-posterior value in the initial design");
    training.recenter();

    KernelHyper hyper = default_hyper(training, bounds);
    if (training.size() >= 3) hyper = optimize_hypers(training, hyper, cfg.restarts, rng);
    GPModel gp = fit_gp(training, hyper);

    const double stall_dist = cfg.stall_tol * bounds.diagonal();
    int consecutive_stalls = 0;
    int attempts = 0;
    while (init_design_size + attempts < cfg.budget_max) {
        ++attempts;
        const Vector x = acquire_next(gp, bounds, cfg, rng);
        if (!bounds.contains(x)) throw NumericalError("build_surrogate: acquisition left the bounds");
        const double moved = training.nearest_distance(x);
        consecutive_stalls = moved < stall_dist ? consecutive_stalls + 1 : 0;
        if (moved > TrainingSet::kDuplicateTol) {
            const double value = log_post(x);
            ++out.exact_evaluations;
            if (std::isfinite(value)) {
                training.append(x, value);
                ++out.acquired;
                training.recenter();
                if (out.acquired % cfg.hyperopt_every == 0) hyper = optimize_hypers(training, gp.hyper(), cfg.restarts, rng);
                gp = fit_gp(training, hyper);
            }
        }
        if (consecutive_stalls >= 3) {
            out.stalled = true;
            break;
        }
    }
    out.model.emplace(std::move(gp));
    return out;
}

SurrogateBuild build_surrogate(const PosteriorContext& ctx, const AcquisitionConfig& cfg, int init_design_size,
                               Rng& rng) {
    return build_surrogate(ctx.as_log_density(), ctx.bounds(), cfg, init_design_size, rng);
}

}  // namespace gpmcmc
