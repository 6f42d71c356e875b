#pragma once

// Gaussian-process surrogate of a log-posterior: anisotropic Matérn 5/2
// kernel, Cholesky-based exact GP, UCB acquisition and marginal-likelihood
// hyperparameter search.

#include "gpmcmc/posterior.hpp"
#include "gpmcmc/rng.hpp"
#include "gpmcmc/types.hpp"

#include <cstdint>
#include <optional>

namespace gpmcmc {

/// Kernel hyperparameters. `jitter` is a relative nugget: the factored matrix
/// is K + jitter * amplitude2 * I.
struct KernelHyper {
    Vector lengthscales;
    double amplitude2 = 1.0;
    double jitter = 1e-8;

    void validate() const;
    [[nodiscard]] double nugget() const { return jitter * amplitude2; }
};

inline constexpr double kMinJitter = 1e-10;
inline constexpr double kMaxJitter = 1e-4;

/// α² (1 + s + s²/3) exp(-s), s = sqrt(5 d²).
double matern52_from_sqdist(double d2, double amplitude2);

/// d² = Σ (x1_i - x2_i)² / ℓ_i².
double scaled_sqdist(const Vector& x1, const Vector& x2, const Vector& lengthscales);

double matern52(const Vector& x1, const Vector& x2, const KernelHyper& hyper);

/// Gram matrix over the rows of X (no nugget).
Matrix kernel_matrix(const Matrix& X, const KernelHyper& hyper);

struct TrainingSet {
    Matrix X;  // M x R
    Vector y;  // M
    double y_mean = 0.0;

    static constexpr double kDuplicateTol = 1e-12;

    [[nodiscard]] Eigen::Index size() const { return X.rows(); }
    [[nodiscard]] Eigen::Index dim() const { return X.cols(); }

    /// Distance from x to the nearest stored input (+inf when empty).
    [[nodiscard]] double nearest_distance(const Vector& x) const;

    /// Appends (x, value); rejects non-finite targets and duplicates.
    void append(const Vector& x, double value);

    void recenter() { y_mean = y.size() > 0 ? y.mean() : 0.0; }
    void validate() const;
};

struct Prediction {
    double mu = 0.0;
    double sigma = 0.0;
};

/// Exact GP regression over a TrainingSet. Immutable once constructed, so a
/// fitted model can be shared read-only between threads.
class GPModel {
public:
    GPModel(TrainingSet training, KernelHyper hyper);

    [[nodiscard]] Prediction predict(const Vector& theta) const;
    [[nodiscard]] double predict_mean(const Vector& theta) const;
    [[nodiscard]] double log_marginal_likelihood() const { return log_marginal_; }

    [[nodiscard]] const TrainingSet& training() const { return training_; }
    /// Hyperparameters actually used, including any jitter escalation.
    [[nodiscard]] const KernelHyper& hyper() const { return hyper_; }
    [[nodiscard]] const Matrix& chol() const { return chol_; }
    [[nodiscard]] const Vector& weights() const { return weights_; }
    [[nodiscard]] Eigen::Index dim() const { return training_.dim(); }

private:
    [[nodiscard]] Vector cross_covariance(const Vector& theta) const;

    TrainingSet training_;
    KernelHyper hyper_;
    Matrix chol_;     // lower triangular
    Vector weights_;  // (K + nugget I)^{-1} (y - y_mean)
    double log_marginal_ = 0.0;
};

/// Fits with automatic jitter escalation (x10 up to kMaxJitter); throws
/// NumericalError when the kernel matrix still cannot be factored.
GPModel fit_gp(TrainingSet training, const KernelHyper& hyper);

Prediction predict(const GPModel& gp, const Vector& theta);

/// μ(θ) + sqrt(β) σ(θ).
double ucb(const GPModel& gp, const Vector& theta, double beta);

/// Log marginal likelihood of centred targets; -inf when the fit fails.
double log_marginal_likelihood(const TrainingSet& training, const KernelHyper& hyper);

struct AcquisitionConfig {
    double beta = 4.0;
    int budget_max = 30;  // total training points, initial design included
    double stall_tol = 1e-3;  // relative to the box diagonal
    int hyperopt_every = 5;
    int restarts = 8;

    void validate(Eigen::Index dim) const;
};

Vector acquire_next(const GPModel& gp, const Bounds& bounds, const AcquisitionConfig& cfg, Rng& rng);

/// Multistart Nelder-Mead over log-lengthscales and log-amplitude, each within
/// [1e-3, 1e3] times a data-derived default. Never returns hyperparameters with
/// lower marginal likelihood than `current`.
KernelHyper optimize_hypers(const TrainingSet& training, const KernelHyper& current, int restarts, Rng& rng);

/// Data-derived starting hyperparameters: lengthscales a quarter of the box
/// width, amplitude the target variance.
KernelHyper default_hyper(const TrainingSet& training, const Bounds& bounds);

struct SurrogateBuild {
    std::optional<GPModel> model;
    std::uint64_t exact_evaluations = 0;
    int initial_points = 0;
    int acquired = 0;
    bool stalled = false;

    [[nodiscard]] const GPModel& gp() const { return *model; }
};

/// Latin-hypercube initial design followed by UCB acquisition until the budget
/// is spent or the last three acquired points each landed within
/// stall_tol * diagonal of an existing training point.
SurrogateBuild build_surrogate(const LogDensity& log_post, const Bounds& bounds, const AcquisitionConfig& cfg,
                               int init_design_size, Rng& rng);

SurrogateBuild build_surrogate(const PosteriorContext& ctx, const AcquisitionConfig& cfg, int init_design_size,
                               Rng& rng);

}  // namespace gpmcmc
