#pragma once

#include "gpmcmc/forward_model.hpp"
#include "gpmcmc/types.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>

namespace gpmcmc {

/// Unnormalized log density over parameter space.
using LogDensity = std::function<double(const Vector&)>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Everything needed to map region parameters to lead voltages:
/// theta -> a_field -> simulate_ap -> measure_ecg.
struct ForwardPipeline {
    GridGeometry grid;
    RegionPartition partition;
    APConstants constants;
    StimulusProtocol stimulus;
    LeadField lead_field;
    SimulationSettings settings;

    [[nodiscard]] int dim() const { return partition.region_count; }
    [[nodiscard]] Matrix evaluate(const Vector& theta) const;
};

/// Thrown when the forward model fails for a particular parameter vector.
class EvaluationError : public NumericalError {
public:
    EvaluationError(const std::string& what, Vector theta) : NumericalError(what), theta_(std::move(theta)) {}
    [[nodiscard]] const Vector& theta() const { return theta_; }

private:
    Vector theta_;
};

double log_prior(const Vector& theta, const Bounds& bounds);

/// sqrt(mean(Y^2) * 10^(-snr_db / 10)).
double estimate_sigma_e(const Observation& y_obs, double snr_db);

/// Gaussian-likelihood posterior with a box-uniform prior. The forward
/// pipeline is read-only; only the evaluation counter mutates, atomically.
class PosteriorContext {
public:
    PosteriorContext(ForwardPipeline pipeline, Observation y_obs, double sigma_e, Bounds bounds);
    PosteriorContext(ForwardPipeline pipeline, Observation y_obs, double sigma_e);

    PosteriorContext(const PosteriorContext&) = delete;
    PosteriorContext& operator=(const PosteriorContext&) = delete;

    /// -||Y_obs - F(theta)||_F^2 / (2 sigma_e^2). Counts one exact evaluation.
    [[nodiscard]] double log_likelihood(const Vector& theta) const;

    /// log_prior + log_likelihood. Returns -inf without running the forward
    /// model when theta is outside the bounds.
    [[nodiscard]] double log_posterior(const Vector& theta) const;

    /// Callable view of log_posterior; the context must outlive it.
    [[nodiscard]] LogDensity as_log_density() const {
        return [this](const Vector& theta) { return log_posterior(theta); };
    }

    [[nodiscard]] std::uint64_t eval_count() const { return eval_counter_.load(std::memory_order_relaxed); }
    void reset_eval_count() { eval_counter_.store(0); }

    [[nodiscard]] const ForwardPipeline& pipeline() const { return pipeline_; }
    [[nodiscard]] const Observation& observation() const { return y_obs_; }
    [[nodiscard]] double sigma_e() const { return sigma_e_; }
    [[nodiscard]] const Bounds& bounds() const { return bounds_; }
    [[nodiscard]] int dim() const { return pipeline_.dim(); }

private:
    ForwardPipeline pipeline_;
    Observation y_obs_;
    double sigma_e_;
    Bounds bounds_;
    mutable std::atomic<std::uint64_t> eval_counter_{0};
};

}  // namespace gpmcmc
