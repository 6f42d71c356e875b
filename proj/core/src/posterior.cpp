#include "gpmcmc/posterior.hpp"

#include <cmath>
#include <sstream>

namespace gpmcmc {

Matrix ForwardPipeline::evaluate(const Vector& theta) const {
    APParams params{constants, expand_parameters(std::span<const double>(theta.data(), theta.size()), partition)};
    return measure_ecg(simulate_ap(grid, params, stimulus, settings).u, lead_field);
}

double log_prior(const Vector& theta, const Bounds& bounds) { return bounds.contains(theta) ? 0.0 : kNegInf; }

double estimate_sigma_e(const Observation& y_obs, double snr_db) {
    if (y_obs.Y.size() == 0) throw ConfigError("estimate_sigma_e: empty observation");
    return std::sqrt(y_obs.Y.array().square().mean() * std::pow(10.0, -snr_db / 10.0));
}

PosteriorContext::PosteriorContext(ForwardPipeline pipeline, Observation y_obs, double sigma_e, Bounds bounds)
    : pipeline_(std::move(pipeline)), y_obs_(std::move(y_obs)), sigma_e_(sigma_e), bounds_(std::move(bounds)) {
    if (!(sigma_e_ > 0.0) || !std::isfinite(sigma_e_)) throw ConfigError("PosteriorContext: sigma_e must be positive");
    bounds_.validate();
    if (bounds_.dim() != pipeline_.dim()) throw ConfigError("PosteriorContext: bounds dimension mismatch");
    for (Eigen::Index i = 0; i < bounds_.dim(); ++i) {
        if (!(bounds_.lower[i] < bounds_.upper[i])) throw ConfigError("PosteriorContext: bounds must have lower < upper");
    }
    if (pipeline_.lead_field.H.cols() != pipeline_.grid.node_count())
        throw ConfigError("PosteriorContext: lead field does not match grid");
    if (y_obs_.Y.rows() != pipeline_.lead_field.lead_count())
        throw ConfigError("PosteriorContext: observation lead count does not match lead field");
}

PosteriorContext::PosteriorContext(ForwardPipeline pipeline, Observation y_obs, double sigma_e)
    : PosteriorContext(pipeline, std::move(y_obs), sigma_e,
                       Bounds::uniform(pipeline.dim(), kExcitabilityMin, kExcitabilityMax)) {}

double PosteriorContext::log_likelihood(const Vector& theta) const {
    eval_counter_.fetch_add(1, std::memory_order_relaxed);
    Matrix predicted;
    try {
        predicted = pipeline_.evaluate(theta);
    } catch (const NumericalError& e) {
        std::ostringstream msg;
        msg << "forward model failed at theta = [" << theta.transpose() << "]: " << e.what();
        throw EvaluationError(msg.str(), theta);
    }
    if (predicted.rows() != y_obs_.Y.rows() || predicted.cols() != y_obs_.Y.cols())
        throw ConfigError("log_likelihood: simulated ECG shape does not match the observation");
    return -(y_obs_.Y - predicted).squaredNorm() / (2.0 * sigma_e_ * sigma_e_);
}

double PosteriorContext::log_posterior(const Vector& theta) const {
    const double lp = log_prior(theta, bounds_);
    if (!std::isfinite(lp)) return kNegInf;
    return lp + log_likelihood(theta);
}

}  // namespace gpmcmc
