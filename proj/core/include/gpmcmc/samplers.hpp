#pragma once

#include "gpmcmc/gp_surrogate.hpp"
#include "gpmcmc/posterior.hpp"
#include "gpmcmc/rng.hpp"
#include "gpmcmc/types.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gpmcmc {

struct ProposalConfig {
    double sigma_p = 0.01;

    void validate() const {
        if (!(sigma_p > 0.0) || !std::isfinite(sigma_p)) throw ConfigError("ProposalConfig: sigma_p must be positive");
    }
};

/// Proposal kernel q(. | current). `log_q_ratio` returns
/// log q(current | proposed) - log q(proposed | current).
class Proposal {
public:
    virtual ~Proposal() = default;
    virtual Vector draw(const Vector& current, Rng& rng) const = 0;
    [[nodiscard]] virtual double log_q_ratio(const Vector& current, const Vector& proposed) const = 0;
};

/// Isotropic Gaussian random walk N(current, sigma_p^2 I); the q-ratio is zero.
class GaussianProposal final : public Proposal {
public:
    explicit GaussianProposal(ProposalConfig cfg) : cfg_(cfg) { cfg_.validate(); }
    Vector draw(const Vector& current, Rng& rng) const override;
    [[nodiscard]] double log_q_ratio(const Vector&, const Vector&) const override { return 0.0; }
    [[nodiscard]] const ProposalConfig& config() const { return cfg_; }

private:
    ProposalConfig cfg_;
};

struct ChainState {
    Vector theta;
    double log_post_exact = kNegInf;
    double log_post_surr = kNegInf;
};

struct ChainStats {
    std::uint64_t proposed = 0;
    std::uint64_t accepted = 0;
    std::uint64_t surrogate_rejected = 0;  // includes out-of-bounds rejections in two-stage mode
    std::uint64_t exact_tested = 0;        // exact log-posterior evaluations at proposals
    std::uint64_t exact_accepted = 0;
    std::uint64_t out_of_bounds = 0;

    [[nodiscard]] double acceptance_rate() const {
        return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
    }
};

/// Metropolis decision in log space. Draws a uniform only when 0 < rho < 1, so
/// chains with identical acceptance ratios consume identical random streams.
bool metropolis_accept(double log_ratio, Rng& rng);

/// min(1, exp(log_q_ratio + surr_proposed - surr_current)).
double stage1_acceptance(double surr_current, double surr_proposed, double log_q_ratio = 0.0);

/// min(1, exp((exact_proposed - exact_current) - (surr_proposed - surr_current))).
double stage2_acceptance(double exact_current, double exact_proposed, double surr_current, double surr_proposed);

/// One Metropolis-Hastings step on `target`, caching its value in log_post_exact.
ChainState mh_step(const ChainState& state, const LogDensity& target, const Proposal& proposal, Rng& rng,
                   ChainStats* stats = nullptr);

/// One delayed-acceptance step: screen with the surrogate, then correct with
/// the exact density. Proposals outside `bounds` are rejected at stage 1
/// without evaluating either density.
ChainState two_stage_step(const ChainState& state, const LogDensity& exact, const LogDensity& surrogate,
                          const Bounds& bounds, const Proposal& proposal, Rng& rng, ChainStats* stats = nullptr,
                          bool* stage1_passed = nullptr);

/// GP predictive mean restricted to the box (-inf outside). The model must
/// outlive the returned callable.
LogDensity surrogate_log_density(const GPModel& gp, const Bounds& bounds);

/// Coordinate-wise slice sampling (stepping out, shrinkage; initial width a
/// quarter of the box width) of exp(log_density) on the box. Starts at `start`,
/// discards `burn_in` sweeps and returns n states, one per sweep.
Matrix slice_sample(const LogDensity& log_density, const Bounds& bounds, const Vector& start, int n, Rng& rng,
                    int burn_in = 500);

/// Slice sampling of the surrogate, started at its best training input.
Matrix slice_sample_surrogate(const GPModel& gp, const Bounds& bounds, int n, Rng& rng, int burn_in = 500);

struct MixtureInit {
    Matrix means;      // k x R
    Vector weights;    // k
    Matrix variances;  // k x R (diagonal covariances)
    double log_likelihood = 0.0;
    int iterations = 0;

    [[nodiscard]] Eigen::Index components() const { return means.rows(); }
};

/// Diagonal-covariance Gaussian mixture by EM with k-means++ seeding.
MixtureInit fit_mixture(const Matrix& samples, int k, Rng& rng, int max_iterations = 200, double tol = 1e-6);

struct TuneResult {
    ProposalConfig proposal;
    double acceptance = 0.0;
    int iterations = 0;
    bool converged = false;  // false: best candidate returned after the iteration cap
};

/// Pilot chains of `pilot_steps` on `log_density`; sigma_p is doubled or halved
/// until the acceptance rate is bracketed, then bisected geometrically.
TuneResult tune_proposal(const LogDensity& log_density, const Vector& start, Rng& rng, double target_lo = 0.3,
                         double target_hi = 0.4, double initial_sigma = 0.05, int pilot_steps = 2000,
                         int max_iterations = 20);

TuneResult tune_proposal(const GPModel& gp, const Bounds& bounds, const Vector& start, Rng& rng,
                         double target_lo = 0.3, double target_hi = 0.4);

enum class SamplingMode { exact, two_stage, surrogate_only };

std::string_view to_string(SamplingMode mode);
SamplingMode parse_sampling_mode(std::string_view text);

struct MarkovChain {
    int chain_id = 0;
    std::uint64_t seed = 0;
    Matrix samples;                         // n_steps x R, state after each step
    Vector log_post;                        // target value of each recorded state
    std::vector<std::uint8_t> stage1_pass;  // proposal reached the exact test
    ChainStats stats;
    std::uint64_t initial_exact_evaluations = 0;

    [[nodiscard]] Eigen::Index length() const { return samples.rows(); }
};

struct ChainRunOptions {
    SamplingMode mode = SamplingMode::two_stage;
    int n_steps = 1000;
    std::uint64_t master_seed = 0;
    bool parallel = true;
};

/// Runs one chain per row of `starts`. Chain c draws from the stream
/// (master_seed, c), so results do not depend on scheduling. `surrogate` may
/// be empty for exact mode.
std::vector<MarkovChain> run_chains(const LogDensity& exact, const LogDensity& surrogate, const Bounds& bounds,
                                    const Matrix& starts, const ProposalConfig& proposal,
                                    const ChainRunOptions& options);

std::vector<MarkovChain> run_chains(const PosteriorContext& ctx, const GPModel* gp, const Matrix& starts,
                                    const ProposalConfig& proposal, const ChainRunOptions& options);

/// Drops the first floor(burn_in_frac * length) states of every chain, keeps
/// every thin-th state of the remainder and concatenates the chains.
Matrix postprocess(const std::vector<MarkovChain>& chains, double burn_in_frac = 0.25, int thin = 2);
Matrix postprocess(const std::vector<Matrix>& chains, double burn_in_frac = 0.25, int thin = 2);

}  // namespace gpmcmc
