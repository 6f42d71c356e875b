#include "gpmcmc/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <exception>
#include <limits>
#include <random>
#include <thread>

namespace gpmcmc {

namespace {

constexpr std::uint64_t kChainStreamTag = 0xc4a1;

double checked(double value, const char* where) {
    if (std::isnan(value)) throw NumericalError(std::string(where) + ": target density returned NaN");
    return value;
}

}  // namespace

Vector GaussianProposal::draw(const Vector& current, Rng& rng) const {
    Vector out(current.size());
    for (Eigen::Index i = 0; i < current.size(); ++i) out[i] = current[i] + cfg_.sigma_p * standard_normal(rng);
    return out;
}

bool metropolis_accept(double log_ratio, Rng& rng) {
    if (std::isnan(log_ratio)) throw NumericalError("metropolis_accept: NaN acceptance ratio");
    if (log_ratio >= 0.0) return true;
    if (log_ratio == kNegInf) return false;
    return std::log(uniform01(rng)) < log_ratio;
}

double stage1_acceptance(double surr_current, double surr_proposed, double log_q_ratio) {
    return std::exp(std::min(0.0, log_q_ratio + surr_proposed - surr_current));
}

double stage2_acceptance(double exact_current, double exact_proposed, double surr_current, double surr_proposed) {
    return std::exp(std::min(0.0, (exact_proposed - exact_current) - (surr_proposed - surr_current)));
}

ChainState mh_step(const ChainState& state, const LogDensity& target, const Proposal& proposal, Rng& rng,
                   ChainStats* stats) {
    const Vector candidate = proposal.draw(state.theta, rng);
    if (stats) ++stats->proposed;
    const double lp = checked(target(candidate), "mh_step");
    double log_ratio;
    if (state.log_post_exact == kNegInf) {
        log_ratio = lp > kNegInf ? 0.0 : kNegInf;
    } else {
        log_ratio = lp - state.log_post_exact + proposal.log_q_ratio(state.theta, candidate);
    }
    if (!metropolis_accept(log_ratio, rng)) return state;
    if (stats) ++stats->accepted;
    ChainState next = state;
    next.theta = candidate;
    next.log_post_exact = lp;
    return next;
}

ChainState two_stage_step(const ChainState& state, const LogDensity& exact, const LogDensity& surrogate,
                          const Bounds& bounds, const Proposal& proposal, Rng& rng, ChainStats* stats,
                          bool* stage1_passed) {
    if (stage1_passed) *stage1_passed = false;
    const Vector candidate = proposal.draw(state.theta, rng);
    if (stats) ++stats->proposed;
    if (!bounds.contains(candidate)) {
        if (stats) {
            ++stats->out_of_bounds;
            ++stats->surrogate_rejected;
        }
        return state;
    }

    const double surr = checked(surrogate(candidate), "two_stage_step (surrogate)");
    const double log_rho_a = proposal.log_q_ratio(state.theta, candidate) + surr - state.log_post_surr;
    if (!metropolis_accept(log_rho_a, rng)) {
        if (stats) ++stats->surrogate_rejected;
        return state;
    }

    if (stage1_passed) *stage1_passed = true;
    if (stats) ++stats->exact_tested;
    const double ex = checked(exact(candidate), "two_stage_step (exact)");
    const double log_rho_e =
        ex == kNegInf ? kNegInf : (ex - state.log_post_exact) - (surr - state.log_post_surr);
    if (!metropolis_accept(log_rho_e, rng)) return state;
    if (stats) {
        ++stats->accepted;
        ++stats->exact_accepted;
    }
    return ChainState{candidate, ex, surr};
}

LogDensity surrogate_log_density(const GPModel& gp, const Bounds& bounds) {
    return [&gp, bounds](const Vector& x) { return bounds.contains(x) ? gp.predict_mean(x) : kNegInf; };
}

// ---------------------------------------------------------------------------
// Slice sampling

Matrix slice_sample(const LogDensity& log_density, const Bounds& bounds, const Vector& start, int n, Rng& rng,
                    int burn_in) {
    if (n < 1) throw ConfigError("slice_sample: n must be at least 1");
    const Eigen::Index dim = bounds.dim();
    const Vector width = 0.25 * bounds.width();
    Vector x = bounds.clamp(start);
    double fx = log_density(x);
    if (!std::isfinite(fx)) throw NumericalError("slice_sample: start has zero density");
    std::exponential_distribution<double> expo(1.0);

    Matrix out(n, dim);
    const int total = burn_in + n;
    for (int sweep = 0; sweep < total; ++sweep) {
        for (Eigen::Index d = 0; d < dim; ++d) {
            if (width[d] <= 0.0) continue;
            const double log_y = fx - expo(rng);
            auto f_at = [&](double value) {
                if (value < bounds.lower[d] || value > bounds.upper[d]) return kNegInf;
                Vector probe = x;
                probe[d] = value;
                return log_density(probe);
            };
            double left = x[d] - width[d] * uniform01(rng);
            double right = left + width[d];
            while (left >= bounds.lower[d] && f_at(left) > log_y) left -= width[d];
            while (right <= bounds.upper[d] && f_at(right) > log_y) right += width[d];

            const double x0 = x[d];
            for (int shrink = 0; shrink < 200; ++shrink) {
                const double x1 = left + uniform01(rng) * (right - left);
                const double f1 = f_at(x1);
                if (f1 > log_y) {
                    x[d] = x1;
                    fx = f1;
                    break;
                }
                if (x1 < x0) {
                    left = x1;
                } else {
                    right = x1;
                }
            }
        }
        if (sweep >= burn_in) out.row(sweep - burn_in) = x.transpose();
    }
    return out;
}

Matrix slice_sample_surrogate(const GPModel& gp, const Bounds& bounds, int n, Rng& rng, int burn_in) {
    Eigen::Index best = 0;
    gp.training().y.maxCoeff(&best);
    const Vector start = gp.training().X.row(best).transpose();
    return slice_sample(surrogate_log_density(gp, bounds), bounds, start, n, rng, burn_in);
}

// ---------------------------------------------------------------------------
// Gaussian mixture

MixtureInit fit_mixture(const Matrix& samples, int k, Rng& rng, int max_iterations, double tol) {
    const Eigen::Index n = samples.rows();
    const Eigen::Index dim = samples.cols();
    if (k < 1) throw ConfigError("fit_mixture: k must be positive");
    if (n < 10 * k) throw ConfigError("fit_mixture: need at least 10 samples per component");

    const Vector global_mean = samples.colwise().mean();
    const Vector global_var = (samples.rowwise() - global_mean.transpose()).array().square().colwise().mean();
    const Vector var_floor = (1e-9 * global_var.array() + 1e-12).matrix();
    const Vector init_var = global_var.cwiseMax(var_floor);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);

    // k-means++ seeding.
    MixtureInit mix;
    mix.means.resize(k, dim);
    mix.means.row(0) = samples.row(pick(rng));
    Vector d2 = (samples.rowwise() - mix.means.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
        const double total = d2.sum();
        Eigen::Index chosen = pick(rng);
        if (total > 0.0) {
            double target = uniform01(rng) * total;
            for (Eigen::Index i = 0; i < n; ++i) {
                target -= d2[i];
                if (target <= 0.0) {
                    chosen = i;
                    break;
                }
            }
        }
        mix.means.row(c) = samples.row(chosen);
        d2 = d2.cwiseMin((samples.rowwise() - mix.means.row(c)).rowwise().squaredNorm());
    }
    mix.variances = init_var.transpose().replicate(k, 1);
    mix.weights = Vector::Constant(k, 1.0 / k);

    Matrix log_resp(n, k);
    double prev_ll = -std::numeric_limits<double>::infinity();
    int reseeds = 0;
    const double log_2pi = std::log(2.0 * std::numbers::pi);
    for (int iter = 0; iter < max_iterations; ++iter) {
        mix.iterations = iter + 1;
        // E step
        for (int c = 0; c < k; ++c) {
            const Vector inv_var = mix.variances.row(c).transpose().cwiseInverse();
            const double log_norm = std::log(mix.weights[c]) -
                                    0.5 * (mix.variances.row(c).array().log().sum() + static_cast<double>(dim) * log_2pi);
            log_resp.col(c) = ((samples.rowwise() - mix.means.row(c)).array().square().matrix() * inv_var * -0.5).array() +
                              log_norm;
        }
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double m = log_resp.row(i).maxCoeff();
            const double lse = m + std::log((log_resp.row(i).array() - m).exp().sum());
            log_resp.row(i).array() -= lse;
            ll += lse;
        }
        mix.log_likelihood = ll;
        const Matrix resp = log_resp.array().exp();

        // M step
        bool reseeded = false;
        for (int c = 0; c < k; ++c) {
            const double nk = resp.col(c).sum();
            if (nk < 1e-8 * static_cast<double>(n)) {
                if (++reseeds > 5) throw NumericalError("fit_mixture: component stayed empty after 5 re-seeds");
                mix.means.row(c) = samples.row(pick(rng));
                mix.variances.row(c) = init_var.transpose();
                mix.weights[c] = 1.0 / k;
                reseeded = true;
                continue;
            }
            const Vector mean = (resp.col(c).transpose() * samples).transpose() / nk;
            const Vector var =
                (resp.col(c).transpose() * (samples.rowwise() - mean.transpose()).array().square().matrix()).transpose() / nk;
            mix.means.row(c) = mean.transpose();
            mix.variances.row(c) = var.cwiseMax(var_floor).transpose();
            mix.weights[c] = nk / static_cast<double>(n);
        }
        mix.weights /= mix.weights.sum();
        if (reseeded) {
            prev_ll = -std::numeric_limits<double>::infinity();
            continue;
        }
        if (std::abs(ll - prev_ll) / static_cast<double>(n) <= tol) break;
        prev_ll = ll;
    }
    return mix;
}

// ---------------------------------------------------------------------------
// Proposal tuning

TuneResult tune_proposal(const LogDensity& log_density, const Vector& start, Rng& rng, double target_lo,
                         double target_hi, double initial_sigma, int pilot_steps, int max_iterations) {
    if (!(target_lo < target_hi) || !(initial_sigma > 0.0) || pilot_steps < 1)
        throw ConfigError("tune_proposal: invalid tuning settings");
    const double start_value = log_density(start);
    if (!std::isfinite(start_value)) throw NumericalError("tune_proposal: start has zero density");

    auto pilot = [&](double sigma) {
        GaussianProposal proposal(ProposalConfig{sigma});
        ChainState state{start, start_value, start_value};
        ChainStats stats;
        for (int s = 0; s < pilot_steps; ++s) state = mh_step(state, log_density, proposal, rng, &stats);
        return stats.acceptance_rate();
    };
    auto miss = [&](double rate) { return rate < target_lo ? target_lo - rate : (rate > target_hi ? rate - target_hi : 0.0); };

    TuneResult best;
    best.proposal.sigma_p = initial_sigma;
    double best_miss = std::numeric_limits<double>::infinity();
    double too_small = 0.0;  // largest sigma seen with acceptance above target
    double too_large = 0.0;  // smallest sigma seen with acceptance below target
    double sigma = initial_sigma;
    for (int it = 1; it <= max_iterations; ++it) {
        const double rate = pilot(sigma);
        if (miss(rate) < best_miss) {
            best_miss = miss(rate);
            best.proposal.sigma_p = sigma;
            best.acceptance = rate;
        }
        best.iterations = it;
        if (rate >= target_lo && rate <= target_hi) {
            best.converged = true;
            return best;
        }
        if (rate > target_hi) {
            too_small = std::max(too_small, sigma);
        } else {
            too_large = too_large > 0.0 ? std::min(too_large, sigma) : sigma;
        }
        if (too_small > 0.0 && too_large > 0.0) {
            sigma = std::sqrt(too_small * too_large);
        } else {
            sigma = rate > target_hi ? 2.0 * sigma : 0.5 * sigma;
        }
    }
    return best;
}

TuneResult tune_proposal(const GPModel& gp, const Bounds& bounds, const Vector& start, Rng& rng, double target_lo,
                         double target_hi) {
    return tune_proposal(surrogate_log_density(gp, bounds), start, rng, target_lo, target_hi,
                         0.1 * bounds.width().mean());
}

// ---------------------------------------------------------------------------
// Chains

std::string_view to_string(SamplingMode mode) {
    switch (mode) {
        case SamplingMode::exact: return "exact";
        case SamplingMode::two_stage: return "two-stage";
        case SamplingMode::surrogate_only: return "surrogate-only";
    }
    return "unknown";
}

SamplingMode parse_sampling_mode(std::string_view text) {
    if (text == "exact") return SamplingMode::exact;
    if (text == "two-stage" || text == "two_stage") return SamplingMode::two_stage;
    if (text == "surrogate-only" || text == "surrogate_only") return SamplingMode::surrogate_only;
    throw ConfigError("unknown sampling mode '" + std::string(text) + "'");
}

namespace {

MarkovChain run_single_chain(int chain_id, const LogDensity& exact, const LogDensity& surrogate, const Bounds& bounds,
                             const Vector& start, const ProposalConfig& proposal_cfg, const ChainRunOptions& options) {
    MarkovChain chain;
    chain.chain_id = chain_id;
    chain.seed = options.master_seed;
    Rng rng = make_stream(options.master_seed, static_cast<std::uint64_t>(chain_id), kChainStreamTag);
    const GaussianProposal proposal(proposal_cfg);
    const Eigen::Index dim = start.size();
    chain.samples.resize(options.n_steps, dim);
    chain.log_post.resize(options.n_steps);
    chain.stage1_pass.assign(static_cast<std::size_t>(options.n_steps), 0);

    ChainStats& stats = chain.stats;
    const LogDensity counted_exact = [&](const Vector& x) {
        if (!bounds.contains(x)) {
            ++stats.out_of_bounds;
            return kNegInf;
        }
        ++stats.exact_tested;
        return exact(x);
    };

    const LogDensity counted_surrogate = [&](const Vector& x) {
        if (!bounds.contains(x)) {
            ++stats.out_of_bounds;
            return kNegInf;
        }
        return surrogate(x);
    };

    ChainState state;
    state.theta = start;
    if (!bounds.contains(start)) throw ConfigError("run_chains: start point outside bounds");
    switch (options.mode) {
        case SamplingMode::exact:
            state.log_post_exact = exact(start);
            chain.initial_exact_evaluations = 1;
            break;
        case SamplingMode::two_stage:
            state.log_post_exact = exact(start);
            state.log_post_surr = surrogate(start);
            chain.initial_exact_evaluations = 1;
            if (!std::isfinite(state.log_post_surr)) throw NumericalError("run_chains: surrogate is not finite at the start");
            break;
        case SamplingMode::surrogate_only:
            state.log_post_surr = surrogate(start);
            // mh_step keeps its target value in log_post_exact.
            state.log_post_exact = state.log_post_surr;
            break;
    }
    if (!std::isfinite(state.log_post_exact)) throw NumericalError("run_chains: start point has zero density");

    for (int step = 0; step < options.n_steps; ++step) {
        bool passed = false;
        switch (options.mode) {
            case SamplingMode::exact: {
                const auto before = stats.exact_tested;
                state = mh_step(state, counted_exact, proposal, rng, &stats);
                passed = stats.exact_tested != before;
                break;
            }
            case SamplingMode::two_stage:
                state = two_stage_step(state, exact, surrogate, bounds, proposal, rng, &stats, &passed);
                break;
            case SamplingMode::surrogate_only:
                state = mh_step(state, counted_surrogate, proposal, rng, &stats);
                break;
        }
        chain.samples.row(step) = state.theta.transpose();
        chain.log_post[step] = state.log_post_exact;
        chain.stage1_pass[static_cast<std::size_t>(step)] = passed ? 1 : 0;
    }
    if (options.mode == SamplingMode::exact) stats.exact_accepted = stats.accepted;
    if (options.mode == SamplingMode::surrogate_only) stats.surrogate_rejected = stats.proposed - stats.accepted;
    return chain;
}

}  // namespace

std::vector<MarkovChain> run_chains(const LogDensity& exact, const LogDensity& surrogate, const Bounds& bounds,
                                    const Matrix& starts, const ProposalConfig& proposal,
                                    const ChainRunOptions& options) {
    proposal.validate();
    if (options.n_steps < 1) throw ConfigError("run_chains: n_steps must be positive");
    if (starts.rows() < 1 || starts.cols() != bounds.dim()) throw ConfigError("run_chains: invalid start points");
    if (options.mode != SamplingMode::surrogate_only && !exact) throw ConfigError("run_chains: exact density missing");
    if (options.mode != SamplingMode::exact && !surrogate) throw ConfigError("run_chains: surrogate missing");

    const auto k = static_cast<std::size_t>(starts.rows());
    std::vector<MarkovChain> chains(k);
    std::vector<std::exception_ptr> errors(k);
    auto work = [&](std::size_t c) {
        try {
            chains[c] = run_single_chain(static_cast<int>(c), exact, surrogate, bounds, starts.row(static_cast<Eigen::Index>(c)).transpose(),
                                         proposal, options);
        } catch (...) {
            errors[c] = std::current_exception();
        }
    };
    if (options.parallel && k > 1) {
        std::vector<std::jthread> workers;
        workers.reserve(k);
        for (std::size_t c = 0; c < k; ++c) workers.emplace_back(work, c);
    } else {
        for (std::size_t c = 0; c < k; ++c) work(c);
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (!errors[c]) continue;
        const std::string prefix = "chain " + std::to_string(c) + ": ";
        try {
            std::rethrow_exception(errors[c]);
        } catch (const ConfigError& e) {
            throw ConfigError(prefix + e.what());
        } catch (const std::exception& e) {
            throw NumericalError(prefix + e.what());
        }
    }
    return chains;
}

std::vector<MarkovChain> run_chains(const PosteriorContext& ctx, const GPModel* gp, const Matrix& starts,
                                    const ProposalConfig& proposal, const ChainRunOptions& options) {
    LogDensity surrogate;
    if (gp) surrogate = surrogate_log_density(*gp, ctx.bounds());
    return run_chains(ctx.as_log_density(), surrogate, ctx.bounds(), starts, proposal, options);
}

Matrix postprocess(const std::vector<Matrix>& chains, double burn_in_frac, int thin) {
    if (!(burn_in_frac >= 0.0 && burn_in_frac < 1.0)) throw ConfigError("postprocess: burn_in_frac must be in [0, 1)");
    if (thin < 1) throw ConfigError("postprocess: thin must be at least 1");
    if (chains.empty()) throw ConfigError("postprocess: no chains");
    Eigen::Index total = 0;
    std::vector<Eigen::Index> burn(chains.size());
    for (std::size_t c = 0; c < chains.size(); ++c) {
        burn[c] = static_cast<Eigen::Index>(std::floor(burn_in_frac * static_cast<double>(chains[c].rows())));
        const Eigen::Index kept = chains[c].rows() - burn[c];
        total += kept > 0 ? (kept + thin - 1) / thin : 0;
    }
    if (total == 0) throw ConfigError("postprocess: no samples remain after burn-in and thinning");
    Matrix pooled(total, chains.front().cols());
    Eigen::Index row = 0;
    for (std::size_t c = 0; c < chains.size(); ++c) {
        for (Eigen::Index i = burn[c]; i < chains[c].rows(); i += thin) pooled.row(row++) = chains[c].row(i);
    }
    return pooled;
}

Matrix postprocess(const std::vector<MarkovChain>& chains, double burn_in_frac, int thin) {
    std::vector<Matrix> samples;
    samples.reserve(chains.size());
    for (const auto& c : chains) samples.push_back(c.samples);
    return postprocess(samples, burn_in_frac, thin);
}

}  // namespace gpmcmc
