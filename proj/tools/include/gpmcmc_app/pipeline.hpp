#pragma once

#include "gpmcmc/diagnostics.hpp"
#include "gpmcmc/gp_surrogate.hpp"
#include "gpmcmc/posterior.hpp"
#include "gpmcmc/samplers.hpp"
#include "gpmcmc_app/config.hpp"
#include "gpmcmc_app/io.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gpmcmc::app {

/// Purpose tags for seeds derived from the master seed.
enum class SeedTag : std::uint64_t { noise = 1, surrogate = 2, tune = 3, slice = 4, mixture = 5 };

std::uint64_t derived_seed(std::uint64_t master, SeedTag tag);

struct CaseBundle {
    GridGeometry grid;
    RegionPartition partition;
    StimulusProtocol stimulus;
    std::vector<Point2> electrodes;
    LeadField lead_field;
    Vector theta_true;
    std::vector<double> a_field;
    Observation y_clean;
    Observation y_noisy;
    double sigma_e = 0.0;
    std::uint64_t noise_seed = 0;

    [[nodiscard]] ForwardPipeline pipeline(const CaseConfig& c) const;
};

/// Geometry, lead field and stimulus for a case, without running the model.
CaseBundle build_geometry(const CaseConfig& c);

/// Full synthetic case: ground-truth simulation, clean and noisy leads.
CaseBundle build_case(const ExperimentConfig& cfg);

std::unique_ptr<PosteriorContext> make_posterior(const CaseBundle& bundle, const CaseConfig& c);

SurrogateBuild run_surrogate(const PosteriorContext& ctx, const ExperimentConfig& cfg);

struct SamplingPlan {
    ProposalConfig proposal;
    std::optional<TuneResult> tune;  // empty when sigma_p was fixed in the config
    MixtureInit mixture;
    Matrix starts;  // chains x R, mixture means
};

/// Proposal tuning on the surrogate, slice sampling of the surrogate, mixture
/// fit and chain starts. Depends only on the surrogate and the seed, so all
/// modes share one plan.
SamplingPlan plan_sampling(const GPModel& gp, const Bounds& bounds, const ExperimentConfig& cfg);

struct SamplingRun {
    SamplingMode mode = SamplingMode::two_stage;
    std::vector<MarkovChain> chains;
    Matrix pooled;
    std::uint64_t exact_evaluations = 0;  // during sampling, read from the posterior counter
    double wall_seconds = 0.0;
    DiagnosticsReport diagnostics;
    PosteriorSummary summary;
};

/// Runs the chains for one mode and post-processes them. Throws NumericalError
/// when the posterior counter disagrees with the per-chain statistics.
SamplingRun run_sampling(PosteriorContext& ctx, const GPModel& gp, const SamplingPlan& plan,
                         const ExperimentConfig& cfg, SamplingMode mode);

struct ModeComparison {
    SamplingMode mode = SamplingMode::exact;
    Eigen::Index pooled_samples = 0;
    std::uint64_t sampling_evaluations = 0;
    std::uint64_t surrogate_evaluations = 0;  // construction overhead, 0 for exact
    double wall_seconds = 0.0;
    Vector d_mean;
    Vector d_mode;
    Vector d_std;

    [[nodiscard]] std::uint64_t total_evaluations() const { return sampling_evaluations + surrogate_evaluations; }
};

struct ComparisonReport {
    std::vector<ModeComparison> modes;  // exact first
    double two_stage_reduction = 0.0;   // 1 - total(two-stage) / total(exact), NaN without a two-stage run
};

/// Deltas against the exact baseline. Every run must have the baseline's pooled-sample count.
ComparisonReport compare_runs(const SamplingRun& baseline, const std::vector<const SamplingRun*>& others,
                              std::uint64_t surrogate_evaluations);

// Disk layout and commands -------------------------------------------------

struct Paths {
    fs::path root;

    [[nodiscard]] fs::path case_dir() const { return root / "case"; }
    [[nodiscard]] fs::path surrogate_dir() const { return root / "surrogate"; }
    [[nodiscard]] fs::path checkpoint() const { return surrogate_dir() / "checkpoint.json"; }
    [[nodiscard]] fs::path samples_dir(SamplingMode mode) const { return root / "samples" / std::string(to_string(mode)); }
    [[nodiscard]] fs::path compare_dir() const { return root / "compare"; }
};

nlohmann::json checkpoint_json(const GPModel& gp, const SurrogateBuild& build);
GPModel load_checkpoint(const fs::path& path);

/// Reloads the case written by cmd_simulate; throws ConfigError when it was
/// produced from a different case definition.
CaseBundle load_case(const Paths& paths, const ExperimentConfig& cfg);

struct CommandResult {
    bool converged = true;
    std::string message;
};

CommandResult cmd_simulate(const ExperimentConfig& cfg);
CommandResult cmd_build_surrogate(const ExperimentConfig& cfg);
CommandResult cmd_sample(const ExperimentConfig& cfg, SamplingMode mode);
CommandResult cmd_diagnose(const ExperimentConfig& cfg, SamplingMode mode);
/// `run_missing` runs any mode whose samples are absent instead of failing.
CommandResult cmd_compare(const ExperimentConfig& cfg, bool run_missing);

}  // namespace gpmcmc::app
