#pragma once

#include "gpmcmc/forward_model.hpp"
#include "gpmcmc/gp_surrogate.hpp"
#include "gpmcmc/samplers.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gpmcmc::app {

/// Rectangular block of stimulated nodes, rows [i0, i1) x columns [j0, j1).
struct StimulusConfig {
    int i0 = 0;
    int i1 = 3;
    int j0 = 0;
    int j1 = 3;
    double t_on = 0.0;
    double t_off = 1.0;
    double amplitude = 1.0;
};

struct ElectrodeConfig {
    std::string layout = "circle";  // "circle" or "points"
    int count = 120;
    double radius_factor = 1.5;
    std::vector<Point2> points;
};

struct CaseConfig {
    int nx = 20;
    int ny = 20;
    double h = 0.5;
    int partition_rows = 3;
    int partition_cols = 3;
    APConstants constants;
    std::vector<double> theta_true;
    StimulusConfig stimulus;
    ElectrodeConfig electrodes;
    std::optional<std::uint64_t> lead_gain_seed;
    SimulationSettings simulation{0.1, 60.0, 50};
    double snr_db = 20.0;  // +inf for noiseless data
};

struct SurrogateConfig {
    AcquisitionConfig acquisition;
    int init_design_size = 10;
};

struct SamplingConfig {
    SamplingMode mode = SamplingMode::two_stage;
    int chains = 4;
    int steps = 5000;
    double burn_in_frac = 0.25;
    int thin = 2;
    int slice_draws = 20000;
    int slice_burn_in = 500;
    int mixture_components = 4;
    double target_acceptance_lo = 0.3;
    double target_acceptance_hi = 0.4;
    std::optional<double> sigma_p;  // skips tuning when set
};

struct ExperimentConfig {
    CaseConfig case_config;
    SurrogateConfig surrogate;
    SamplingConfig sampling;
    std::optional<std::uint64_t> seed;
    std::string output_dir = "out";

    /// Throws ConfigError naming the offending field.
    void validate() const;
    [[nodiscard]] std::uint64_t master_seed() const;
};

void to_json(nlohmann::json& j, const CaseConfig& c);
void to_json(nlohmann::json& j, const SurrogateConfig& c);
void to_json(nlohmann::json& j, const SamplingConfig& c);
void to_json(nlohmann::json& j, const ExperimentConfig& c);

/// Parses a config document. Unknown keys are rejected. Errors carry the
/// line number of the offending key when it can be located in `text`.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// 20x20 grid, 3x3 regions, one infarct block (0.5) among healthy tissue (0.15), 20 dB.
ExperimentConfig default_config();

/// Two regions split left/right, a stimulus on the shared border and four
/// leads. Cheap enough for long exact-MH baselines.
ExperimentConfig two_region_config();

/// Two regions placed mirror-symmetrically about the stimulus and the leads,
/// so swapping their parameters leaves the data unchanged.
ExperimentConfig coupled_config();

std::optional<ExperimentConfig> template_config(const std::string& name);

}  // namespace gpmcmc::app
