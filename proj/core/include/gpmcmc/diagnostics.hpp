#pragma once

#include "gpmcmc/forward_model.hpp"
#include "gpmcmc/types.hpp"

#include <optional>
#include <vector>

namespace gpmcmc {

/// Geweke z-score per parameter comparing the first frac_a and the last frac_b
/// of the chain (rows = draws). Variances of the segment means come from
/// non-overlapping batch means. A zero denominator with equal means gives 0.
Vector geweke(const Matrix& chain, double frac_a = 0.1, double frac_b = 0.5, int batches = 20);

/// Split-chain potential scale reduction per parameter. Each chain is cut into
/// two halves; R̂ = sqrt(((n-1)/n W + B/n) / W), floored at 1. W = 0 gives 1,
/// or +inf when the constant chains disagree.
Vector gelman_rubin(const std::vector<Matrix>& chains);

struct AutocorrResult {
    Vector acf;  // lags 0..max_lag
    double ess = 0.0;
};

/// Autocorrelation by direct sums and ESS = n / (1 + 2 Σ ρ_k), summing until
/// the first negative ρ_k. ESS is clamped to [1, n].
AutocorrResult autocorr_ess(const Vector& trace, int max_lag = 50);

struct DiagnosticsReport {
    Matrix geweke_z;  // chains x R
    Vector rhat;      // R
    Vector ess;       // R, summed over chains
    Matrix acf;       // R x (lags + 1), averaged over chains
    Eigen::Index total_samples = 0;
    bool converged = false;  // all |z| < 2 and all R̂ < 1.1
};

/// Drops burn-in from each chain, then runs Geweke, split R̂ and ESS.
DiagnosticsReport diagnose(const std::vector<Matrix>& chains, double burn_in_frac = 0.25);

struct KdeGrid {
    Vector x;
    Vector density;
};

/// Gaussian KDE with Silverman's bandwidth evaluated on `points` grid nodes.
KdeGrid kde(const Vector& samples, double lo, double hi, int points = 512);

/// Local maxima of a gridded density, highest first.
std::vector<Eigen::Index> kde_peaks(const KdeGrid& grid);

inline constexpr double kBimodalPeakRatio = 0.5;

struct PosteriorSummary {
    Vector mean;
    Vector mode;
    Vector std;
    std::vector<bool> bimodal;
    Matrix correlation;
    std::vector<KdeGrid> kde;
    // Per-node maps; empty without a partition.
    std::vector<double> mean_map;
    std::vector<double> mode_map;
    std::vector<double> std_map;
};

/// Per-parameter mean, std and KDE mode (grid over [lo, hi]), bimodality flags
/// (second KDE peak at least half the highest), correlations and, when a
/// partition is given, per-node maps.
PosteriorSummary summarize(const Matrix& pooled, const RegionPartition* partition = nullptr,
                           double lo = kExcitabilityMin, double hi = kExcitabilityMax);

/// Sample correlation between the traces of parameters i and j (0 when either
/// trace is constant). Strongly negative values together with bimodal
/// marginals indicate switching between coupled parameters.
double switching_score(const Matrix& chain, Eigen::Index i, Eigen::Index j);

}  // namespace gpmcmc
