#pragma once

// Two-variable Aliev-Panfilov reaction-diffusion model on a 2D grid with
// no-flux boundaries, plus a linear lead-field measurement model.

#include "gpmcmc/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace gpmcmc {

/// Regular nx-by-ny grid with spacing h. Node (i, j) has index i * ny + j and
/// sits at position (i * h, j * h).
struct GridGeometry {
    int nx = 0;
    int ny = 0;
    double h = 1.0;

    [[nodiscard]] int node_count() const { return nx * ny; }
    [[nodiscard]] int index(int i, int j) const { return i * ny + j; }
    [[nodiscard]] int neighbor_count(int node) const;
    [[nodiscard]] bool is_boundary(int node) const { return neighbor_count(node) < 4; }

    /// 5-point Laplacian with zero-Neumann boundaries: sum over existing
    /// neighbours of (u_nb - u_n) / h^2. Annihilates constant fields.
    void laplacian(std::span<const double> u, std::span<double> out) const;
};

GridGeometry build_grid(int nx, int ny, double h);

struct RegionPartition {
    std::vector<int> region_of_node;
    int region_count = 0;

    /// Nodes belonging to each region.
    [[nodiscard]] std::vector<std::vector<int>> members() const;
};

/// rows x cols contiguous rectangular blocks; region id = block_row * cols + block_col.
RegionPartition partition_grid(const GridGeometry& grid, int rows, int cols);

/// Per-node excitability field: a[n] = theta[region_of_node[n]].
std::vector<double> expand_parameters(std::span<const double> theta, const RegionPartition& partition);

/// Model constants shared by all nodes. ε(u, v) = e0 + mu1 * v / (u + mu2).
struct APConstants {
    double k = 8.0;
    double d = 0.1;
    double e0 = 0.002;
    double mu1 = 0.2;
    double mu2 = 0.3;

    void validate() const;
};

struct APParams {
    APConstants constants;
    std::vector<double> a_field;

    void validate(int node_count) const;
};

struct StimulusProtocol {
    std::vector<int> nodes;
    double t_on = 0.0;
    double t_off = 1.0;
    double amplitude = 1.0;

    void validate(int node_count) const;
    [[nodiscard]] bool active(double t) const { return t >= t_on && t < t_off; }
};

/// Square block of side `size` in the (0, 0) corner, active for [0, 1) with amplitude 1.
StimulusProtocol corner_stimulus(const GridGeometry& grid, int size = 3);

struct SimulationResult {
    Matrix u;  // stored_steps x N
    Matrix v;  // stored_steps x N
    double dt = 0.0;
    int store_every = 1;

    [[nodiscard]] Eigen::Index stored_steps() const { return u.rows(); }
};

struct SimulationSettings {
    double dt = 0.05;
    double t_end = 40.0;
    int store_every = 20;
};

/// Explicit Euler integration from u = v = 0. Row s of the result holds the
/// state after (s + 1) * store_every steps.
SimulationResult simulate_ap(const GridGeometry& grid, const APParams& params, const StimulusProtocol& stim,
                             const SimulationSettings& settings);

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct LeadField {
    Matrix H;  // L x N

    [[nodiscard]] Eigen::Index lead_count() const { return H.rows(); }
};

/// H[l][n] = g_l / (|e_l - p_n| + h). g_l = 1 without a seed; with a seed each
/// lead receives a fixed gain drawn from U[0.9, 1.1].
LeadField build_lead_field(const GridGeometry& grid, std::span<const Point2> electrodes,
                           std::optional<std::uint64_t> seed = std::nullopt);

/// `count` electrodes evenly spaced on a circle around the grid centre with
/// radius radius_factor times the half-diagonal of the grid (>= 1 keeps them outside).
std::vector<Point2> electrodes_on_circle(const GridGeometry& grid, int count, double radius_factor = 1.5);

struct Observation {
    Matrix Y;  // L x T
    std::optional<double> snr_db;
};

/// Y[:, t] = H u[t, :]^T.
Observation measure_ecg(const SimulationResult& sim, const LeadField& lead_field);
Matrix measure_ecg(const Matrix& u, const LeadField& lead_field);

/// Additive iid Gaussian noise with variance mean(Y^2) * 10^(-snr_db / 10).
/// An infinite snr_db leaves Y unchanged.
Observation add_noise(const Observation& clean, double snr_db, std::uint64_t seed);

}  // namespace gpmcmc
