#include "gpmcmc/forward_model.hpp"

#include "gpmcmc/rng.hpp"

#include <cmath>
#include <numbers>
#include <limits>
#include <random>
#include <string>

namespace gpmcmc {

int GridGeometry::neighbor_count(int node) const {
    const int i = node / ny;
    const int j = node % ny;
    return (i > 0) + (i + 1 < nx) + (j > 0) + (j + 1 < ny);
}

void GridGeometry::laplacian(std::span<const double> u, std::span<double> out) const {
    const double inv_h2 = 1.0 / (h * h);
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            const int n = index(i, j);
            const double c = u[n];
            double acc = 0.0;
            if (i > 0) acc += u[n - ny] - c;
            if (i + 1 < nx) acc += u[n + ny] - c;
            if (j > 0) acc += u[n - 1] - c;
            if (j + 1 < ny) acc += u[n + 1] - c;
            out[n] = acc * inv_h2;
        }
    }
}

GridGeometry build_grid(int nx, int ny, double h) {
    if (nx < 2 || ny < 2) throw ConfigError("build_grid: nx and ny must be at least 2");
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("build_grid: spacing h must be positive");
    return GridGeometry{nx, ny, h};
}

std::vector<std::vector<int>> RegionPartition::members() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(region_count));
    for (std::size_t n = 0; n < region_of_node.size(); ++n) {
        out[static_cast<std::size_t>(region_of_node[n])].push_back(static_cast<int>(n));
    }
    return out;
}

RegionPartition partition_grid(const GridGeometry& grid, int rows, int cols) {
    if (rows < 1 || cols < 1 || rows > grid.nx || cols > grid.ny)
        throw ConfigError("partition_grid: need 1 <= rows <= nx and 1 <= cols <= ny");
    RegionPartition p;
    p.region_count = rows * cols;
    p.region_of_node.resize(static_cast<std::size_t>(grid.node_count()));
    for (int i = 0; i < grid.nx; ++i) {
        const int bi = i * rows / grid.nx;
        for (int j = 0; j < grid.ny; ++j) {
            const int bj = j * cols / grid.ny;
            p.region_of_node[static_cast<std::size_t>(grid.index(i, j))] = bi * cols + bj;
        }
    }
    return p;
}

std::vector<double> expand_parameters(std::span<const double> theta, const RegionPartition& partition) {
    if (theta.size() != static_cast<std::size_t>(partition.region_count))
        throw ConfigError("expand_parameters: theta has " + std::to_string(theta.size()) + " entries, partition has " +
                          std::to_string(partition.region_count) + " regions");
    for (double a : theta) {
        if (!(a >= kExcitabilityMin && a <= kExcitabilityMax))
            throw ConfigError("expand_parameters: entry " + std::to_string(a) + " outside [0, 0.52]");
    }
    std::vector<double> field(partition.region_of_node.size());
    for (std::size_t n = 0; n < field.size(); ++n) {
        field[n] = theta[static_cast<std::size_t>(partition.region_of_node[n])];
    }
    return field;
}

void APConstants::validate() const {
    if (!(k > 0.0) || !(d >= 0.0) || !(e0 > 0.0) || !(mu1 >= 0.0) || !(mu2 > 0.0))
        throw ConfigError("APConstants: require k > 0, d >= 0, e0 > 0, mu1 >= 0, mu2 > 0");
}

void APParams::validate(int node_count) const {
    constants.validate();
    if (a_field.size() != static_cast<std::size_t>(node_count))
        throw ConfigError("APParams: a_field length does not match node count");
    for (double a : a_field) {
        if (!(a >= kExcitabilityMin && a <= kExcitabilityMax))
            throw ConfigError("APParams: a_field entry outside [0, 0.52]");
    }
}

void StimulusProtocol::validate(int node_count) const {
    if (nodes.empty()) throw ConfigError("StimulusProtocol: stimulus node set is empty");
    for (int n : nodes) {
        if (n < 0 || n >= node_count) throw ConfigError("StimulusProtocol: node index out of range");
    }
    if (!(t_on >= 0.0) || !(t_off > t_on)) throw ConfigError("StimulusProtocol: require t_off > t_on >= 0");
    if (!(amplitude > 0.0)) throw ConfigError("StimulusProtocol: amplitude must be positive");
}

StimulusProtocol corner_stimulus(const GridGeometry& grid, int size) {
    StimulusProtocol stim;
    for (int i = 0; i < std::min(size, grid.nx); ++i) {
        for (int j = 0; j < std::min(size, grid.ny); ++j) stim.nodes.push_back(grid.index(i, j));
    }
    return stim;
}

SimulationResult simulate_ap(const GridGeometry& grid, const APParams& params, const StimulusProtocol& stim,
                             const SimulationSettings& settings) {
    const int n_nodes = grid.node_count();
    params.validate(n_nodes);
    stim.validate(n_nodes);
    const auto& c = params.constants;
    if (!(settings.dt > 0.0) || !(settings.t_end > 0.0) || settings.store_every < 1)
        throw ConfigError("simulate_ap: require dt > 0, t_end > 0, store_every >= 1");
    if (c.d > 0.0 && settings.dt > grid.h * grid.h / (4.0 * c.d))
        throw ConfigError("simulate_ap: dt " + std::to_string(settings.dt) + " violates diffusion stability bound " +
                          std::to_string(grid.h * grid.h / (4.0 * c.d)));

    const long total_steps = std::lround(settings.t_end / settings.dt);
    if (total_steps < settings.store_every) throw ConfigError("simulate_ap: t_end shorter than one storage interval");
    const long stored = total_steps / settings.store_every;

    std::vector<double> stim_amp(static_cast<std::size_t>(n_nodes), 0.0);
    for (int n : stim.nodes) stim_amp[static_cast<std::size_t>(n)] = stim.amplitude;

    SimulationResult result;
    result.dt = settings.dt;
    result.store_every = settings.store_every;
    result.u.resize(stored, n_nodes);
    result.v.resize(stored, n_nodes);

    std::vector<double> u(static_cast<std::size_t>(n_nodes), 0.0);
    std::vector<double> v(static_cast<std::size_t>(n_nodes), 0.0);
    std::vector<double> lap(static_cast<std::size_t>(n_nodes), 0.0);
    const double dt = settings.dt;
    const bool diffuse = c.d > 0.0;

    long row = 0;
    for (long step = 0; step < total_steps; ++step) {
        const double t = static_cast<double>(step) * dt;
        const bool stim_on = stim.active(t);
        if (diffuse) grid.laplacian(u, lap);
        double checksum = 0.0;
        for (std::size_t n = 0; n < u.size(); ++n) {
            const double un = u[n];
            const double vn = v[n];
            const double a = params.a_field[n];
            double du = -c.k * un * (un - a) * (un - 1.0) - un * vn;
            if (diffuse) du += c.d * lap[n];
            if (stim_on) du += stim_amp[n];
            const double eps = c.e0 + c.mu1 * vn / (un + c.mu2);
            const double dv = eps * (-vn - c.k * un * (un - a - 1.0));
            u[n] = un + dt * du;
            v[n] = vn + dt * dv;
            checksum += u[n] + v[n];
        }
        if (!std::isfinite(checksum))
            throw NumericalError("simulate_ap: non-finite state at step " + std::to_string(step + 1));
        if ((step + 1) % settings.store_every == 0 && row < stored) {
            for (int n = 0; n < n_nodes; ++n) {
                result.u(row, n) = u[static_cast<std::size_t>(n)];
                result.v(row, n) = v[static_cast<std::size_t>(n)];
            }
            ++row;
        }
    }
    return result;
}

LeadField build_lead_field(const GridGeometry& grid, std::span<const Point2> electrodes,
                           std::optional<std::uint64_t> seed) {
    if (electrodes.empty()) throw ConfigError("build_lead_field: electrode list is empty");
    const double x_max = (grid.nx - 1) * grid.h;
    const double y_max = (grid.ny - 1) * grid.h;
    for (const auto& e : electrodes) {
        if (!std::isfinite(e.x) || !std::isfinite(e.y)) throw ConfigError("build_lead_field: non-finite electrode");
        const bool strictly_inside = e.x > 0.0 && e.x < x_max && e.y > 0.0 && e.y < y_max;
        if (strictly_inside) throw ConfigError("build_lead_field: electrode lies inside the grid bounding box");
    }
    std::vector<double> gain(electrodes.size(), 1.0);
    if (seed) {
        Rng rng = make_stream(*seed, 0, 0x1eadu);
        std::uniform_real_distribution<double> dist(0.9, 1.1);
        for (double& g : gain) g = dist(rng);
    }
    LeadField lf;
    const int n_nodes = grid.node_count();
    lf.H.resize(static_cast<Eigen::Index>(electrodes.size()), n_nodes);
    for (std::size_t l = 0; l < electrodes.size(); ++l) {
        for (int i = 0; i < grid.nx; ++i) {
            for (int j = 0; j < grid.ny; ++j) {
                const double dx = electrodes[l].x - i * grid.h;
                const double dy = electrodes[l].y - j * grid.h;
                lf.H(static_cast<Eigen::Index>(l), grid.index(i, j)) = gain[l] / (std::hypot(dx, dy) + grid.h);
            }
        }
    }
    return lf;
}

std::vector<Point2> electrodes_on_circle(const GridGeometry& grid, int count, double radius_factor) {
    if (count < 1) throw ConfigError("electrodes_on_circle: count must be positive");
    const double cx = 0.5 * (grid.nx - 1) * grid.h;
    const double cy = 0.5 * (grid.ny - 1) * grid.h;
    const double radius = radius_factor * std::hypot(cx, cy);
    std::vector<Point2> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int l = 0; l < count; ++l) {
        const double phi = 2.0 * std::numbers::pi * l / count;
        out.push_back({cx + radius * std::cos(phi), cy + radius * std::sin(phi)});
    }
    return out;
}

Matrix measure_ecg(const Matrix& u, const LeadField& lead_field) {
    if (lead_field.H.cols() != u.cols())
        throw ConfigError("measure_ecg: lead field has " + std::to_string(lead_field.H.cols()) +
                          " columns but the field has " + std::to_string(u.cols()) + " nodes");
    return lead_field.H * u.transpose();
}

Observation measure_ecg(const SimulationResult& sim, const LeadField& lead_field) {
    return Observation{measure_ecg(sim.u, lead_field), std::nullopt};
}

Observation add_noise(const Observation& clean, double snr_db, std::uint64_t seed) {
    if (clean.Y.size() == 0) throw ConfigError("add_noise: empty observation");
    if (!clean.Y.allFinite()) throw NumericalError("add_noise: observation contains non-finite values");
    Observation out = clean;
    out.snr_db = snr_db;
    if (std::isinf(snr_db) && snr_db > 0.0) return out;
    const double power = clean.Y.array().square().mean();
    const double sigma = std::sqrt(power * std::pow(10.0, -snr_db / 10.0));
    Rng rng = make_stream(seed, 0, 0x9015eu);
    std::normal_distribution<double> noise(0.0, sigma);
    // Column-major traversal fixes the draw order.
    for (Eigen::Index t = 0; t < out.Y.cols(); ++t) {
        for (Eigen::Index l = 0; l < out.Y.rows(); ++l) out.Y(l, t) += noise(rng);
    }
    return out;
}

}  // namespace gpmcmc
