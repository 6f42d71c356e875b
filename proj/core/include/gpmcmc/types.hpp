#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gpmcmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Invalid input or configuration. Maps to CLI exit code 1.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure (non-finite state, failed factorization). Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Axis-aligned closed box [lower, upper] in parameter space.
struct Bounds {
    Vector lower;
    Vector upper;

    static Bounds uniform(Eigen::Index dim, double lo, double hi) {
        return {Vector::Constant(dim, lo), Vector::Constant(dim, hi)};
    }

    [[nodiscard]] Eigen::Index dim() const { return lower.size(); }
    [[nodiscard]] Vector width() const { return upper - lower; }
    [[nodiscard]] Vector center() const { return 0.5 * (lower + upper); }
    [[nodiscard]] double diagonal() const { return width().norm(); }

    [[nodiscard]] bool contains(const Vector& x) const {
        if (x.size() != lower.size()) return false;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
        }
        return true;
    }

    [[nodiscard]] Vector clamp(const Vector& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

    void validate() const {
        if (lower.size() == 0 || lower.size() != upper.size())
            throw ConfigError("bounds: lower/upper must be non-empty and of equal length");
        for (Eigen::Index i = 0; i < lower.size(); ++i) {
            if (!(lower[i] <= upper[i])) throw ConfigError("bounds: lower must not exceed upper");
        }
    }
};

/// Prior support of the excitability parameter.
inline constexpr double kExcitabilityMin = 0.0;
inline constexpr double kExcitabilityMax = 0.52;

}  // namespace gpmcmc
