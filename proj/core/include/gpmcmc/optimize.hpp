#pragma once

#include "gpmcmc/rng.hpp"
#include "gpmcmc/types.hpp"

#include <functional>

namespace gpmcmc {

struct NelderMeadOptions {
    int max_evals = 400;
    double initial_step = 0.1;  // fraction of the box width per axis
    double xtol = 1e-7;         // simplex extent, relative to the box width
    double ftol = 1e-10;
};

struct OptimResult {
    Vector x;
    double f = 0.0;
    int evals = 0;
};

/// Derivative-free local minimisation of `f` over a box. Every trial point is
/// projected onto the box; non-finite objective values count as +inf. The
/// returned value is never worse than f(x0).
OptimResult minimize_bounded(const std::function<double(const Vector&)>& f, const Vector& x0, const Bounds& box,
                             const NelderMeadOptions& options = {});

/// n stratified points in the box, one per row.
Matrix latin_hypercube(int n, const Bounds& box, Rng& rng);

}  // namespace gpmcmc
