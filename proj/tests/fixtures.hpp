#pragma once

#include "gpmcmc/posterior.hpp"

namespace fixture {

/// Small, fast forward problem: n x n grid, corner stimulus, leads on a circle.
inline gpmcmc::ForwardPipeline small_pipeline(int n = 8, int rows = 1, int cols = 1, int leads = 4) {
    using namespace gpmcmc;
    ForwardPipeline p;
    p.grid = build_grid(n, n, 0.5);
    p.partition = partition_grid(p.grid, rows, cols);
    p.stimulus = corner_stimulus(p.grid);
    p.lead_field = build_lead_field(p.grid, electrodes_on_circle(p.grid, leads));
    p.settings = {0.1, 30.0, 30};
    return p;
}

}  // namespace fixture
