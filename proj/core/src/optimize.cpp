#include "gpmcmc/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace gpmcmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Vertex {
    Vector x;
    double f;
};

}  // namespace

OptimResult minimize_bounded(const std::function<double(const Vector&)>& f, const Vector& x0, const Bounds& box,
                             const NelderMeadOptions& options) {
    const Eigen::Index n = x0.size();
    const Vector width = box.width();
    int evals = 0;
    auto eval = [&](const Vector& x) {
        ++evals;
        const double v = f(x);
        return std::isfinite(v) ? v : kInf;
    };

    std::vector<Vertex> simplex;
    simplex.reserve(static_cast<std::size_t>(n + 1));
    const Vector start = box.clamp(x0);
    simplex.push_back({start, eval(start)});
    if (width.maxCoeff() <= 0.0) return {simplex[0].x, simplex[0].f, evals};

    for (Eigen::Index i = 0; i < n; ++i) {
        Vector x = start;
        const double step = options.initial_step * width[i];
        // Step away from the nearer face so the vertex stays distinct after projection.
        x[i] += (start[i] + step <= box.upper[i]) ? step : -step;
        x = box.clamp(x);
        simplex.push_back({x, eval(x)});
    }

    auto by_value = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };
    while (evals < options.max_evals) {
        std::sort(simplex.begin(), simplex.end(), by_value);
        const Vertex& best = simplex.front();
        Vertex& worst = simplex.back();

        double extent = 0.0;
        for (const auto& v : simplex) {
            for (Eigen::Index i = 0; i < n; ++i) {
                if (width[i] > 0.0) extent = std::max(extent, std::abs(v.x[i] - best.x[i]) / width[i]);
            }
        }
        const double spread = std::abs(worst.f - best.f);
        if (extent < options.xtol || (std::isfinite(spread) && spread <= options.ftol * (1.0 + std::abs(best.f))))
            break;

        Vector centroid = Vector::Zero(n);
        for (std::size_t k = 0; k + 1 < simplex.size(); ++k) centroid += simplex[k].x;
        centroid /= static_cast<double>(n);

        const Vector xr = box.clamp(centroid + (centroid - worst.x));
        const double fr = eval(xr);
        if (fr < best.f) {
            const Vector xe = box.clamp(centroid + 2.0 * (centroid - worst.x));
            const double fe = eval(xe);
            worst = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
            continue;
        }
        if (fr < simplex[simplex.size() - 2].f) {
            worst = {xr, fr};
            continue;
        }
        const bool outside = fr < worst.f;
        const Vector xc = outside ? box.clamp(centroid + 0.5 * (xr - centroid)) : box.clamp(centroid + 0.5 * (worst.x - centroid));
        const double fc = eval(xc);
        if (fc < std::min(fr, worst.f)) {
            worst = {xc, fc};
            continue;
        }
        // Shrink towards the best vertex.
        for (std::size_t k = 1; k < simplex.size(); ++k) {
            simplex[k].x = best.x + 0.5 * (simplex[k].x - best.x);
            simplex[k].f = eval(simplex[k].x);
        }
    }
    const auto it = std::min_element(simplex.begin(), simplex.end(), by_value);
    return {it->x, it->f, evals};
}

Matrix latin_hypercube(int n, const Bounds& box, Rng& rng) {
    const Eigen::Index dim = box.dim();
    Matrix out(n, dim);
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (Eigen::Index d = 0; d < dim; ++d) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (int i = 0; i < n; ++i) {
            const double u = (perm[static_cast<std::size_t>(i)] + uniform01(rng)) / n;
            out(i, d) = box.lower[d] + u * (box.upper[d] - box.lower[d]);
        }
    }
    return out;
}

}  // namespace gpmcmc
