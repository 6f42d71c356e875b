#include "gpmcmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gpmcmc {

namespace {

double variance_of_mean_batched(const Eigen::Ref<const Vector>& seg, int batches) {
    const Eigen::Index n = seg.size();
    const Eigen::Index b = std::max<Eigen::Index>(n / batches, 1);
    const Eigen::Index count = n / b;
    Vector means(count);
    for (Eigen::Index k = 0; k < count; ++k) means[k] = seg.segment(k * b, b).mean();
    if (count < 2) return 0.0;
    const double m = means.mean();
    return (means.array() - m).square().sum() / static_cast<double>(count - 1) / static_cast<double>(count);
}

bool is_constant(const Eigen::Ref<const Vector>& x) { return x.size() == 0 || x.minCoeff() == x.maxCoeff(); }

double sample_variance(const Eigen::Ref<const Vector>& x) {
    if (x.size() < 2) return 0.0;
    const double m = x.mean();
    return (x.array() - m).square().sum() / static_cast<double>(x.size() - 1);
}

}  // namespace

Vector geweke(const Matrix& chain, double frac_a, double frac_b, int batches) {
    const Eigen::Index n = chain.rows();
    if (n < 100) throw ConfigError("geweke: chain must have at least 100 draws");
    if (!(frac_a > 0.0) || !(frac_b > 0.0) || frac_a + frac_b > 1.0) throw ConfigError("geweke: invalid segment fractions");
    const auto na = static_cast<Eigen::Index>(std::floor(frac_a * static_cast<double>(n)));
    const auto nb = static_cast<Eigen::Index>(std::floor(frac_b * static_cast<double>(n)));
    Vector z(chain.cols());
    for (Eigen::Index p = 0; p < chain.cols(); ++p) {
        const Vector a = chain.col(p).head(na);
        const Vector b = chain.col(p).tail(nb);
        if (is_constant(a) && is_constant(b)) {
            const double diff = a[0] - b[0];
            z[p] = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
            continue;
        }
        const double diff = a.mean() - b.mean();
        const double denom = std::sqrt(variance_of_mean_batched(a, batches) + variance_of_mean_batched(b, batches));
        if (denom == 0.0) {
            z[p] = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
        } else {
            z[p] = diff / denom;
        }
    }
    return z;
}

Vector gelman_rubin(const std::vector<Matrix>& chains) {
    if (chains.size() < 2) throw ConfigError("gelman_rubin: need at least two chains");
    const Eigen::Index len = chains.front().rows();
    const Eigen::Index dim = chains.front().cols();
    for (const auto& c : chains) {
        if (c.rows() != len || c.cols() != dim) throw ConfigError("gelman_rubin: chains must have equal shape");
    }
    if (len < 10) throw ConfigError("gelman_rubin: chains must have at least 10 draws");
    const Eigen::Index n = len / 2;
    const auto m = static_cast<Eigen::Index>(2 * chains.size());

    Vector rhat(dim);
    for (Eigen::Index p = 0; p < dim; ++p) {
        Vector means(m);
        Vector vars(m);
        Eigen::Index k = 0;
        for (const auto& c : chains) {
            for (int half = 0; half < 2; ++half) {
                const Vector seg = c.col(p).segment(half * (len - n), n);
                means[k] = seg.mean();
                vars[k] = sample_variance(seg);
                ++k;
            }
        }
        const double w = vars.mean();
        const double grand = means.mean();
        const double b = static_cast<double>(n) * (means.array() - grand).square().sum() / static_cast<double>(m - 1);
        if (w <= 0.0) {
            // Constant chains: agreeing constants are converged, disagreeing ones never are.
            rhat[p] = b > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
            continue;
        }
        const double nn = static_cast<double>(n);
        const double var_plus = (nn - 1.0) / nn * w + b / nn;
        rhat[p] = std::max(1.0, std::sqrt(var_plus / w));
    }
    return rhat;
}

AutocorrResult autocorr_ess(const Vector& trace, int max_lag) {
    const Eigen::Index n = trace.size();
    if (n < 100) throw ConfigError("autocorr_ess: trace must have at least 100 draws");
    const Vector centred = trace.array() - trace.mean();
    const double c0 = is_constant(trace) ? 0.0 : centred.squaredNorm();
    auto rho = [&](Eigen::Index k) {
        if (c0 <= 0.0) return 1.0;
        return centred.head(n - k).dot(centred.tail(n - k)) / c0;
    };

    AutocorrResult out;
    const Eigen::Index lags = std::min<Eigen::Index>(max_lag, n - 1);
    out.acf.resize(lags + 1);
    for (Eigen::Index k = 0; k <= lags; ++k) out.acf[k] = rho(k);

    double sum = 0.0;
    for (Eigen::Index k = 1; k < n; ++k) {
        const double r = k <= lags ? out.acf[k] : rho(k);
        if (r < 0.0) break;
        sum += r;
    }
    const double nn = static_cast<double>(n);
    out.ess = std::clamp(nn / (1.0 + 2.0 * sum), 1.0, nn);
    return out;
}

DiagnosticsReport diagnose(const std::vector<Matrix>& chains, double burn_in_frac) {
    if (chains.empty()) throw ConfigError("diagnose: no chains");
    if (!(burn_in_frac >= 0.0 && burn_in_frac < 1.0)) throw ConfigError("diagnose: burn_in_frac must be in [0, 1)");
    std::vector<Matrix> kept;
    kept.reserve(chains.size());
    for (const auto& c : chains) {
        const auto burn = static_cast<Eigen::Index>(std::floor(burn_in_frac * static_cast<double>(c.rows())));
        kept.push_back(c.bottomRows(c.rows() - burn));
    }
    const Eigen::Index dim = kept.front().cols();
    const int lags = 50;

    DiagnosticsReport r;
    r.geweke_z.resize(static_cast<Eigen::Index>(kept.size()), dim);
    r.ess = Vector::Zero(dim);
    r.acf = Matrix::Zero(dim, lags + 1);
    for (std::size_t c = 0; c < kept.size(); ++c) {
        r.geweke_z.row(static_cast<Eigen::Index>(c)) = geweke(kept[c]).transpose();
        r.total_samples += kept[c].rows();
        for (Eigen::Index p = 0; p < dim; ++p) {
            const AutocorrResult ac = autocorr_ess(kept[c].col(p), lags);
            r.ess[p] += ac.ess;
            r.acf.row(p).head(ac.acf.size()) += ac.acf.transpose() / static_cast<double>(kept.size());
        }
    }
    r.rhat = kept.size() >= 2 ? gelman_rubin(kept) : Vector::Ones(dim);
    r.converged = (r.geweke_z.array().abs() < 2.0).all() && (r.rhat.array() < 1.1).all();
    return r;
}

KdeGrid kde(const Vector& samples, double lo, double hi, int points) {
    const Eigen::Index n = samples.size();
    if (n < 2) throw ConfigError("kde: need at least two samples");
    if (!(hi > lo) || points < 2) throw ConfigError("kde: invalid grid");
    KdeGrid g;
    g.x = Vector::LinSpaced(points, lo, hi);
    g.density = Vector::Zero(points);

    const double sd = std::sqrt(sample_variance(samples));
    std::vector<double> sorted(samples.data(), samples.data() + n);
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(n - 1);
        const auto i = static_cast<std::size_t>(std::floor(pos));
        const double frac = pos - static_cast<double>(i);
        return i + 1 < sorted.size() ? sorted[i] * (1.0 - frac) + sorted[i + 1] * frac : sorted[i];
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    if (!(spread > 0.0)) spread = 1e-3 * (hi - lo);
    const double bw = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);

    // Samples are sorted, so each grid node only visits samples within 8 bandwidths.
    const double norm = 1.0 / (static_cast<double>(n) * bw * std::sqrt(2.0 * std::numbers::pi));
    for (int k = 0; k < points; ++k) {
        const double x = g.x[k];
        auto first = std::lower_bound(sorted.begin(), sorted.end(), x - 8.0 * bw);
        auto last = std::upper_bound(sorted.begin(), sorted.end(), x + 8.0 * bw);
        double acc = 0.0;
        for (auto it = first; it != last; ++it) {
            const double u = (x - *it) / bw;
            acc += std::exp(-0.5 * u * u);
        }
        g.density[k] = acc * norm;
    }
    return g;
}

std::vector<Eigen::Index> kde_peaks(const KdeGrid& grid) {
    const Eigen::Index n = grid.density.size();
    std::vector<Eigen::Index> peaks;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double v = grid.density[k];
        if (v <= 0.0) continue;
        const bool left_ok = k == 0 || v > grid.density[k - 1];
        // Plateaus count once, at their left end.
        const bool right_ok = k + 1 == n || v >= grid.density[k + 1];
        if (left_ok && right_ok) peaks.push_back(k);
    }
    std::sort(peaks.begin(), peaks.end(),
              [&](Eigen::Index a, Eigen::Index b) { return grid.density[a] > grid.density[b]; });
    return peaks;
}

PosteriorSummary summarize(const Matrix& pooled, const RegionPartition* partition, double lo, double hi) {
    const Eigen::Index n = pooled.rows();
    const Eigen::Index dim = pooled.cols();
    if (n < 2) throw ConfigError("summarize: need pooled samples");
    PosteriorSummary s;
    s.mean = pooled.colwise().mean();
    const Matrix centred = pooled.rowwise() - s.mean.transpose();
    const Matrix cov = centred.transpose() * centred / static_cast<double>(n - 1);
    s.std = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    s.correlation = Matrix::Identity(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            if (i != j && s.std[i] > 0.0 && s.std[j] > 0.0) s.correlation(i, j) = cov(i, j) / (s.std[i] * s.std[j]);
        }
    }

    s.mode.resize(dim);
    s.bimodal.assign(static_cast<std::size_t>(dim), false);
    for (Eigen::Index p = 0; p < dim; ++p) {
        const double min_v = pooled.col(p).minCoeff();
        const double max_v = pooled.col(p).maxCoeff();
        if (max_v == min_v) {
            s.mean[p] = min_v;
            s.std[p] = 0.0;
            s.mode[p] = min_v;
            s.kde.push_back(KdeGrid{Vector::LinSpaced(2, lo, hi), Vector::Zero(2)});
            continue;
        }
        const double g_lo = std::min(lo, min_v);
        const double g_hi = std::max(hi, max_v);
        KdeGrid grid = kde(pooled.col(p), g_lo, g_hi);
        const auto peaks = kde_peaks(grid);
        if (peaks.empty()) {
            // Bandwidth below the grid spacing: the grid never lands near a sample.
            std::vector<double> v(pooled.col(p).data(), pooled.col(p).data() + n);
            std::nth_element(v.begin(), v.begin() + n / 2, v.end());
            s.mode[p] = v[static_cast<std::size_t>(n / 2)];
            s.kde.push_back(std::move(grid));
            continue;
        }
        s.mode[p] = std::clamp(grid.x[peaks.front()], min_v, max_v);
        s.bimodal[static_cast<std::size_t>(p)] =
            peaks.size() >= 2 && grid.density[peaks[1]] >= kBimodalPeakRatio * grid.density[peaks[0]];
        s.kde.push_back(std::move(grid));
    }

    if (partition) {
        auto expand = [&](const Vector& v) {
            return expand_parameters(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), *partition);
        };
        s.mean_map = expand(s.mean);
        s.mode_map = expand(s.mode);
        s.std_map = expand(s.std);
    }
    return s;
}

double switching_score(const Matrix& chain, Eigen::Index i, Eigen::Index j) {
    if (chain.rows() < 1000) throw ConfigError("switching_score: chain must have at least 1000 draws");
    if (i < 0 || j < 0 || i >= chain.cols() || j >= chain.cols()) throw ConfigError("switching_score: bad index");
    if (is_constant(chain.col(i)) || is_constant(chain.col(j))) return 0.0;
    const Vector a = chain.col(i).array() - chain.col(i).mean();
    const Vector b = chain.col(j).array() - chain.col(j).mean();
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

}  // namespace gpmcmc
