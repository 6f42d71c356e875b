#include <benchmark/benchmark.h>

#include <gpmcmc/diagnostics.hpp>
#include <gpmcmc/gp_surrogate.hpp>
#include <gpmcmc/rng.hpp>
#include <gpmcmc/samplers.hpp>
#include <gpmcmc_app/config.hpp>
#include <gpmcmc_app/pipeline.hpp>

#include <memory>

using namespace gpmcmc;
using namespace gpmcmc::app;

namespace {

struct Fixture {
    ExperimentConfig cfg;
    CaseBundle bundle;
    std::unique_ptr<PosteriorContext> ctx;
    SurrogateBuild surrogate;

    explicit Fixture(ExperimentConfig c) : cfg(std::move(c)), bundle(build_case(cfg)) {
        ctx = make_posterior(bundle, cfg.case_config);
        surrogate = run_surrogate(*ctx, cfg);
    }
};

const Fixture& two_region() {
    static const Fixture f(two_region_config());
    return f;
}

void BM_SimulateTwoRegion(benchmark::State& state) {
    const auto cfg = two_region_config();
    const auto bundle = build_case(cfg);
    const auto pipeline = bundle.pipeline(cfg.case_config);
    for (auto _ : state) benchmark::DoNotOptimize(pipeline.evaluate(bundle.theta_true));
}
BENCHMARK(BM_SimulateTwoRegion)->Unit(benchmark::kMillisecond);

void BM_SimulateDefault(benchmark::State& state) {
    const auto cfg = default_config();
    const auto bundle = build_case(cfg);
    const auto pipeline = bundle.pipeline(cfg.case_config);
    for (auto _ : state) benchmark::DoNotOptimize(pipeline.evaluate(bundle.theta_true));
}
BENCHMARK(BM_SimulateDefault)->Unit(benchmark::kMillisecond);

void BM_GpPredict(benchmark::State& state) {
    const GPModel& gp = two_region().surrogate.gp();
    Rng rng = make_stream(1, 0);
    Vector theta(2);
    for (auto _ : state) {
        theta << 0.52 * uniform01(rng), 0.52 * uniform01(rng);
        benchmark::DoNotOptimize(predict(gp, theta));
    }
    state.counters["points"] = static_cast<double>(gp.training().size());
}
BENCHMARK(BM_GpPredict);

void BM_FitGp(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    Rng rng = make_stream(2, 0);
    TrainingSet training;
    training.X.resize(m, 2);
    training.y.resize(m);
    for (int i = 0; i < m; ++i) {
        training.X(i, 0) = uniform01(rng);
        training.X(i, 1) = uniform01(rng);
        training.y(i) = standard_normal(rng);
    }
    training.recenter();
    KernelHyper hyper;
    hyper.lengthscales = Vector::Constant(2, 0.3);
    hyper.amplitude2 = 1.0;
    for (auto _ : state) benchmark::DoNotOptimize(fit_gp(training, hyper));
}
BENCHMARK(BM_FitGp)->Arg(20)->Arg(60)->Arg(200);

void BM_TwoStageStep(benchmark::State& state) {
    const Fixture& f = two_region();
    const LogDensity exact = f.ctx->as_log_density();
    const LogDensity surr = surrogate_log_density(f.surrogate.gp(), f.ctx->bounds());
    const GaussianProposal proposal(ProposalConfig{0.01});
    Rng rng = make_stream(3, 0);
    ChainState s{f.bundle.theta_true, exact(f.bundle.theta_true), surr(f.bundle.theta_true)};
    ChainStats stats;
    for (auto _ : state) s = two_stage_step(s, exact, surr, f.ctx->bounds(), proposal, rng, &stats);
    state.counters["stage1_pass"] =
        static_cast<double>(stats.exact_tested) / static_cast<double>(std::max<std::uint64_t>(stats.proposed, 1));
}
BENCHMARK(BM_TwoStageStep)->Unit(benchmark::kMicrosecond);

void BM_ExactMhStep(benchmark::State& state) {
    const Fixture& f = two_region();
    const LogDensity exact = f.ctx->as_log_density();
    const GaussianProposal proposal(ProposalConfig{0.01});
    Rng rng = make_stream(4, 0);
    ChainState s{f.bundle.theta_true, exact(f.bundle.theta_true), kNegInf};
    for (auto _ : state) s = mh_step(s, exact, proposal, rng);
}
BENCHMARK(BM_ExactMhStep)->Unit(benchmark::kMicrosecond);

void BM_AutocorrEss(benchmark::State& state) {
    const auto n = state.range(0);
    Rng rng = make_stream(5, 0);
    Vector x(n);
    double prev = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) x(i) = prev = 0.5 * prev + standard_normal(rng);
    for (auto _ : state) benchmark::DoNotOptimize(autocorr_ess(x));
}
BENCHMARK(BM_AutocorrEss)->Arg(10000)->Arg(50000);

}  // namespace

BENCHMARK_MAIN();
