#include "gpmcmc_app/pipeline.hpp"

#include <array>
#include <chrono>
#include <fstream>
#include <cmath>
#include <limits>
#include <sstream>

namespace gpmcmc::app {

using nlohmann::json;

std::uint64_t derived_seed(std::uint64_t master, SeedTag tag) {
    Rng rng = make_stream(master, 0, 0x5eed0000u + static_cast<std::uint64_t>(tag));
    return rng();
}

namespace {

Rng tagged_stream(std::uint64_t master, SeedTag tag) { return make_stream(derived_seed(master, tag), 0); }

/// JSON has no inf/nan; encode them as strings.
json num(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

json num_vec(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
    return a;
}

StimulusProtocol make_stimulus(const GridGeometry& grid, const StimulusConfig& s) {
    StimulusProtocol p;
    for (int i = s.i0; i < s.i1; ++i) {
        for (int j = s.j0; j < s.j1; ++j) p.nodes.push_back(grid.index(i, j));
    }
    p.t_on = s.t_on;
    p.t_off = s.t_off;
    p.amplitude = s.amplitude;
    return p;
}

std::vector<std::string> theta_header(Eigen::Index dim) {
    std::vector<std::string> h;
    for (Eigen::Index r = 0; r < dim; ++r) h.push_back("theta_" + std::to_string(r));
    return h;
}

json case_echo(const ExperimentConfig& cfg) {
    json j = cfg.case_config;
    j["seed"] = cfg.master_seed();
    return j;
}

json stats_json(const ChainStats& s) {
    return json{{"proposed", s.proposed},
                {"accepted", s.accepted},
                {"surrogate_rejected", s.surrogate_rejected},
                {"exact_tested", s.exact_tested},
                {"exact_accepted", s.exact_accepted},
                {"out_of_bounds", s.out_of_bounds},
                {"acceptance_rate", s.acceptance_rate()}};
}

json diagnostics_json(const DiagnosticsReport& d) {
    json z = json::array();
    for (Eigen::Index c = 0; c < d.geweke_z.rows(); ++c) z.push_back(num_vec(d.geweke_z.row(c).transpose()));
    return json{{"geweke_z", z},
                {"rhat", num_vec(d.rhat)},
                {"ess", num_vec(d.ess)},
                {"total_samples", d.total_samples},
                {"converged", d.converged}};
}

json summary_json(const PosteriorSummary& s) {
    json corr = json::array();
    for (Eigen::Index r = 0; r < s.correlation.rows(); ++r) corr.push_back(num_vec(s.correlation.row(r).transpose()));
    return json{{"mean", num_vec(s.mean)},
                {"mode", num_vec(s.mode)},
                {"std", num_vec(s.std)},
                {"bimodal", s.bimodal},
                {"correlation", corr}};
}

void write_run_tables(const fs::path& dir, const SamplingRun& run, const RegionPartition& partition) {
    const Eigen::Index dim = run.pooled.cols();
    auto header = theta_header(dim);
    write_csv(dir / "pooled.csv", run.pooled, header);

    Matrix acf = run.diagnostics.acf.transpose();
    write_csv(dir / "acf.csv", acf, header);

    if (!run.summary.kde.empty()) {
        Matrix k(run.summary.kde[0].x.size(), 2 * dim);
        std::vector<std::string> kh;
        for (Eigen::Index r = 0; r < dim; ++r) {
            k.col(2 * r) = run.summary.kde[static_cast<std::size_t>(r)].x;
            k.col(2 * r + 1) = run.summary.kde[static_cast<std::size_t>(r)].density;
            kh.push_back("x_" + std::to_string(r));
            kh.push_back("density_" + std::to_string(r));
        }
        write_csv(dir / "kde.csv", k, kh);
    }
    if (!run.summary.mean_map.empty()) {
        const auto n = static_cast<Eigen::Index>(run.summary.mean_map.size());
        Matrix maps(n, 4);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto u = static_cast<std::size_t>(i);
            maps.row(i) << static_cast<double>(partition.region_of_node[u]), run.summary.mean_map[u], run.summary.mode_map[u],
                run.summary.std_map[u];
        }
        write_csv(dir / "maps.csv", maps, {"region", "mean", "mode", "std"});
    }
}

json diagnose_json(const std::vector<Matrix>& chains, const ExperimentConfig& cfg, const RegionPartition& partition,
                   DiagnosticsReport* report_out, PosteriorSummary* summary_out, Matrix* pooled_out) {
    DiagnosticsReport rep = diagnose(chains, cfg.sampling.burn_in_frac);
    Matrix pooled = postprocess(chains, cfg.sampling.burn_in_frac, cfg.sampling.thin);
    PosteriorSummary sum = summarize(pooled, &partition);
    json sw = json::array();
    if (pooled.rows() >= 1000) {
        for (Eigen::Index i = 0; i < pooled.cols(); ++i) {
            for (Eigen::Index j = i + 1; j < pooled.cols(); ++j)
                sw.push_back(json{{"i", i}, {"j", j}, {"score", num(switching_score(pooled, i, j))}});
        }
    }
    json out{{"diagnostics", diagnostics_json(rep)}, {"summary", summary_json(sum)}, {"switching", sw}};
    if (report_out) *report_out = std::move(rep);
    if (summary_out) *summary_out = std::move(sum);
    if (pooled_out) *pooled_out = std::move(pooled);
    return out;
}

std::vector<Matrix> chain_matrices(const std::vector<MarkovChain>& chains) {
    std::vector<Matrix> m;
    m.reserve(chains.size());
    for (const auto& c : chains) m.push_back(c.samples);
    return m;
}

}  // namespace

ForwardPipeline CaseBundle::pipeline(const CaseConfig& c) const {
    return ForwardPipeline{grid, partition, c.constants, stimulus, lead_field, c.simulation};
}

CaseBundle build_geometry(const CaseConfig& c) {
    CaseBundle b;
    b.grid = build_grid(c.nx, c.ny, c.h);
    b.partition = partition_grid(b.grid, c.partition_rows, c.partition_cols);
    b.stimulus = make_stimulus(b.grid, c.stimulus);
    b.electrodes = c.electrodes.layout == "circle" ? electrodes_on_circle(b.grid, c.electrodes.count, c.electrodes.radius_factor)
                                                   : c.electrodes.points;
    b.lead_field = build_lead_field(b.grid, b.electrodes, c.lead_gain_seed);
    b.theta_true = Eigen::Map<const Vector>(c.theta_true.data(), static_cast<Eigen::Index>(c.theta_true.size()));
    b.a_field = expand_parameters(c.theta_true, b.partition);
    return b;
}

CaseBundle build_case(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto& c = cfg.case_config;
    CaseBundle b = build_geometry(c);
    b.y_clean.Y = b.pipeline(c).evaluate(b.theta_true);
    b.noise_seed = derived_seed(cfg.master_seed(), SeedTag::noise);
    b.y_noisy = add_noise(b.y_clean, c.snr_db, b.noise_seed);
    b.sigma_e = estimate_sigma_e(b.y_noisy, c.snr_db);
    return b;
}

std::unique_ptr<PosteriorContext> make_posterior(const CaseBundle& bundle, const CaseConfig& c) {
    return std::make_unique<PosteriorContext>(bundle.pipeline(c), bundle.y_noisy, bundle.sigma_e);
}

SurrogateBuild run_surrogate(const PosteriorContext& ctx, const ExperimentConfig& cfg) {
    Rng rng = tagged_stream(cfg.master_seed(), SeedTag::surrogate);
    return build_surrogate(ctx.as_log_density(), ctx.bounds(), cfg.surrogate.acquisition, cfg.surrogate.init_design_size, rng);
}

SamplingPlan plan_sampling(const GPModel& gp, const Bounds& bounds, const ExperimentConfig& cfg) {
    const auto& s = cfg.sampling;
    const std::uint64_t master = cfg.master_seed();
    SamplingPlan plan;

    Rng slice_rng = tagged_stream(master, SeedTag::slice);
    const Matrix draws = slice_sample_surrogate(gp, bounds, s.slice_draws, slice_rng, s.slice_burn_in);
    Rng mix_rng = tagged_stream(master, SeedTag::mixture);
    plan.mixture = fit_mixture(draws, s.mixture_components, mix_rng);

    plan.starts.resize(s.chains, bounds.dim());
    for (int c = 0; c < s.chains; ++c) {
        Vector start = plan.mixture.means.row(c % plan.mixture.components()).transpose();
        plan.starts.row(c) = bounds.clamp(start).transpose();
    }

    if (s.sigma_p) {
        plan.proposal.sigma_p = *s.sigma_p;
    } else {
        Rng tune_rng = tagged_stream(master, SeedTag::tune);
        plan.tune = tune_proposal(gp, bounds, plan.starts.row(0).transpose(), tune_rng, s.target_acceptance_lo,
                                  s.target_acceptance_hi);
        plan.proposal = plan.tune->proposal;
    }
    return plan;
}

SamplingRun run_sampling(PosteriorContext& ctx, const GPModel& gp, const SamplingPlan& plan, const ExperimentConfig& cfg,
                         SamplingMode mode) {
    SamplingRun run;
    run.mode = mode;
    ChainRunOptions opt;
    opt.mode = mode;
    opt.n_steps = cfg.sampling.steps;
    opt.master_seed = cfg.master_seed();

    const auto before = ctx.eval_count();
    const auto t0 = std::chrono::steady_clock::now();
    run.chains = run_chains(ctx, mode == SamplingMode::exact ? nullptr : &gp, plan.starts, plan.proposal, opt);
    run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    run.exact_evaluations = ctx.eval_count() - before;

    std::uint64_t counted = 0;
    for (const auto& c : run.chains) counted += c.stats.exact_tested + c.initial_exact_evaluations;
    if (counted != run.exact_evaluations) {
        throw NumericalError("run_sampling: posterior counter (" + std::to_string(run.exact_evaluations) +
                             ") disagrees with chain statistics (" + std::to_string(counted) + ")");
    }

    const auto mats = chain_matrices(run.chains);
    run.diagnostics = diagnose(mats, cfg.sampling.burn_in_frac);
    run.pooled = postprocess(run.chains, cfg.sampling.burn_in_frac, cfg.sampling.thin);
    run.summary = summarize(run.pooled, &ctx.pipeline().partition);
    return run;
}

ComparisonReport compare_runs(const SamplingRun& baseline, const std::vector<const SamplingRun*>& others,
                              std::uint64_t surrogate_evaluations) {
    if (baseline.mode != SamplingMode::exact) throw ConfigError("compare: the baseline must be an exact-MH run");
    ComparisonReport rep;
    auto entry = [&](const SamplingRun& run) {
        if (run.pooled.rows() != baseline.pooled.rows() || run.pooled.cols() != baseline.pooled.cols()) {
            throw ConfigError("compare: " + std::string(to_string(run.mode)) + " has " + std::to_string(run.pooled.rows()) +
                              " pooled samples, the baseline " + std::to_string(baseline.pooled.rows()));
        }
        ModeComparison m;
        m.mode = run.mode;
        m.pooled_samples = run.pooled.rows();
        m.sampling_evaluations = run.exact_evaluations;
        m.surrogate_evaluations = run.mode == SamplingMode::exact ? 0 : surrogate_evaluations;
        m.wall_seconds = run.wall_seconds;
        m.d_mean = (run.summary.mean - baseline.summary.mean).cwiseAbs();
        m.d_mode = (run.summary.mode - baseline.summary.mode).cwiseAbs();
        m.d_std = (run.summary.std - baseline.summary.std).cwiseAbs();
        return m;
    };
    rep.modes.push_back(entry(baseline));
    rep.two_stage_reduction = std::numeric_limits<double>::quiet_NaN();
    for (const SamplingRun* run : others) {
        rep.modes.push_back(entry(*run));
        if (run->mode == SamplingMode::two_stage && rep.modes.front().total_evaluations() > 0) {
            rep.two_stage_reduction = 1.0 - static_cast<double>(rep.modes.back().total_evaluations()) /
                                                 static_cast<double>(rep.modes.front().total_evaluations());
        }
    }
    return rep;
}

json checkpoint_json(const GPModel& gp, const SurrogateBuild& build) {
    const auto& t = gp.training();
    const auto& h = gp.hyper();
    return json{{"X", to_json(t.X)},
                {"y", to_json(t.y)},
                {"y_mean", t.y_mean},
                {"hyper", {{"lengthscales", to_json(h.lengthscales)}, {"amplitude2", h.amplitude2}, {"jitter", h.jitter}}},
                {"exact_evaluations", build.exact_evaluations},
                {"initial_points", build.initial_points},
                {"acquired", build.acquired},
                {"stalled", build.stalled}};
}

GPModel load_checkpoint(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("surrogate checkpoint '" + path.string() + "' not found; run build-surrogate first");
    const json j = read_json(path);
    try {
        TrainingSet t;
        t.X = matrix_from_json(j.at("X"));
        t.y = vector_from_json(j.at("y"));
        t.y_mean = j.at("y_mean").get<double>();
        KernelHyper h;
        h.lengthscales = vector_from_json(j.at("hyper").at("lengthscales"));
        h.amplitude2 = j.at("hyper").at("amplitude2").get<double>();
        h.jitter = j.at("hyper").at("jitter").get<double>();
        return GPModel(std::move(t), std::move(h));
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": malformed checkpoint: " + e.what());
    }
}

CaseBundle load_case(const Paths& paths, const ExperimentConfig& cfg) {
    cfg.validate();
    const auto dir = paths.case_dir();
    if (!fs::exists(dir / "manifest.json")) throw ConfigError("case bundle '" + dir.string() + "' not found; run simulate first");
    const json manifest = read_json(dir / "manifest.json");
    if (manifest.value("case", json()) != case_echo(cfg))
        throw ConfigError("case bundle in '" + dir.string() + "' was generated from a different case or seed; rerun simulate");
    CaseBundle b = build_geometry(cfg.case_config);
    b.lead_field.H = read_csv(dir / "lead_field.csv");
    b.y_clean.Y = read_csv(dir / "y_clean.csv");
    b.y_noisy.Y = read_csv(dir / "y_noisy.csv");
    b.y_noisy.snr_db = cfg.case_config.snr_db;
    b.sigma_e = manifest.at("sigma_e").get<double>();
    b.noise_seed = manifest.at("seeds").at("noise").get<std::uint64_t>();
    return b;
}

CommandResult cmd_simulate(const ExperimentConfig& cfg) {
    const Paths paths{cfg.output_dir};
    const CaseBundle b = build_case(cfg);
    const auto dir = paths.case_dir();
    ensure_dir(dir);
    write_csv(dir / "theta_true.csv", Matrix(b.theta_true), {"theta"});
    write_csv(dir / "a_field.csv", Eigen::Map<const Matrix>(b.a_field.data(), cfg.case_config.ny, cfg.case_config.nx).transpose());
    write_csv(dir / "y_clean.csv", b.y_clean.Y);
    write_csv(dir / "y_noisy.csv", b.y_noisy.Y);
    write_csv(dir / "lead_field.csv", b.lead_field.H);
    Matrix el(static_cast<Eigen::Index>(b.electrodes.size()), 2);
    for (std::size_t l = 0; l < b.electrodes.size(); ++l) el.row(static_cast<Eigen::Index>(l)) << b.electrodes[l].x, b.electrodes[l].y;
    write_csv(dir / "electrodes.csv", el, {"x", "y"});
    const json seeds{{"master", cfg.master_seed()},
                     {"noise", b.noise_seed},
                     {"surrogate", derived_seed(cfg.master_seed(), SeedTag::surrogate)},
                     {"tune", derived_seed(cfg.master_seed(), SeedTag::tune)},
                     {"slice", derived_seed(cfg.master_seed(), SeedTag::slice)},
                     {"mixture", derived_seed(cfg.master_seed(), SeedTag::mixture)}};
    write_json(dir / "manifest.json", json{{"case", case_echo(cfg)},
                                           {"seeds", seeds},
                                           {"sigma_e", b.sigma_e},
                                           {"leads", b.y_noisy.Y.rows()},
                                           {"time_samples", b.y_noisy.Y.cols()},
                                           {"regions", b.partition.region_count}});
    std::ostringstream msg;
    msg << "case written to " << dir.string() << " (" << b.y_noisy.Y.rows() << " leads x " << b.y_noisy.Y.cols()
        << " samples, sigma_e = " << b.sigma_e << ")";
    return {true, msg.str()};
}

CommandResult cmd_build_surrogate(const ExperimentConfig& cfg) {
    const Paths paths{cfg.output_dir};
    const CaseBundle b = load_case(paths, cfg);
    const auto ctx = make_posterior(b, cfg.case_config);
    const auto t0 = std::chrono::steady_clock::now();
    const SurrogateBuild build = run_surrogate(*ctx, cfg);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (build.exact_evaluations != ctx->eval_count())
        throw NumericalError("build-surrogate: evaluation counter disagrees with the build record");

    ensure_dir(paths.surrogate_dir());
    write_json(paths.checkpoint(), checkpoint_json(build.gp(), build));
    write_json(paths.surrogate_dir() / "manifest.json",
               json{{"exact_evaluations", build.exact_evaluations},
                    {"training_points", build.gp().training().size()},
                    {"initial_points", build.initial_points},
                    {"acquired", build.acquired},
                    {"stalled", build.stalled},
                    {"surrogate_config", cfg.surrogate},
                    {"seed", derived_seed(cfg.master_seed(), SeedTag::surrogate)}});
    write_json(paths.surrogate_dir() / "timing.json", json{{"wall_seconds", wall}});
    std::ostringstream msg;
    msg << "surrogate with " << build.gp().training().size() << " points (" << build.exact_evaluations
        << " exact evaluations" << (build.stalled ? ", stalled" : "") << ")";
    return {true, msg.str()};
}

namespace {

json sample_manifest(const ExperimentConfig& cfg, const SamplingRun& run, const SamplingPlan& plan) {
    json chains = json::array();
    std::uint64_t initial = 0;
    for (const auto& c : run.chains) {
        chains.push_back(json{{"chain_id", c.chain_id},
                              {"start", to_json(Vector(plan.starts.row(c.chain_id).transpose()))},
                              {"stats", stats_json(c.stats)},
                              {"initial_exact_evaluations", c.initial_exact_evaluations}});
        initial += c.initial_exact_evaluations;
    }
    json m{{"mode", std::string(to_string(run.mode))},
           {"sampling", cfg.sampling},
           {"seed", cfg.master_seed()},
           {"sigma_p", plan.proposal.sigma_p},
           {"mixture_means", to_json(plan.mixture.means)},
           {"mixture_weights", to_json(plan.mixture.weights)},
           {"chains", chains},
           {"exact_evaluations", run.exact_evaluations},
           {"pooled_samples", run.pooled.rows()}};
    if (plan.tune) {
        m["tuning"] = json{{"acceptance", plan.tune->acceptance}, {"iterations", plan.tune->iterations}, {"converged", plan.tune->converged}};
    }
    return m;
}

void write_chains(const fs::path& dir, const std::vector<MarkovChain>& chains) {
    for (const auto& c : chains) {
        const Eigen::Index dim = c.samples.cols();
        Matrix t(c.length(), dim + 3);
        for (Eigen::Index s = 0; s < c.length(); ++s) {
            t(s, 0) = static_cast<double>(s);
            t.row(s).segment(1, dim) = c.samples.row(s);
            t(s, dim + 1) = c.log_post[s];
            t(s, dim + 2) = c.stage1_pass[static_cast<std::size_t>(s)];
        }
        auto header = theta_header(dim);
        header.insert(header.begin(), "step");
        header.emplace_back("log_post");
        header.emplace_back("stage1_pass");
        write_csv(dir / ("chain_" + std::to_string(c.chain_id) + ".csv"), t, header);
    }
}

std::vector<Matrix> read_chains(const fs::path& dir, int count, Eigen::Index dim) {
    std::vector<Matrix> chains;
    for (int c = 0; c < count; ++c) {
        const auto path = dir / ("chain_" + std::to_string(c) + ".csv");
        if (!fs::exists(path)) throw ConfigError("missing chain file '" + path.string() + "'; run sample first");
        const Matrix t = read_csv(path);
        if (t.cols() != dim + 3) throw ConfigError("'" + path.string() + "' has the wrong number of columns");
        chains.emplace_back(t.middleCols(1, dim));
    }
    return chains;
}

std::string summary_line(const SamplingRun& run) {
    std::ostringstream msg;
    msg << to_string(run.mode) << ": " << run.pooled.rows() << " pooled samples, " << run.exact_evaluations
        << " exact evaluations, R-hat max " << run.diagnostics.rhat.maxCoeff()
        << (run.diagnostics.converged ? "" : " (not converged)");
    return msg.str();
}

ExperimentConfig with_mode(ExperimentConfig cfg, SamplingMode mode) {
    cfg.sampling.mode = mode;
    return cfg;
}

struct LoadedRun {
    SamplingRun run;
    bool present = false;
};

LoadedRun load_run(const Paths& paths, const ExperimentConfig& cfg, SamplingMode mode, const RegionPartition& partition) {
    LoadedRun out;
    const auto dir = paths.samples_dir(mode);
    if (!fs::exists(dir / "manifest.json")) return out;
    const json m = read_json(dir / "manifest.json");
    json expected = with_mode(cfg, mode).sampling;
    if (m.at("seed").get<std::uint64_t>() != cfg.master_seed() || m.at("sampling") != expected)
        throw ConfigError("samples in '" + dir.string() + "' were produced with different sampling settings; rerun sample");
    out.run.mode = mode;
    out.run.exact_evaluations = m.at("exact_evaluations").get<std::uint64_t>();
    const auto chains = read_chains(dir, cfg.sampling.chains, partition.region_count);
    diagnose_json(chains, cfg, partition, &out.run.diagnostics, &out.run.summary, &out.run.pooled);
    if (fs::exists(dir / "timing.json")) out.run.wall_seconds = read_json(dir / "timing.json").value("wall_seconds", 0.0);
    out.present = true;
    return out;
}

SamplingRun sample_to_disk(const ExperimentConfig& cfg, SamplingMode mode) {
    const Paths paths{cfg.output_dir};
    const CaseBundle b = load_case(paths, cfg);
    const GPModel gp = load_checkpoint(paths.checkpoint());
    const auto ctx = make_posterior(b, cfg.case_config);
    const ExperimentConfig mcfg = with_mode(cfg, mode);
    const SamplingPlan plan = plan_sampling(gp, ctx->bounds(), mcfg);
    SamplingRun run = run_sampling(*ctx, gp, plan, mcfg, mode);

    const auto dir = paths.samples_dir(mode);
    ensure_dir(dir);
    write_chains(dir, run.chains);
    write_json(dir / "manifest.json", sample_manifest(mcfg, run, plan));
    write_json(dir / "timing.json", json{{"wall_seconds", run.wall_seconds}});
    const auto chains = chain_matrices(run.chains);
    write_json(dir / "diagnostics.json", diagnose_json(chains, mcfg, b.partition, nullptr, nullptr, nullptr));
    write_run_tables(dir, run, b.partition);
    return run;
}

}  // namespace

CommandResult cmd_sample(const ExperimentConfig& cfg, SamplingMode mode) {
    const SamplingRun run = sample_to_disk(cfg, mode);
    return {run.diagnostics.converged, summary_line(run)};
}

CommandResult cmd_diagnose(const ExperimentConfig& cfg, SamplingMode mode) {
    cfg.validate();
    const Paths paths{cfg.output_dir};
    const CaseBundle geo = build_geometry(cfg.case_config);
    const auto dir = paths.samples_dir(mode);
    const auto chains = read_chains(dir, cfg.sampling.chains, geo.partition.region_count);
    SamplingRun run;
    run.mode = mode;
    const json d = diagnose_json(chains, with_mode(cfg, mode), geo.partition, &run.diagnostics, &run.summary, &run.pooled);
    write_json(dir / "diagnostics.json", d);
    write_run_tables(dir, run, geo.partition);
    std::ostringstream msg;
    msg << to_string(mode) << ": R-hat " << run.diagnostics.rhat.transpose() << ", ESS " << run.diagnostics.ess.transpose()
        << (run.diagnostics.converged ? "" : " (not converged)");
    return {run.diagnostics.converged, msg.str()};
}

CommandResult cmd_compare(const ExperimentConfig& cfg, bool run_missing) {
    cfg.validate();
    const Paths paths{cfg.output_dir};
    const CaseBundle geo = build_geometry(cfg.case_config);
    const std::array<SamplingMode, 3> modes{SamplingMode::exact, SamplingMode::two_stage, SamplingMode::surrogate_only};
    std::vector<SamplingRun> runs;
    for (SamplingMode mode : modes) {
        LoadedRun loaded = load_run(paths, cfg, mode, geo.partition);
        if (!loaded.present) {
            if (!run_missing) {
                throw ConfigError("no " + std::string(to_string(mode)) + " samples in '" + paths.samples_dir(mode).string() +
                                  "'; run `sample --mode " + std::string(to_string(mode)) + "` or pass --run-missing");
            }
            sample_to_disk(cfg, mode);
            loaded = load_run(paths, cfg, mode, geo.partition);
        }
        runs.push_back(std::move(loaded.run));
    }
    const json surrogate_manifest = read_json(paths.surrogate_dir() / "manifest.json");
    const auto overhead = surrogate_manifest.at("exact_evaluations").get<std::uint64_t>();
    const ComparisonReport rep = compare_runs(runs[0], {&runs[1], &runs[2]}, overhead);

    json modes_json = json::array();
    const Eigen::Index dim = geo.partition.region_count;
    std::ostringstream csv;
    csv << "mode,parameter,d_mean,d_mode,d_std\n";
    for (const auto& m : rep.modes) {
        modes_json.push_back(json{{"mode", std::string(to_string(m.mode))},
                                  {"pooled_samples", m.pooled_samples},
                                  {"sampling_evaluations", m.sampling_evaluations},
                                  {"surrogate_evaluations", m.surrogate_evaluations},
                                  {"total_evaluations", m.total_evaluations()},
                                  {"wall_seconds", m.wall_seconds},
                                  {"d_mean", num_vec(m.d_mean)},
                                  {"d_mode", num_vec(m.d_mode)},
                                  {"d_std", num_vec(m.d_std)}});
        for (Eigen::Index r = 0; r < dim; ++r) {
            csv << to_string(m.mode) << ',' << r << ',' << format_double(m.d_mean[r]) << ',' << format_double(m.d_mode[r])
                << ',' << format_double(m.d_std[r]) << '\n';
        }
    }
    ensure_dir(paths.compare_dir());
    write_json(paths.compare_dir() / "report.json",
               json{{"modes", modes_json}, {"two_stage_reduction", num(rep.two_stage_reduction)}});
    {
        std::ofstream out(paths.compare_dir() / "deltas.csv", std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write comparison table");
        out << csv.str();
    }
    std::ostringstream msg;
    msg << "exact-evaluation reduction of two-stage vs exact MH: " << 100.0 * rep.two_stage_reduction << "%";
    for (const auto& m : rep.modes) {
        msg << "\n  " << to_string(m.mode) << ": mean |dmean| " << m.d_mean.mean() << ", |dmode| " << m.d_mode.mean()
            << ", |dstd| " << m.d_std.mean() << ", evaluations " << m.total_evaluations();
    }
    bool converged = true;
    for (const auto& r : runs) converged = converged && r.diagnostics.converged;
    return {converged, msg.str()};
}

}  // namespace gpmcmc::app
