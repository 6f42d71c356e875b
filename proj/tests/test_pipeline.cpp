#include "gpmcmc_app/config.hpp"
#include "gpmcmc_app/io.hpp"
#include "gpmcmc_app/pipeline.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace gpmcmc;
using namespace gpmcmc::app;
using nlohmann::json;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("gpmcmc_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ExperimentConfig small_config(const fs::path& out) {
    ExperimentConfig cfg = two_region_config();
    cfg.surrogate.acquisition.budget_max = 20;
    cfg.surrogate.init_design_size = 6;
    cfg.sampling.steps = 400;
    cfg.sampling.slice_draws = 2000;
    cfg.sampling.slice_burn_in = 100;
    cfg.seed = 99;
    cfg.output_dir = out.string();
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string error_of(const std::string& text) {
    try {
        (void)parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(Config, TemplatesAreValid) {
    for (const char* name : {"default", "two-region", "coupled"}) {
        const auto cfg = template_config(name);
        ASSERT_TRUE(cfg.has_value()) << name;
        EXPECT_NO_THROW(cfg->validate()) << name;
    }
    EXPECT_FALSE(template_config("nope").has_value());
}

TEST(Config, DefaultCaseHasOneInfarctBlock) {
    const auto cfg = default_config();
    ASSERT_EQ(cfg.case_config.theta_true.size(), 9u);
    EXPECT_EQ(std::count(cfg.case_config.theta_true.begin(), cfg.case_config.theta_true.end(), 0.5), 1);
    EXPECT_EQ(std::count(cfg.case_config.theta_true.begin(), cfg.case_config.theta_true.end(), 0.15), 8);
    EXPECT_EQ(cfg.case_config.snr_db, 20.0);
    EXPECT_EQ(cfg.sampling.chains, 4);
    EXPECT_EQ(cfg.sampling.burn_in_frac, 0.25);
    EXPECT_EQ(cfg.sampling.thin, 2);
}

TEST(Config, RoundTripThroughJson) {
    const auto cfg = coupled_config();
    const json once = cfg;
    const json twice = parse_config(once.dump(2));
    EXPECT_EQ(once, twice);
}

TEST(Config, TemplateWithOverrides) {
    const auto cfg = parse_config(R"({"template": "two-region", "seed": 3, "sampling": {"mode": "exact", "steps": 10}})");
    EXPECT_EQ(cfg.sampling.mode, SamplingMode::exact);
    EXPECT_EQ(cfg.sampling.steps, 10);
    EXPECT_EQ(cfg.case_config.theta_true.size(), 2u);
    EXPECT_EQ(cfg.master_seed(), 3u);
}

TEST(Config, ErrorsNameLineAndField) {
    const std::string unknown = "{\n  \"seed\": 1,\n  \"sampling\": {\n    \"chainz\": 4\n  }\n}";
    const auto msg = error_of(unknown);
    EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
    EXPECT_NE(msg.find("sampling.chainz"), std::string::npos) << msg;

    const auto syntax = error_of("{\n  \"seed\": 1,\n  \"case\": {\n}");
    EXPECT_NE(syntax.find("line 4"), std::string::npos) << syntax;

    const auto type = error_of("{\n\"seed\": 1,\n\"sampling\": {\"steps\": \"many\"}}");
    EXPECT_NE(type.find("sampling.steps"), std::string::npos) << type;

    EXPECT_NE(error_of(R"({"sampling": {"mode": "fast"}})").find("sampling.mode"), std::string::npos);
}

TEST(Config, SeedIsMandatory) {
    auto cfg = parse_config(R"({"template": "two-region"})");
    EXPECT_FALSE(cfg.seed.has_value());
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.seed = 1;
    EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, ValidationRejectsInconsistentCases) {
    auto cfg = two_region_config();
    cfg.case_config.theta_true = {0.15, 0.15, 0.15};
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = two_region_config();
    cfg.case_config.theta_true[0] = 0.6;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = two_region_config();
    cfg.case_config.stimulus.i1 = 50;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = two_region_config();
    cfg.surrogate.init_design_size = 2;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = two_region_config();
    cfg.sampling.burn_in_frac = 1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Io, CsvRoundTripIsBitExact) {
    const auto dir = scratch_dir("csv");
    Rng rng(1);
    Matrix m = Matrix::NullaryExpr(7, 3, [&] { return standard_normal(rng) * 1e-7 + 1.0 / 3.0; });
    m(0, 0) = -0.0;
    m(1, 1) = 1e-300;
    write_csv(dir / "m.csv", m, {"a", "b", "c"});
    const Matrix back = read_csv(dir / "m.csv");
    ASSERT_EQ(back.rows(), 7);
    EXPECT_EQ(std::memcmp(back.data(), m.data(), sizeof(double) * 21), 0);
}

TEST(Pipeline, DerivedSeedsDifferByPurpose) {
    EXPECT_NE(derived_seed(1, SeedTag::noise), derived_seed(1, SeedTag::surrogate));
    EXPECT_NE(derived_seed(1, SeedTag::noise), derived_seed(2, SeedTag::noise));
    EXPECT_EQ(derived_seed(1, SeedTag::slice), derived_seed(1, SeedTag::slice));
}

TEST(Pipeline, SimulateIsDeterministicAndRecordsSigma) {
    const auto a = scratch_dir("sim_a");
    const auto b = scratch_dir("sim_b");
    cmd_simulate(small_config(a));
    cmd_simulate(small_config(b));
    for (const char* f : {"theta_true.csv", "a_field.csv", "y_clean.csv", "y_noisy.csv", "lead_field.csv", "manifest.json"})
        EXPECT_EQ(slurp(a / "case" / f), slurp(b / "case" / f)) << f;

    const json m = read_json(a / "case" / "manifest.json");
    Observation y;
    y.Y = read_csv(a / "case" / "y_noisy.csv");
    EXPECT_EQ(m.at("sigma_e").get<double>(), estimate_sigma_e(y, 20.0));
    EXPECT_EQ(m.at("seeds").at("master").get<std::uint64_t>(), 99u);
}

TEST(Pipeline, StaleCaseIsRejected) {
    const auto dir = scratch_dir("stale");
    auto cfg = small_config(dir);
    cmd_simulate(cfg);
    cfg.case_config.theta_true = {0.2, 0.2};
    EXPECT_THROW(cmd_build_surrogate(cfg), ConfigError);
    cfg.seed = 100;
    EXPECT_THROW(load_case(Paths{dir}, cfg), ConfigError);
}

TEST(Pipeline, CheckpointReloadPredictsIdentically) {
    const auto dir = scratch_dir("ckpt");
    const auto cfg = small_config(dir);
    cmd_simulate(cfg);
    cmd_build_surrogate(cfg);
    const auto bundle = load_case(Paths{dir}, cfg);
    const auto ctx = make_posterior(bundle, cfg.case_config);
    const SurrogateBuild build = run_surrogate(*ctx, cfg);
    const GPModel reloaded = load_checkpoint(Paths{dir}.checkpoint());
    Rng rng(2);
    for (int i = 0; i < 10; ++i) {
        const Vector x = Vector::NullaryExpr(2, [&] { return 0.52 * uniform01(rng); });
        const auto p = build.gp().predict(x);
        const auto q = reloaded.predict(x);
        EXPECT_EQ(p.mu, q.mu);
        EXPECT_EQ(p.sigma, q.sigma);
    }
    const json m = read_json(Paths{dir}.surrogate_dir() / "manifest.json");
    EXPECT_LE(m.at("training_points").get<int>(), cfg.surrogate.acquisition.budget_max);
    EXPECT_EQ(m.at("exact_evaluations").get<std::uint64_t>(), build.exact_evaluations);
}

TEST(Pipeline, SampleRequiresCheckpoint) {
    const auto dir = scratch_dir("nockpt");
    const auto cfg = small_config(dir);
    cmd_simulate(cfg);
    EXPECT_THROW(cmd_sample(cfg, SamplingMode::exact), ConfigError);
}

TEST(Pipeline, ModesCountEvaluationsAndShareStarts) {
    const auto dir = scratch_dir("modes");
    const auto cfg = small_config(dir);
    const auto bundle = build_case(cfg);
    auto ctx = make_posterior(bundle, cfg.case_config);
    const SurrogateBuild build = run_surrogate(*ctx, cfg);
    const SamplingPlan plan = plan_sampling(build.gp(), ctx->bounds(), cfg);
    ASSERT_EQ(plan.starts.rows(), 4);
    for (int c = 0; c < 4; ++c) {
        EXPECT_EQ(Vector(plan.starts.row(c).transpose()),
                  ctx->bounds().clamp(plan.mixture.means.row(c % plan.mixture.components()).transpose()));
    }

    const SamplingRun surr = run_sampling(*ctx, build.gp(), plan, cfg, SamplingMode::surrogate_only);
    EXPECT_EQ(surr.exact_evaluations, 0u);

    const SamplingRun two = run_sampling(*ctx, build.gp(), plan, cfg, SamplingMode::two_stage);
    std::uint64_t proposed = 0;
    std::uint64_t tested = 0;
    for (const auto& c : two.chains) {
        proposed += c.stats.proposed;
        tested += c.stats.exact_tested;
        EXPECT_EQ(Vector(c.samples.row(0).transpose()).size(), 2);
    }
    EXPECT_LT(tested, proposed);
    EXPECT_EQ(two.exact_evaluations, tested + 4);

    const SamplingRun exact = run_sampling(*ctx, build.gp(), plan, cfg, SamplingMode::exact);
    EXPECT_EQ(ctx->eval_count(), build.exact_evaluations + two.exact_evaluations + exact.exact_evaluations);

    const auto rep = compare_runs(exact, {&two, &surr}, build.exact_evaluations);
    ASSERT_EQ(rep.modes.size(), 3u);
    EXPECT_EQ(rep.modes[0].d_mean, Vector::Zero(2));
    EXPECT_EQ(rep.modes[0].d_mode, Vector::Zero(2));
    EXPECT_EQ(rep.modes[0].d_std, Vector::Zero(2));
    EXPECT_EQ(rep.modes[0].surrogate_evaluations, 0u);
    EXPECT_EQ(rep.modes[1].total_evaluations(), two.exact_evaluations + build.exact_evaluations);
    EXPECT_EQ(rep.modes[2].total_evaluations(), build.exact_evaluations);
    EXPECT_DOUBLE_EQ(rep.two_stage_reduction,
                     1.0 - static_cast<double>(rep.modes[1].total_evaluations()) / static_cast<double>(exact.exact_evaluations));

    EXPECT_THROW(compare_runs(two, {&exact}, 0), ConfigError);
    SamplingRun shorter = surr;
    shorter.pooled.conservativeResize(surr.pooled.rows() - 1, Eigen::NoChange);
    EXPECT_THROW(compare_runs(exact, {&shorter}, 0), ConfigError);
}

TEST(Pipeline, EndToEndIsByteIdentical) {
    const std::array<fs::path, 2> dirs{scratch_dir("e2e_a"), scratch_dir("e2e_b")};
    for (const auto& d : dirs) {
        const auto cfg = small_config(d);
        cmd_simulate(cfg);
        cmd_build_surrogate(cfg);
        cmd_sample(cfg, SamplingMode::two_stage);
        cmd_diagnose(cfg, SamplingMode::two_stage);
    }
    int compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(dirs[0])) {
        if (!entry.is_regular_file() || entry.path().filename() == "timing.json") continue;
        const auto rel = fs::relative(entry.path(), dirs[0]);
        EXPECT_EQ(slurp(entry.path()), slurp(dirs[1] / rel)) << rel;
        ++compared;
    }
    EXPECT_GT(compared, 15);
}

TEST(Pipeline, CompareNeedsBaseline) {
    const auto dir = scratch_dir("nobase");
    const auto cfg = small_config(dir);
    cmd_simulate(cfg);
    cmd_build_surrogate(cfg);
    cmd_sample(cfg, SamplingMode::two_stage);
    EXPECT_THROW(cmd_compare(cfg, false), ConfigError);
    EXPECT_NO_THROW(cmd_compare(cfg, true));
    const json r = read_json(Paths{dir}.compare_dir() / "report.json");
    ASSERT_EQ(r.at("modes").size(), 3u);
    for (const auto& v : r.at("modes")[0].at("d_mean")) EXPECT_EQ(v.get<double>(), 0.0);
    EXPECT_GT(r.at("two_stage_reduction").get<double>(), 0.0);
}

TEST(Pipeline, DiagnoseMatchesSampleOutput) {
    const auto dir = scratch_dir("diag");
    const auto cfg = small_config(dir);
    cmd_simulate(cfg);
    cmd_build_surrogate(cfg);
    cmd_sample(cfg, SamplingMode::surrogate_only);
    const auto path = Paths{dir}.samples_dir(SamplingMode::surrogate_only) / "diagnostics.json";
    const std::string before = slurp(path);
    cmd_diagnose(cfg, SamplingMode::surrogate_only);
    EXPECT_EQ(slurp(path), before);
}
