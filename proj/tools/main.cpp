#include "gpmcmc_app/config.hpp"
#include "gpmcmc_app/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

enum ExitCode : int { kOk = 0, kConfig = 1, kNumerical = 2, kUnconverged = 3 };

}  // namespace

int main(int argc, char** argv) {
    using namespace gpmcmc;
    using namespace gpmcmc::app;

    CLI::App app{"Surrogate-accelerated MCMC for cardiac excitability estimation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string template_name;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    bool strict = false;
    app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    app.add_option("--template", template_name, "built-in case: default, two-region or coupled")
        ->excludes("--config");
    app.add_option("--seed", seed, "master seed (overrides the config)");
    app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.add_flag("--strict", strict, "exit with code 3 when diagnostics report non-convergence");

    auto* simulate = app.add_subcommand("simulate", "generate the synthetic case");
    auto* build = app.add_subcommand("build-surrogate", "fit the GP surrogate of the log-posterior");

    std::string sample_mode = "two-stage";
    auto* sample = app.add_subcommand("sample", "run MCMC chains");
    sample->add_option("--mode", sample_mode, "exact, two-stage or surrogate-only")
        ->check(CLI::IsMember({"exact", "two-stage", "surrogate-only"}));

    std::string diagnose_mode = "two-stage";
    auto* diag = app.add_subcommand("diagnose", "recompute diagnostics and summaries from stored chains");
    diag->add_option("--mode", diagnose_mode, "which sample set to diagnose")
        ->check(CLI::IsMember({"exact", "two-stage", "surrogate-only"}));

    bool run_missing = false;
    auto* compare = app.add_subcommand("compare", "compare two-stage and surrogate-only runs against exact MH");
    compare->add_flag("--run-missing", run_missing, "run modes whose samples are absent");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        ExperimentConfig cfg;
        if (!config_path.empty()) {
            cfg = load_config(config_path);
        } else {
            const auto t = template_config(template_name.empty() ? "default" : template_name);
            if (!t) throw ConfigError("unknown template '" + template_name + "'");
            cfg = *t;
        }
        if (seed) cfg.seed = seed;
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        cfg.validate();

        CommandResult result;
        if (*simulate) {
            result = cmd_simulate(cfg);
        } else if (*build) {
            result = cmd_build_surrogate(cfg);
        } else if (*sample) {
            result = cmd_sample(cfg, parse_sampling_mode(sample_mode));
        } else if (*diag) {
            result = cmd_diagnose(cfg, parse_sampling_mode(diagnose_mode));
        } else if (*compare) {
            result = cmd_compare(cfg, run_missing);
        }
        std::cout << result.message << '\n';
        if (!result.converged) {
            std::cerr << "warning: chains did not pass the convergence checks (|Geweke z| < 2, R-hat < 1.1)\n";
            if (strict) return kUnconverged;
        }
        return kOk;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfig;
    }
}
