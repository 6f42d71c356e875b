#include "gpmcmc_app/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <regex>
#include <set>
#include <sstream>

namespace gpmcmc::app {

using nlohmann::json;

namespace {

/// Line of the first occurrence of "key" in the source text, or 0.
int line_of_key(const std::string& text, const std::string& key) {
    const std::string needle = "\"" + key + "\"";
    const auto pos = text.find(needle);
    if (pos == std::string::npos) return 0;
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class Reader {
public:
    Reader(const json& node, std::string path, const std::string& text) : node_(node), path_(std::move(path)), text_(text) {
        if (!node_.is_object()) fail(path_, "expected an object");
    }

    [[noreturn]] void fail(const std::string& where, const std::string& what) const {
        const auto dot = where.find_last_of('.');
        const std::string key = dot == std::string::npos ? where : where.substr(dot + 1);
        const int line = line_of_key(text_, key);
        std::ostringstream msg;
        msg << "config";
        if (line > 0) msg << " line " << line;
        msg << ": " << where << ": " << what;
        throw ConfigError(msg.str());
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!node_.contains(key)) return;
        try {
            out = node_.at(key).get<T>();
        } catch (const json::exception&) {
            fail(child(key), "wrong type");
        }
    }

    void get_double(const char* key, double& out, bool allow_inf = false) {
        seen_.insert(key);
        if (!node_.contains(key)) return;
        const json& v = node_.at(key);
        if (allow_inf && v.is_string()) {
            const auto s = v.get<std::string>();
            if (s == "inf" || s == "noiseless") {
                out = std::numeric_limits<double>::infinity();
                return;
            }
        }
        if (!v.is_number()) fail(child(key), "expected a number");
        out = v.get<double>();
    }

    [[nodiscard]] bool has(const char* key) {
        seen_.insert(key);
        return node_.contains(key);
    }

    Reader sub(const char* key) {
        seen_.insert(key);
        return Reader(node_.at(key), child(key), text_);
    }

    [[nodiscard]] const json& raw(const char* key) {
        seen_.insert(key);
        return node_.at(key);
    }

    void finish() const {
        for (const auto& item : node_.items()) {
            if (!seen_.contains(item.key())) fail(child(item.key()), "unknown key");
        }
    }

    [[nodiscard]] std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json& node_;
    std::string path_;
    const std::string& text_;
    std::set<std::string> seen_;
};

void read_case(Reader r, CaseConfig& c) {
    if (r.has("grid")) {
        Reader g = r.sub("grid");
        g.get("nx", c.nx);
        g.get("ny", c.ny);
        g.get_double("h", c.h);
        g.finish();
    }
    if (r.has("partition")) {
        Reader p = r.sub("partition");
        p.get("rows", c.partition_rows);
        p.get("cols", c.partition_cols);
        p.finish();
    }
    if (r.has("constants")) {
        Reader k = r.sub("constants");
        k.get_double("k", c.constants.k);
        k.get_double("d", c.constants.d);
        k.get_double("e0", c.constants.e0);
        k.get_double("mu1", c.constants.mu1);
        k.get_double("mu2", c.constants.mu2);
        k.finish();
    }
    r.get("theta_true", c.theta_true);
    if (r.has("stimulus")) {
        Reader s = r.sub("stimulus");
        if (s.has("block")) {
            const json& b = s.raw("block");
            if (!b.is_array() || b.size() != 4) s.fail(s.child("block"), "expected [i0, i1, j0, j1]");
            try {
                c.stimulus.i0 = b[0].get<int>();
                c.stimulus.i1 = b[1].get<int>();
                c.stimulus.j0 = b[2].get<int>();
                c.stimulus.j1 = b[3].get<int>();
            } catch (const json::exception&) {
                s.fail(s.child("block"), "expected integers");
            }
        }
        s.get_double("t_on", c.stimulus.t_on);
        s.get_double("t_off", c.stimulus.t_off);
        s.get_double("amplitude", c.stimulus.amplitude);
        s.finish();
    }
    if (r.has("electrodes")) {
        Reader e = r.sub("electrodes");
        e.get("layout", c.electrodes.layout);
        e.get("count", c.electrodes.count);
        e.get_double("radius_factor", c.electrodes.radius_factor);
        if (e.has("points")) {
            const json& pts = e.raw("points");
            if (!pts.is_array()) e.fail(e.child("points"), "expected an array of [x, y] pairs");
            c.electrodes.points.clear();
            for (const auto& p : pts) {
                if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
                    e.fail(e.child("points"), "expected [x, y] pairs");
                c.electrodes.points.push_back({p[0].get<double>(), p[1].get<double>()});
            }
        }
        e.finish();
    }
    if (r.has("lead_gain_seed")) {
        std::uint64_t s = 0;
        r.get("lead_gain_seed", s);
        c.lead_gain_seed = s;
    }
    if (r.has("simulation")) {
        Reader s = r.sub("simulation");
        s.get_double("dt", c.simulation.dt);
        s.get_double("t_end", c.simulation.t_end);
        s.get("store_every", c.simulation.store_every);
        s.finish();
    }
    r.get_double("snr_db", c.snr_db, true);
    r.finish();
}

void read_surrogate(Reader r, SurrogateConfig& c) {
    r.get_double("beta", c.acquisition.beta);
    r.get("budget_max", c.acquisition.budget_max);
    r.get_double("stall_tol", c.acquisition.stall_tol);
    r.get("hyperopt_every", c.acquisition.hyperopt_every);
    r.get("restarts", c.acquisition.restarts);
    r.get("init_design_size", c.init_design_size);
    r.finish();
}

void read_sampling(Reader r, SamplingConfig& c) {
    if (r.has("mode")) {
        std::string mode;
        r.get("mode", mode);
        try {
            c.mode = parse_sampling_mode(mode);
        } catch (const ConfigError& e) {
            r.fail(r.child("mode"), e.what());
        }
    }
    r.get("chains", c.chains);
    r.get("steps", c.steps);
    r.get_double("burn_in_frac", c.burn_in_frac);
    r.get("thin", c.thin);
    r.get("slice_draws", c.slice_draws);
    r.get("slice_burn_in", c.slice_burn_in);
    r.get("mixture_components", c.mixture_components);
    if (r.has("target_acceptance")) {
        std::vector<double> t;
        r.get("target_acceptance", t);
        if (t.size() != 2) r.fail(r.child("target_acceptance"), "expected [lo, hi]");
        c.target_acceptance_lo = t[0];
        c.target_acceptance_hi = t[1];
    }
    if (r.has("sigma_p")) {
        double s = 0.0;
        r.get_double("sigma_p", s);
        c.sigma_p = s;
    }
    r.finish();
}

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigError("config: " + field + ": " + what);
}

}  // namespace

void ExperimentConfig::validate() const {
    const auto& c = case_config;
    require(c.nx >= 2 && c.ny >= 2, "case.grid", "nx and ny must be at least 2");
    require(c.h > 0.0, "case.grid.h", "must be positive");
    require(c.partition_rows >= 1 && c.partition_rows <= c.nx, "case.partition.rows", "must be in [1, nx]");
    require(c.partition_cols >= 1 && c.partition_cols <= c.ny, "case.partition.cols", "must be in [1, ny]");
    const auto regions = static_cast<std::size_t>(c.partition_rows * c.partition_cols);
    require(c.theta_true.size() == regions, "case.theta_true",
            "needs " + std::to_string(regions) + " entries, one per region");
    for (double a : c.theta_true)
        require(a >= kExcitabilityMin && a <= kExcitabilityMax, "case.theta_true", "entries must lie in [0, 0.52]");
    try {
        c.constants.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("config: case.constants: ") + e.what());
    }
    const auto& s = c.stimulus;
    require(s.i0 >= 0 && s.i0 < s.i1 && s.i1 <= c.nx && s.j0 >= 0 && s.j0 < s.j1 && s.j1 <= c.ny, "case.stimulus.block",
            "must be a non-empty block inside the grid");
    require(s.t_on >= 0.0 && s.t_off > s.t_on, "case.stimulus", "require 0 <= t_on < t_off");
    require(s.amplitude > 0.0, "case.stimulus.amplitude", "must be positive");
    const auto& e = c.electrodes;
    require(e.layout == "circle" || e.layout == "points", "case.electrodes.layout", "must be \"circle\" or \"points\"");
    if (e.layout == "circle") {
        require(e.count >= 1, "case.electrodes.count", "must be positive");
        require(e.radius_factor >= 1.0, "case.electrodes.radius_factor", "must be at least 1");
    } else {
        require(!e.points.empty(), "case.electrodes.points", "must not be empty");
    }
    require(c.simulation.dt > 0.0 && c.simulation.t_end > 0.0 && c.simulation.store_every >= 1, "case.simulation",
            "require dt > 0, t_end > 0, store_every >= 1");
    require(!std::isnan(c.snr_db) && c.snr_db != -std::numeric_limits<double>::infinity(), "case.snr_db",
            "must be a number or \"inf\"");

    try {
        surrogate.acquisition.validate(static_cast<Eigen::Index>(regions));
    } catch (const ConfigError& err) {
        throw ConfigError(std::string("config: surrogate: ") + err.what());
    }
    require(surrogate.init_design_size >= static_cast<int>(regions) + 1, "surrogate.init_design_size", "must be at least R + 1");
    require(surrogate.init_design_size <= surrogate.acquisition.budget_max, "surrogate.init_design_size",
            "must not exceed budget_max");

    const auto& p = sampling;
    require(p.chains >= 1, "sampling.chains", "must be positive");
    require(p.steps >= 1, "sampling.steps", "must be positive");
    require(p.burn_in_frac >= 0.0 && p.burn_in_frac < 1.0, "sampling.burn_in_frac", "must be in [0, 1)");
    require(p.thin >= 1, "sampling.thin", "must be at least 1");
    require(p.slice_draws >= 10 * p.mixture_components, "sampling.slice_draws", "need at least 10 per mixture component");
    require(p.slice_burn_in >= 0, "sampling.slice_burn_in", "must be non-negative");
    require(p.mixture_components >= 1, "sampling.mixture_components", "must be positive");
    require(p.target_acceptance_lo > 0.0 && p.target_acceptance_lo < p.target_acceptance_hi && p.target_acceptance_hi < 1.0,
            "sampling.target_acceptance", "require 0 < lo < hi < 1");
    if (p.sigma_p) require(*p.sigma_p > 0.0, "sampling.sigma_p", "must be positive");
    require(seed.has_value(), "seed", "a master seed is mandatory (config \"seed\" or --seed)");
}

std::uint64_t ExperimentConfig::master_seed() const {
    if (!seed) throw ConfigError("config: seed: a master seed is mandatory (config \"seed\" or --seed)");
    return *seed;
}

void to_json(json& j, const CaseConfig& c) {
    json pts = json::array();
    for (const auto& p : c.electrodes.points) pts.push_back({p.x, p.y});
    j = json{{"grid", {{"nx", c.nx}, {"ny", c.ny}, {"h", c.h}}},
             {"partition", {{"rows", c.partition_rows}, {"cols", c.partition_cols}}},
             {"constants",
              {{"k", c.constants.k}, {"d", c.constants.d}, {"e0", c.constants.e0}, {"mu1", c.constants.mu1}, {"mu2", c.constants.mu2}}},
             {"theta_true", c.theta_true},
             {"stimulus",
              {{"block", {c.stimulus.i0, c.stimulus.i1, c.stimulus.j0, c.stimulus.j1}},
               {"t_on", c.stimulus.t_on},
               {"t_off", c.stimulus.t_off},
               {"amplitude", c.stimulus.amplitude}}},
             {"electrodes",
              {{"layout", c.electrodes.layout},
               {"count", c.electrodes.count},
               {"radius_factor", c.electrodes.radius_factor},
               {"points", pts}}},
             {"simulation", {{"dt", c.simulation.dt}, {"t_end", c.simulation.t_end}, {"store_every", c.simulation.store_every}}}};
    if (std::isinf(c.snr_db)) {
        j["snr_db"] = "inf";
    } else {
        j["snr_db"] = c.snr_db;
    }
    if (c.lead_gain_seed) j["lead_gain_seed"] = *c.lead_gain_seed;
}

void to_json(json& j, const SurrogateConfig& c) {
    j = json{{"beta", c.acquisition.beta},
             {"budget_max", c.acquisition.budget_max},
             {"stall_tol", c.acquisition.stall_tol},
             {"hyperopt_every", c.acquisition.hyperopt_every},
             {"restarts", c.acquisition.restarts},
             {"init_design_size", c.init_design_size}};
}

void to_json(json& j, const SamplingConfig& c) {
    j = json{{"mode", std::string(to_string(c.mode))},
             {"chains", c.chains},
             {"steps", c.steps},
             {"burn_in_frac", c.burn_in_frac},
             {"thin", c.thin},
             {"slice_draws", c.slice_draws},
             {"slice_burn_in", c.slice_burn_in},
             {"mixture_components", c.mixture_components},
             {"target_acceptance", {c.target_acceptance_lo, c.target_acceptance_hi}}};
    if (c.sigma_p) j["sigma_p"] = *c.sigma_p;
}

void to_json(json& j, const ExperimentConfig& c) {
    j = json{{"case", c.case_config}, {"surrogate", c.surrogate}, {"sampling", c.sampling}, {"output_dir", c.output_dir}};
    if (c.seed) j["seed"] = *c.seed;
}

ExperimentConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto byte = std::min<std::size_t>(e.byte, text.size());
        const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
        throw ConfigError("config line " + std::to_string(line) + ": JSON syntax error: " + e.what());
    }
    ExperimentConfig cfg;
    Reader root(doc, "", text);
    if (root.has("template")) {
        std::string name;
        root.get("template", name);
        const auto base = template_config(name);
        if (!base) root.fail("template", "unknown template '" + name + "'");
        cfg = *base;
        cfg.seed.reset();
    }
    if (root.has("case")) read_case(root.sub("case"), cfg.case_config);
    if (root.has("surrogate")) read_surrogate(root.sub("surrogate"), cfg.surrogate);
    if (root.has("sampling")) read_sampling(root.sub("sampling"), cfg.sampling);
    if (root.has("seed")) {
        const json& s = root.raw("seed");
        if (!s.is_number_unsigned()) root.fail("seed", "expected a non-negative integer");
        cfg.seed = s.get<std::uint64_t>();
    }
    root.get("output_dir", cfg.output_dir);
    root.finish();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    auto& c = cfg.case_config;
    c.theta_true.assign(9, 0.15);
    c.theta_true[5] = 0.5;  // middle row, right block
    c.electrodes.count = 120;
    cfg.surrogate.acquisition.budget_max = 60;
    cfg.surrogate.init_design_size = 20;
    cfg.seed = 20240;
    return cfg;
}

ExperimentConfig two_region_config() {
    ExperimentConfig cfg;
    auto& c = cfg.case_config;
    c.partition_rows = 1;
    c.partition_cols = 2;
    c.theta_true = {0.15, 0.25};
    c.stimulus.i0 = 0;
    c.stimulus.i1 = 3;
    c.stimulus.j0 = 8;
    c.stimulus.j1 = 12;
    c.electrodes.count = 4;
    cfg.surrogate.acquisition.budget_max = 60;
    cfg.surrogate.init_design_size = 10;
    cfg.sampling.steps = 33332;
    cfg.seed = 7;
    return cfg;
}

ExperimentConfig coupled_config() {
    ExperimentConfig cfg = two_region_config();
    auto& c = cfg.case_config;
    // Regions j < 10 and j >= 10 mirror each other about y = 4.75, as do the
    // stimulus block and every electrode, so H has pairwise equal columns.
    c.theta_true = {0.22, 0.27};
    c.snr_db = 14.0;
    c.electrodes.layout = "points";
    c.electrodes.points = {{-2.0, 4.75}, {12.0, 4.75}};
    cfg.sampling.steps = 20000;
    cfg.seed = 11;
    return cfg;
}

std::optional<ExperimentConfig> template_config(const std::string& name) {
    if (name == "default") return default_config();
    if (name == "two-region") return two_region_config();
    if (name == "coupled") return coupled_config();
    return std::nullopt;
}

}  // namespace gpmcmc::app
