#include "core/manifest.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace superspill {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("manifest field '" + path + "': " + what);
}

template <typename T>
T get_or(const json& j, const std::string& key, const T& fallback, const std::string& path) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(path + "." + key, e.what());
    }
}

template <typename T>
T require(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) fail(path + "." + key, "missing");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(path + "." + key, e.what());
    }
}

Distribution parse_dist(const json& j, const std::string& path) {
    std::string kind = require<std::string>(j, "kind", path);
    if (kind == "lognormal")
        return LogNormalDist{get_or<double>(j, "mu", 0.0, path), get_or<double>(j, "sigma", 1.0, path)};
    if (kind == "pareto")
        return ParetoDist{get_or<double>(j, "xmin", 1.0, path), get_or<double>(j, "shape", 2.0, path)};
    if (kind == "uniform")
        return UniformDist{get_or<double>(j, "lo", 0.0, path), get_or<double>(j, "hi", 1.0, path)};
    if (kind == "degenerate") return DegenerateDist{get_or<double>(j, "value", 1.0, path)};
    fail(path + ".kind", "unknown distribution '" + kind + "'");
}

ModelParams parse_model(const json& j, const std::string& path) {
    ModelParams p;
    p.rho = get_or<double>(j, "rho", p.rho, path);
    p.theta = get_or<double>(j, "theta", p.theta, path);
    p.w = get_or<double>(j, "w", p.w, path);
    p.f = get_or<double>(j, "f", p.f, path);
    p.f_e = get_or<double>(j, "f_e", p.f_e, path);
    p.delta = get_or<double>(j, "delta", p.delta, path);
    p.alpha = get_or<double>(j, "alpha", p.alpha, path);
    p.tau = get_or<double>(j, "tau", p.tau, path);
    p.psi = get_or<double>(j, "psi", p.psi, path);
    p.c = get_or<double>(j, "c", p.c, path);
    if (j.contains("capability_dist"))
        p.capability_dist = parse_dist(j.at("capability_dist"), path + ".capability_dist");
    try {
        p.validate();
    } catch (const ConfigError& e) {
        fail(path, e.what());
    }
    return p;
}

}  // namespace

const std::vector<std::string>& known_stages() {
    static const std::vector<std::string> kStages = {
        "simulate", "deflate",     "impute",  "classify", "tfp",
        "spillovers", "instruments", "regress", "decompose"};
    return kStages;
}

std::string RunManifest::resolve(const std::string& path) const {
    if (path.empty() || source_dir.empty()) return path;
    std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(source_dir) / p).string();
}

RunManifest parse_manifest_json(const std::string& text, const std::string& source_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
    }
    RunManifest m;
    m.source_dir = source_dir;

    if (j.contains("seed")) {
        m.seed = require<std::uint64_t>(j, "seed", "");
        m.seed_set = true;
    }
    m.output_dir = get_or<std::string>(j, "output_dir", m.output_dir, "");
    m.threads = get_or<int>(j, "threads", 1, "");
    if (m.threads < 1) fail("threads", "must be >= 1");

    if (j.contains("inputs")) {
        const json& in = j.at("inputs");
        m.panel_path = get_or<std::string>(in, "panel", "", "inputs");
        m.io_table_path = get_or<std::string>(in, "io_table", "", "inputs");
        m.deflators_path = get_or<std::string>(in, "deflators", "", "inputs");
        m.tariffs_path = get_or<std::string>(in, "tariffs", "", "inputs");
        m.regions_path = get_or<std::string>(in, "regions", "", "inputs");
        m.province_island_path = get_or<std::string>(in, "province_island", "", "inputs");
    }
    if (j.contains("schema"))
        for (const auto& [k, v] : j.at("schema").items()) m.schema[k] = v.get<std::string>();

    if (j.contains("stages")) {
        const json& st = j.at("stages");
        for (const std::string& name : known_stages())
            if (get_or<bool>(st, name, false, "stages")) m.stages.push_back(name);
        for (const auto& [k, v] : st.items())
            if (std::find(known_stages().begin(), known_stages().end(), k) ==
                known_stages().end())
                fail("stages." + k, "unknown stage");
    }

    m.deflator_base_year = get_or<int>(j, "deflator_base_year", m.deflator_base_year, "");

    if (j.contains("superstar")) {
        const json& s = j.at("superstar");
        m.superstar.top_share_cutoff =
            get_or<double>(s, "top_share_cutoff", m.superstar.top_share_cutoff, "superstar");
        m.superstar.min_tenure_years =
            get_or<int>(s, "min_tenure_years", m.superstar.min_tenure_years, "superstar");
        m.superstar.top_frequency =
            get_or<double>(s, "top_frequency", m.superstar.top_frequency, "superstar");
        if (s.contains("foreign_threshold") && s.at("foreign_threshold").is_null())
            m.superstar.foreign_threshold.reset();
        else
            m.superstar.foreign_threshold = get_or<double>(
                s, "foreign_threshold", *m.superstar.foreign_threshold, "superstar");
        std::string variant = get_or<std::string>(s, "variant", "year_frequency", "superstar");
        if (variant == "year_frequency")
            m.superstar.variant = SuperstarRule::Variant::YearFrequency;
        else if (variant == "median_share")
            m.superstar.variant = SuperstarRule::Variant::MedianShare;
        else
            fail("superstar.variant", "must be year_frequency or median_share");
        try {
            m.superstar.validate();
        } catch (const ConfigError& e) {
            fail("superstar", e.what());
        }
    }

    if (j.contains("proxy")) {
        const json& p = j.at("proxy");
        std::string field = get_or<std::string>(p, "proxy_field", "materials", "proxy");
        if (field == "materials") m.proxy.proxy_field = ProxySpec::Proxy::Materials;
        else if (field == "investment") m.proxy.proxy_field = ProxySpec::Proxy::Investment;
        else fail("proxy.proxy_field", "must be materials or investment");
        m.proxy.first_stage_poly_degree =
            get_or<int>(p, "first_stage_poly_degree", m.proxy.first_stage_poly_degree, "proxy");
        m.proxy.markov_poly_degree =
            get_or<int>(p, "markov_poly_degree", m.proxy.markov_poly_degree, "proxy");
        m.tfp_fallback_2digit = get_or<bool>(p, "fallback_2digit", true, "proxy");
        try {
            m.proxy.validate();
        } catch (const ConfigError& e) {
            fail("proxy", e.what());
        }
    }

    if (j.contains("imputation")) {
        const json& im = j.at("imputation");
        if (im.contains("gap_average")) {
            const json& g = im.at("gap_average");
            GapImputeConfig cfg;
            cfg.year = require<int>(g, "year", "imputation.gap_average");
            cfg.variables = get_or<std::vector<std::string>>(
                g, "variables", {"capital", "materials", "energy"}, "imputation.gap_average");
            for (const auto& v : cfg.variables) field_from_name(v);  // validates
            m.gap_impute = cfg;
        }
        if (im.contains("capital_regression")) {
            const json& c = im.at("capital_regression");
            CapitalImputeConfig cfg;
            cfg.target_year = require<int>(c, "target_year", "imputation.capital_regression");
            cfg.per_sector = get_or<bool>(c, "per_sector", false, "imputation.capital_regression");
            m.capital_impute = cfg;
        }
    }

    if (j.contains("instruments")) {
        const json& iv = j.at("instruments");
        m.instrument_base_year = get_or<int>(iv, "base_year", m.instrument_base_year,
                                             "instruments");
        std::string skill = get_or<std::string>(iv, "labor_skill", "unskilled", "instruments");
        if (skill == "unskilled") m.instrument_labor_skill = LaborSkill::Unskilled;
        else if (skill == "all") m.instrument_labor_skill = LaborSkill::All;
        else fail("instruments.labor_skill", "must be unskilled or all");
    }

    if (j.contains("regressions")) {
        int idx = 0;
        for (const json& r : j.at("regressions")) {
            std::string path = "regressions[" + std::to_string(idx++) + "]";
            ManifestRegression reg;
            reg.name = require<std::string>(r, "name", path);
            reg.dependent = require<std::string>(r, "dependent", path);
            reg.endogenous = get_or<std::vector<std::string>>(r, "endogenous", {}, path);
            reg.instruments = get_or<std::vector<std::string>>(r, "instruments", {}, path);
            reg.exogenous = get_or<std::vector<std::string>>(r, "exogenous", {}, path);
            reg.fe = get_or<std::vector<std::string>>(
                r, "fe", {"sector3", "province", "island", "year"}, path);
            reg.cluster = get_or<std::string>(r, "cluster", "firm_id", path);
            reg.sample = get_or<std::string>(r, "sample", "non_superstar", path);
            if (reg.sample != "non_superstar" && reg.sample != "all")
                fail(path + ".sample", "must be non_superstar or all");
            reg.ipw = get_or<bool>(r, "ipw", false, path);
            reg.interact_fe = get_or<bool>(r, "interact_fe", false, path);
            reg.lag_exposure = get_or<bool>(r, "lag_exposure", false, path);
            if (r.contains("interactions")) {
                for (const json& it : r.at("interactions")) {
                    ManifestRegression::Interaction x;
                    x.var = require<std::string>(it, "var", path + ".interactions");
                    x.instrument =
                        get_or<std::string>(it, "instrument", "", path + ".interactions");
                    x.with = require<std::string>(it, "with", path + ".interactions");
                    reg.interactions.push_back(std::move(x));
                }
            }
            m.regressions.push_back(std::move(reg));
        }
    }

    if (j.contains("windows")) {
        int idx = 0;
        for (const json& w : j.at("windows")) {
            std::string path = "windows[" + std::to_string(idx++) + "]";
            ManifestWindow win;
            win.t1 = require<int>(w, "t1", path);
            win.t2 = require<int>(w, "t2", path);
            win.continuity_required = get_or<bool>(w, "continuity_required", true, path);
            if (win.t1 >= win.t2) fail(path, "t1 must be < t2");
            m.windows.push_back(win);
        }
    }
    m.decomposition_groups = get_or<std::vector<std::string>>(
        j, "decomposition_groups", {"superstar"}, "");
    for (const auto& g : m.decomposition_groups)
        if (g != "superstar" && g != "ownership")
            fail("decomposition_groups", "unknown group '" + g + "'");

    if (j.contains("simulate")) {
        const json& s = j.at("simulate");
        m.has_sim = true;
        m.sim.n_firms_initial = get_or<int>(s, "n_firms_initial", m.sim.n_firms_initial,
                                            "simulate");
        m.sim.n_years = get_or<int>(s, "n_years", m.sim.n_years, "simulate");
        m.sim.n_sectors = get_or<int>(s, "n_sectors", m.sim.n_sectors, "simulate");
        m.sim.n_provinces = get_or<int>(s, "n_provinces", m.sim.n_provinces, "simulate");
        m.sim.superstar_fraction =
            get_or<double>(s, "superstar_fraction", m.sim.superstar_fraction, "simulate");
        m.sim.beta_l = get_or<double>(s, "beta_l", m.sim.beta_l, "simulate");
        m.sim.beta_k = get_or<double>(s, "beta_k", m.sim.beta_k, "simulate");
        m.sim.productivity_ar1 =
            get_or<double>(s, "productivity_ar1", m.sim.productivity_ar1, "simulate");
        m.sim.noise_sd = get_or<double>(s, "noise_sd", m.sim.noise_sd, "simulate");
        m.sim.entry_rate = get_or<double>(s, "entry_rate", m.sim.entry_rate, "simulate");
        m.sim.first_year = get_or<int>(s, "first_year", m.sim.first_year, "simulate");
        if (j.contains("seed")) m.sim.seed = m.seed;
        try {
            m.sim.validate();
        } catch (const ConfigError& e) {
            fail("simulate", e.what());
        }
        if (s.contains("model")) m.sim_model = parse_model(s.at("model"), "simulate.model");
    }
    return m;
}

RunManifest parse_manifest_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_manifest_json(buf.str(),
                               std::filesystem::path(path).parent_path().string());
}

void validate_manifest(const RunManifest& m) {
    auto enabled = [&m](const std::string& s) {
        return std::find(m.stages.begin(), m.stages.end(), s) != m.stages.end();
    };
    bool simulated = enabled("simulate");
    if (enabled("simulate")) {
        if (!m.has_sim) throw ConfigError("stage 'simulate' enabled but no 'simulate' config");
        if (!m.seed_set) throw ConfigError("seed is mandatory when simulation is requested");
    }
    auto need_file = [&m](const std::string& path, const std::string& field) {
        if (path.empty()) throw ConfigError("inputs." + field + " is required but empty");
        if (!std::filesystem::exists(m.resolve(path)))
            throw ConfigError("inputs." + field + ": file not found: " + m.resolve(path));
    };
    if (!simulated) {
        bool needs_panel = false;
        for (const auto& s : m.stages)
            if (s != "simulate") needs_panel = true;
        if (needs_panel) need_file(m.panel_path, "panel");
        if (enabled("deflate")) need_file(m.deflators_path, "deflators");
        if (enabled("spillovers")) need_file(m.io_table_path, "io_table");
        if (enabled("instruments")) {
            need_file(m.tariffs_path, "tariffs");
            if (!m.regions_path.empty()) need_file(m.regions_path, "regions");
        }
    }
    if (enabled("impute") && !m.gap_impute && !m.capital_impute)
        throw ConfigError("stage 'impute' enabled but no imputation config");
    std::vector<std::string> names;
    for (const auto& r : m.regressions) {
        if (std::find(names.begin(), names.end(), r.name) != names.end())
            throw ConfigError("duplicate regression name '" + r.name + "'");
        names.push_back(r.name);
        if (r.instruments.size() < r.endogenous.size())
            throw ConfigError("regression '" + r.name + "': fewer instruments than endogenous");
    }
}

}  // namespace superspill
