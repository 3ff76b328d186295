#include "core/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>

#include "core/decomposition.hpp"
#include "core/errors.hpp"
#include "core/panel_ops.hpp"

namespace superspill {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) { return csv::format_double(v); }

void write_flags_csv(const std::string& path, const SuperstarFlags& flags) {
    csv::Table t;
    t.header = {"firm_id", "superstar", "superstar_foreign", "superstar_domestic"};
    for (const auto& [firm, star] : flags.superstar) {
        auto own = flags.ownership.count(firm) ? flags.ownership.at(firm) : Ownership::None;
        t.rows.push_back({firm, star ? "1" : "0",
                          (star && own == Ownership::Foreign) ? "1" : "0",
                          (star && own == Ownership::Domestic) ? "1" : "0"});
    }
    csv::write_file(path, t);
}

SuperstarFlags read_flags_csv(const std::string& path) {
    csv::Table t = csv::read_file(path);
    auto cf = t.column("firm_id"), cs = t.column("superstar"), cfo = t.column("superstar_foreign"),
         cd = t.column("superstar_domestic");
    if (!cf || !cs || !cfo || !cd) throw SchemaError("flags CSV: missing columns");
    SuperstarFlags flags;
    for (const auto& r : t.rows) {
        bool star = r[*cs] == "1";
        flags.superstar[r[*cf]] = star;
        Ownership own = Ownership::None;
        if (r[*cfo] == "1") own = Ownership::Foreign;
        else if (r[*cd] == "1") own = Ownership::Domestic;
        flags.ownership[r[*cf]] = own;
    }
    return flags;
}

void write_spillovers_csv(const std::string& path, const SpilloverSeries& h,
                          const SpilloverSeries& b, const SpilloverSeries& f) {
    csv::Table t;
    t.header = {"sector3", "province", "year", "hspill", "bspill", "fspill"};
    std::set<CellKey> keys;
    for (const auto& [k, _] : h.values) keys.insert(k);
    for (const auto& [k, _] : b.values) keys.insert(k);
    for (const auto& [k, _] : f.values) keys.insert(k);
    auto cell = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
    for (const CellKey& k : keys)
        t.rows.push_back({k.sector3, k.province, std::to_string(k.year), cell(h.lookup(k)),
                          cell(b.lookup(k)), cell(f.lookup(k))});
    csv::write_file(path, t);
}

void read_spillovers_csv(const std::string& path, SpilloverSeries& h, SpilloverSeries& b,
                         SpilloverSeries& f) {
    csv::Table t = csv::read_file(path);
    auto cs = t.column("sector3"), cp = t.column("province"), cy = t.column("year"),
         ch = t.column("hspill"), cb = t.column("bspill"), cf = t.column("fspill");
    if (!cs || !cp || !cy || !ch || !cb || !cf)
        throw SchemaError("spillovers CSV: missing columns");
    h.kind = SpillKind::H;
    b.kind = SpillKind::B;
    f.kind = SpillKind::F;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        CellKey key{r[*cs], r[*cp], static_cast<int>(csv::parse_int(r[*cy], "spillovers"))};
        if (!r[*ch].empty()) h.values[key] = csv::parse_double(r[*ch], "hspill");
        if (!r[*cb].empty()) b.values[key] = csv::parse_double(r[*cb], "bspill");
        if (!r[*cf].empty()) f.values[key] = csv::parse_double(r[*cf], "fspill");
    }
}

void write_instruments_csv(const std::string& path, const InstrumentSeries& lab,
                           const InstrumentSeries& tarr,
                           const std::map<std::pair<std::string, int>, double>& road) {
    csv::Table t;
    t.header = {"sector3", "province", "year", "lab_bartik", "tarr_bartik", "road_density"};
    std::set<CellKey> keys;
    for (const auto& [k, _] : lab.values) keys.insert(k);
    for (const auto& [k, _] : tarr.values) keys.insert(k);
    auto cell = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
    for (const CellKey& k : keys) {
        auto rit = road.find({k.province, k.year});
        t.rows.push_back({k.sector3, k.province, std::to_string(k.year), cell(lab.lookup(k)),
                          cell(tarr.lookup(k)),
                          rit == road.end() ? std::string() : fmt(rit->second)});
    }
    csv::write_file(path, t);
}

void read_instruments_csv(const std::string& path, InstrumentSeries& lab, InstrumentSeries& tarr,
                          std::map<std::pair<std::string, int>, double>& road) {
    csv::Table t = csv::read_file(path);
    auto cs = t.column("sector3"), cp = t.column("province"), cy = t.column("year"),
         cl = t.column("lab_bartik"), ct = t.column("tarr_bartik"), cr = t.column("road_density");
    if (!cs || !cp || !cy || !cl || !ct || !cr)
        throw SchemaError("instruments CSV: missing columns");
    lab.kind = InstrumentKind::LabBartik;
    tarr.kind = InstrumentKind::TarrBartik;
    for (const auto& r : t.rows) {
        CellKey key{r[*cs], r[*cp], static_cast<int>(csv::parse_int(r[*cy], "instruments"))};
        if (!r[*cl].empty()) lab.values[key] = csv::parse_double(r[*cl], "lab_bartik");
        if (!r[*ct].empty()) tarr.values[key] = csv::parse_double(r[*ct], "tarr_bartik");
        if (!r[*cr].empty())
            road[{key.province, key.year}] = csv::parse_double(r[*cr], "road_density");
    }
}

}  // namespace

PipelineRunner::PipelineRunner(RunManifest manifest) : manifest_(std::move(manifest)) {}

int PipelineRunner::stage_index(const std::string& name) {
    const auto& stages = known_stages();
    auto it = std::find(stages.begin(), stages.end(), name);
    if (it == stages.end()) throw ConfigError("unknown stage '" + name + "'");
    return static_cast<int>(it - stages.begin());
}

std::string PipelineRunner::out_path(const std::string& name) const {
    return (fs::path(manifest_.resolve(manifest_.output_dir)) / name).string();
}

Panel PipelineRunner::resolve_panel(bool need_tfp) const {
    if (need_tfp) {
        std::string p = out_path(kPanelTfp);
        if (!fs::exists(p))
            throw IoError("panel with TFP not found (" + p + "); run the tfp stage first");
        return load_panel(p);
    }
    for (const char* candidate : {kPanelImputed, kPanelDeflated, kPanelSim}) {
        std::string p = out_path(candidate);
        if (fs::exists(p)) return load_panel(p);
    }
    if (manifest_.panel_path.empty()) throw ConfigError("inputs.panel is required but empty");
    LoadReport report;
    return load_panel(manifest_.resolve(manifest_.panel_path), manifest_.schema, &report);
}

SuperstarFlags PipelineRunner::resolve_flags() const {
    std::string p = out_path(kFlags);
    if (fs::exists(p)) return read_flags_csv(p);
    std::string pt = out_path(kFlagsTrue);
    if (fs::exists(pt)) return read_flags_csv(pt);
    throw IoError("superstar flags not found; run the classify stage first");
}

StageRecord PipelineRunner::stage_simulate() {
    StageRecord rec;
    rec.stage = "simulate";
    rec.status = "ok";
    if (!manifest_.has_sim) throw ConfigError("no 'simulate' config in the manifest");
    if (!manifest_.seed_set) throw ConfigError("seed is mandatory when simulation is requested");
    SimPanelConfig cfg = manifest_.sim;
    cfg.seed = manifest_.seed;
    SimResult sim = simulate_panel(cfg, manifest_.sim_model);
    rec.rows_out = static_cast<long>(sim.panel.size());

    write_panel(sim.panel, out_path(kPanelSim));

    csv::Table gt;
    gt.header = {"firm_id", "year", "true_tfp"};
    for (const auto& [key, tfp] : sim.truth.true_tfp)
        gt.rows.push_back({key.first, std::to_string(key.second), fmt(tfp)});
    csv::write_file(out_path(kGroundTruth), gt);

    csv::Table gp;
    gp.header = {"beta_l", "beta_k", "alpha", "tau", "psi", "seed"};
    gp.rows.push_back({fmt(sim.truth.beta_l), fmt(sim.truth.beta_k), fmt(sim.truth.alpha),
                       fmt(sim.truth.tau), fmt(sim.truth.psi), std::to_string(sim.truth.seed)});
    csv::write_file(out_path(kGroundTruthParams), gp);

    write_flags_csv(out_path(kFlagsTrue), sim.truth.flags);
    write_spillovers_csv(out_path(kSpilloversTrue), sim.truth.hspill, sim.truth.bspill,
                         sim.truth.fspill);

    csv::Table io;
    io.header = {"row_sector", "col_sector", "coeff"};
    for (std::size_t k = 0; k < sim.truth.io.sectors.size(); ++k)
        for (std::size_t l = 0; l < sim.truth.io.sectors.size(); ++l)
            if (sim.truth.io.coeffs[k][l] != 0.0)
                io.rows.push_back({sim.truth.io.sectors[k], sim.truth.io.sectors[l],
                                   fmt(sim.truth.io.coeffs[k][l])});
    csv::write_file(out_path("io_table.csv"), io);

    csv::Table tar;
    tar.header = {"sector3", "year", "mfn"};
    for (const auto& [key, v] : sim.truth.tariffs.entries)
        tar.rows.push_back({key.first, std::to_string(key.second), fmt(v)});
    csv::write_file(out_path("tariffs.csv"), tar);

    csv::Table reg;
    reg.header = {"province", "year", "road_km", "area_km2"};
    for (const auto& r : sim.truth.regions)
        reg.rows.push_back({r.province, std::to_string(r.year),
                            r.road_km ? fmt(*r.road_km) : std::string(), fmt(r.area_km2)});
    csv::write_file(out_path("regions.csv"), reg);

    csv::Table pi;
    pi.header = {"province", "island"};
    for (const auto& [p, i] : sim.truth.province_island) pi.rows.push_back({p, i});
    csv::write_file(out_path("province_island.csv"), pi);

    // Identity deflators over the simulated sector2-year span.
    csv::Table defl;
    defl.header = {"sector2", "year", "wpi"};
    std::set<std::pair<std::string, int>> cells;
    for (const FirmYear& r : sim.panel.rows()) cells.insert({r.sector2, r.year});
    for (const auto& [s2, y] : cells) defl.rows.push_back({s2, std::to_string(y), "100"});
    csv::write_file(out_path("deflators.csv"), defl);
    return rec;
}

StageRecord PipelineRunner::stage_deflate() {
    StageRecord rec;
    rec.stage = "deflate";
    rec.status = "ok";
    Panel panel = resolve_panel(false);
    rec.rows_in = static_cast<long>(panel.size());
    std::string defl_path = fs::exists(out_path("deflators.csv"))
                                ? out_path("deflators.csv")
                                : manifest_.resolve(manifest_.deflators_path);
    DeflatorTable deflators = load_deflators(defl_path, manifest_.deflator_base_year);
    Panel out = apply_deflators(panel, deflators);
    rec.rows_out = static_cast<long>(out.size());
    write_panel(out, out_path(kPanelDeflated));
    return rec;
}

StageRecord PipelineRunner::stage_impute() {
    StageRecord rec;
    rec.stage = "impute";
    rec.status = "ok";
    Panel panel = resolve_panel(false);
    rec.rows_in = static_cast<long>(panel.size());

    csv::Table report;
    report.header = {"step", "detail", "count"};
    if (manifest_.gap_impute) {
        std::vector<Field> fields;
        for (const auto& name : manifest_.gap_impute->variables)
            fields.push_back(field_from_name(name));
        GapImputeReport gr;
        panel = impute_gap_average(panel, fields, manifest_.gap_impute->year, &gr);
        report.rows.push_back({"gap_average", "imputed", std::to_string(gr.imputed)});
        for (const auto& [firm, field] : gr.unimputable)
            report.rows.push_back({"gap_average_missing_neighbor", firm + ":" + field, "1"});
    }
    if (manifest_.capital_impute) {
        CapitalImputeReport cr;
        panel = impute_capital_regression(panel, manifest_.capital_impute->target_year,
                                          manifest_.capital_impute->per_sector, &cr);
        report.rows.push_back({"capital_regression", "training_rows",
                               std::to_string(cr.training_rows)});
        report.rows.push_back({"capital_regression", "imputed", std::to_string(cr.imputed)});
        report.rows.push_back({"capital_regression", "skipped_missing_lags",
                               std::to_string(cr.skipped_missing_lags)});
    }
    rec.rows_out = static_cast<long>(panel.size());
    write_panel(panel, out_path(kPanelImputed), /*include_derived=*/true);
    csv::write_file(out_path(kImputeReport), report);
    return rec;
}

StageRecord PipelineRunner::stage_classify() {
    StageRecord rec;
    rec.stage = "classify";
    rec.status = "ok";
    Panel panel = resolve_panel(false);
    rec.rows_in = static_cast<long>(panel.size());
    ClassifyDiagnostics diag;
    SuperstarFlags flags = classify_superstars(panel, manifest_.superstar, &diag);
    rec.rows_out = static_cast<long>(diag.firms_flagged);
    rec.warnings = diag.single_firm_cells
                       ? std::to_string(diag.single_firm_cells) + " single-firm cells"
                       : "";
    write_flags_csv(out_path(kFlags), flags);
    return rec;
}

StageRecord PipelineRunner::stage_tfp() {
    StageRecord rec;
    rec.stage = "tfp";
    rec.status = "ok";
    Panel panel = resolve_panel(false);
    rec.rows_in = static_cast<long>(panel.size());

    EstimateSet estimates = estimate_all(panel, manifest_.proxy, manifest_.tfp_fallback_2digit,
                                         manifest_.threads);
    TfpReport report;
    panel = compute_tfp(panel, estimates, &report);
    panel = tfp_growth(panel);
    panel = labour_productivity(panel, &report);

    csv::Table est;
    est.header = {"sector3", "beta_l", "beta_k", "n_obs", "converged"};
    for (const auto& e : estimates.estimates)
        est.rows.push_back({e.sector3, fmt(e.beta_l), fmt(e.beta_k), std::to_string(e.n_obs),
                            e.converged ? "1" : "0"});
    csv::write_file(out_path(kEstimates), est);
    write_panel(panel, out_path(kPanelTfp), /*include_derived=*/true);
    rec.rows_out = static_cast<long>(panel.size());
    if (!estimates.skipped_sectors.empty())
        rec.warnings = std::to_string(estimates.skipped_sectors.size()) + " sectors skipped";
    return rec;
}

StageRecord PipelineRunner::stage_spillovers() {
    StageRecord rec;
    rec.stage = "spillovers";
    rec.status = "ok";
    Panel panel = resolve_panel(false);
    rec.rows_in = static_cast<long>(panel.size());
    SuperstarFlags flags = resolve_flags();
    std::string io_path = fs::exists(out_path("io_table.csv"))
                              ? out_path("io_table.csv")
                              : manifest_.resolve(manifest_.io_table_path);
    IOTable io = load_io_table(io_path);

    SpilloverDiagnostics diag;
    SpilloverSeries h = hspill(panel, flags, &diag);
    SpilloverSeries b = bspill(h, io, &diag);
    SpilloverSeries f = fspill(h, io, &diag);
    write_spillovers_csv(out_path(kSpillovers), h, b, f);
    rec.rows_out = static_cast<long>(h.values.size());
    if (!diag.sectors_not_in_io.empty())
        rec.warnings = std::to_string(diag.sectors_not_in_io.size()) + " sectors not in IO table";
    return rec;
}

StageRecord PipelineRunner::stage_instruments() {
    StageRecord rec;
    rec.stage = "instruments";
    rec.status = "ok";
    Panel panel = resolve_panel(false);
    rec.rows_in = static_cast<long>(panel.size());
    SuperstarFlags flags = resolve_flags();
    std::string tariff_path = fs::exists(out_path("tariffs.csv"))
                                  ? out_path("tariffs.csv")
                                  : manifest_.resolve(manifest_.tariffs_path);
    TariffTable tariffs = load_tariffs(tariff_path);

    BartikDiagnostics diag;
    auto shares = base_labor_share(panel, flags, manifest_.instrument_base_year,
                                   manifest_.instrument_labor_skill, &diag);
    InstrumentSeries lab = lab_bartik_iv(shares, panel, &diag);
    InstrumentSeries tarr =
        tariff_bartik_iv(panel, flags, tariffs, manifest_.instrument_base_year, &diag);

    std::map<std::pair<std::string, int>, double> road;
    std::string region_path = fs::exists(out_path("regions.csv"))
                                  ? out_path("regions.csv")
                                  : manifest_.resolve(manifest_.regions_path);
    if (!region_path.empty() && fs::exists(region_path))
        road = road_density(load_regions(region_path));

    write_instruments_csv(out_path(kInstruments), lab, tarr, road);
    rec.rows_out = static_cast<long>(lab.values.size());
    if (diag.missing_growth_cells)
        rec.warnings = std::to_string(diag.missing_growth_cells) + " cells without LOO growth";
    return rec;
}

Frame build_regression_frame(const Panel& panel, const SuperstarFlags& flags,
                             const SpilloverSeries& hs, const SpilloverSeries& bs,
                             const SpilloverSeries& fs_, const InstrumentSeries& lab,
                             const InstrumentSeries& tarr,
                             const std::map<std::pair<std::string, int>, double>& road) {
    const auto& rows = panel.rows();
    const std::size_t n = rows.size();
    Frame frame;
    frame.n_rows = n;

    auto cell_series = [&rows, n](auto lookup) {
        std::vector<std::optional<double>> out(n);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = lookup(CellKey{rows[i].sector3, rows[i].province, rows[i].year});
        return out;
    };
    auto lagged_series = [&rows, n](auto lookup) {
        std::vector<std::optional<double>> out(n);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = lookup(CellKey{rows[i].sector3, rows[i].province, rows[i].year - 1});
        return out;
    };

    auto h_look = [&hs](const CellKey& k) { return hs.lookup(k); };
    auto b_look = [&bs](const CellKey& k) { return bs.lookup(k); };
    auto f_look = [&fs_](const CellKey& k) { return fs_.lookup(k); };
    auto lab_look = [&lab](const CellKey& k) { return lab.lookup(k); };
    auto tarr_look = [&tarr](const CellKey& k) { return tarr.lookup(k); };

    frame.add_numeric("hspill", cell_series(h_look));
    frame.add_numeric("bspill", cell_series(b_look));
    frame.add_numeric("fspill", cell_series(f_look));
    frame.add_numeric("lab_bartik", cell_series(lab_look));
    frame.add_numeric("tarr_bartik", cell_series(tarr_look));
    frame.add_numeric("hspill_lag", lagged_series(h_look));
    frame.add_numeric("bspill_lag", lagged_series(b_look));
    frame.add_numeric("fspill_lag", lagged_series(f_look));
    frame.add_numeric("lab_bartik_lag", lagged_series(lab_look));
    frame.add_numeric("tarr_bartik_lag", lagged_series(tarr_look));

    std::vector<std::optional<double>> road_col(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto it = road.find({rows[i].province, rows[i].year});
        if (it != road.end()) road_col[i] = it->second;
    }
    frame.add_numeric("road_density", std::move(road_col));

    std::vector<std::optional<double>> phi(n), dphi(n), lp(n), nonstar(n);
    for (std::size_t i = 0; i < n; ++i) {
        phi[i] = rows[i].phi;
        lp[i] = rows[i].lp;
        // Growth regressions exclude the base-year rows by construction.
        if (rows[i].dphi && !rows[i].dphi_base_year) dphi[i] = rows[i].dphi;
        nonstar[i] = flags.is_superstar(rows[i].firm_id) ? 0.0 : 1.0;
    }
    frame.add_numeric("phi", std::move(phi));
    frame.add_numeric("dphi", std::move(dphi));
    frame.add_numeric("lp", std::move(lp));
    frame.add_numeric("non_superstar", std::move(nonstar));

    ControlColumns cc = controls(panel, flags);
    frame.add_numeric("hhi", std::move(cc.hhi));
    frame.add_numeric("import_intensity", std::move(cc.import_intensity));
    frame.add_numeric("absorptive", std::move(cc.absorptive));
    frame.add_numeric("d_foreign", std::move(cc.d_foreign));
    frame.add_numeric("d_exporter", std::move(cc.d_exporter));

    std::vector<std::string> sector3(n), sector2(n), province(n), island(n), year(n), firm(n);
    for (std::size_t i = 0; i < n; ++i) {
        sector3[i] = rows[i].sector3;
        sector2[i] = rows[i].sector2;
        province[i] = rows[i].province;
        island[i] = rows[i].island;
        year[i] = std::to_string(rows[i].year);
        firm[i] = rows[i].firm_id;
    }
    frame.add_key("sector3", std::move(sector3));
    frame.add_key("sector2", std::move(sector2));
    frame.add_key("province", std::move(province));
    frame.add_key("island", std::move(island));
    frame.add_key("year", std::move(year));
    frame.add_key("firm_id", std::move(firm));
    return frame;
}

namespace {

Frame filter_frame(const Frame& in, const std::vector<bool>& keep) {
    Frame out;
    std::size_t n = 0;
    for (bool k : keep)
        if (k) ++n;
    out.n_rows = n;
    for (const auto& [name, col] : in.numeric) {
        std::vector<std::optional<double>> c;
        c.reserve(n);
        for (std::size_t i = 0; i < keep.size(); ++i)
            if (keep[i]) c.push_back(col[i]);
        out.numeric[name] = std::move(c);
    }
    for (const auto& [name, col] : in.keys) {
        std::vector<std::string> c;
        c.reserve(n);
        for (std::size_t i = 0; i < keep.size(); ++i)
            if (keep[i]) c.push_back(col[i]);
        out.keys[name] = std::move(c);
    }
    return out;
}

std::string lag_name(const std::string& col) {
    static const std::set<std::string> kCellSeries = {"hspill", "bspill", "fspill",
                                                      "lab_bartik", "tarr_bartik"};
    return kCellSeries.count(col) ? col + "_lag" : col;
}

}  // namespace

RegressionRun run_manifest_regression(const ManifestRegression& reg, const Frame& master,
                                      const Panel& panel, const SuperstarFlags& flags) {
    // Sample filter.
    Frame frame = master;
    if (reg.sample == "non_superstar") {
        const auto& rows = panel.rows();
        std::vector<bool> keep(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            keep[i] = !flags.is_superstar(rows[i].firm_id);
        frame = filter_frame(master, keep);
    }

    RegressionSpec spec;
    spec.name = reg.name;
    spec.dependent = reg.dependent;
    spec.endogenous = reg.endogenous;
    spec.instruments = reg.instruments;
    spec.exogenous = reg.exogenous;
    spec.fe_dims = reg.fe;
    spec.cluster = reg.cluster;
    spec.interact_fe = reg.interact_fe;

    if (reg.lag_exposure) {
        for (auto& c : spec.endogenous) c = lag_name(c);
        for (auto& c : spec.instruments) c = lag_name(c);
    }

    // Interactions: endogenous x dummy instrumented by instrument x dummy.
    for (const auto& ix : reg.interactions) {
        std::string var = reg.lag_exposure ? lag_name(ix.var) : ix.var;
        std::string inst = reg.lag_exposure ? lag_name(ix.instrument) : ix.instrument;
        const auto& a = frame.numeric.at(var);
        const auto& d = frame.numeric.at(ix.with);
        std::vector<std::optional<double>> prod(frame.n_rows);
        for (std::size_t i = 0; i < frame.n_rows; ++i)
            if (a[i] && d[i]) prod[i] = *a[i] * *d[i];
        std::string pname = var + "_x_" + ix.with;
        frame.add_numeric(pname, std::move(prod));
        spec.endogenous.push_back(pname);
        if (!inst.empty()) {
            const auto& z = frame.numeric.at(inst);
            std::vector<std::optional<double>> zprod(frame.n_rows);
            for (std::size_t i = 0; i < frame.n_rows; ++i)
                if (z[i] && d[i]) zprod[i] = *z[i] * *d[i];
            std::string zname = inst + "_x_" + ix.with;
            frame.add_numeric(zname, std::move(zprod));
            spec.instruments.push_back(zname);
        }
    }

    if (reg.ipw) {
        std::vector<double> nonstar(frame.n_rows, 1.0);
        const auto& ns = frame.numeric.at("non_superstar");
        for (std::size_t i = 0; i < frame.n_rows; ++i) nonstar[i] = ns[i].value_or(1.0);
        std::vector<std::vector<std::optional<double>>> ctrl;
        for (const auto& c : reg.exogenous) ctrl.push_back(frame.numeric.at(c));
        auto w = ipw_weights(nonstar, ctrl);
        std::string wname = "ipw_" + reg.name;
        frame.add_numeric(wname, std::move(w));
        spec.weights = wname;
    }

    RegressionRun run;
    run.spec = spec;
    run.result = spec.endogenous.empty() ? ols(spec, frame) : tsls(spec, frame);
    return run;
}

StageRecord PipelineRunner::stage_regress() {
    StageRecord rec;
    rec.stage = "regress";
    rec.status = "ok";
    Panel panel = resolve_panel(true);
    rec.rows_in = static_cast<long>(panel.size());
    SuperstarFlags flags = resolve_flags();

    SpilloverSeries h, b, f;
    read_spillovers_csv(out_path(kSpillovers), h, b, f);
    InstrumentSeries lab, tarr;
    std::map<std::pair<std::string, int>, double> road;
    if (fs::exists(out_path(kInstruments)))
        read_instruments_csv(out_path(kInstruments), lab, tarr, road);

    Frame master = build_regression_frame(panel, flags, h, b, f, lab, tarr, road);

    for (const auto& reg : manifest_.regressions) {
        RegressionRun run = run_manifest_regression(reg, master, panel, flags);
        const RegressionResult& res = run.result;

        csv::Table coefs;
        coefs.header = {"term", "coefficient", "std_error", "t_stat"};
        for (std::size_t i = 0; i < res.names.size(); ++i) {
            double c = res.coef(static_cast<Eigen::Index>(i));
            double s = res.se(static_cast<Eigen::Index>(i));
            coefs.rows.push_back(
                {res.names[i], fmt(c), fmt(s), s > 0.0 ? fmt(c / s) : std::string()});
        }
        csv::write_file(out_path("regress_" + reg.name + "_coef.csv"), coefs);

        csv::Table meta;
        meta.header = {"n_obs", "kp_wald_f", "cd_wald_f", "first_stage_f", "fe_dims",
                       "cluster_var", "demeaning_iterations", "singletons_dropped"};
        std::string fe_dims;
        for (const auto& d : run.spec.fe_dims) fe_dims += (fe_dims.empty() ? "" : "+") + d;
        meta.rows.push_back(
            {std::to_string(res.n_obs),
             res.kp_wald_f ? fmt(*res.kp_wald_f) : std::string(),
             res.cd_wald_f ? fmt(*res.cd_wald_f) : std::string(),
             res.first_stage ? fmt(res.first_stage->f_excluded) : std::string(), fe_dims,
             run.spec.cluster, std::to_string(res.demeaning_iterations),
             std::to_string(res.singletons_dropped)});
        csv::write_file(out_path("regress_" + reg.name + "_meta.csv"), meta);
        ++rec.rows_out;
    }
    return rec;
}

StageRecord PipelineRunner::stage_decompose() {
    StageRecord rec;
    rec.stage = "decompose";
    rec.status = "ok";
    Panel panel = resolve_panel(true);
    rec.rows_in = static_cast<long>(panel.size());
    SuperstarFlags flags = resolve_flags();

    auto group_map = [&](const std::string& scheme) {
        std::map<std::string, std::string> groups;
        for (const auto& [firm, star] : flags.superstar) {
            if (scheme == "superstar") {
                groups[firm] = star ? "superstar" : "non_superstar";
            } else {  // ownership
                if (!star) groups[firm] = "non_superstar";
                else if (flags.ownership.at(firm) == Ownership::Foreign)
                    groups[firm] = "foreign_superstar";
                else
                    groups[firm] = "domestic_superstar";
            }
        }
        return groups;
    };

    csv::Table dyn;
    dyn.header = {"window", "group", "aggregate_change", "plant_improvement",
                  "within_reallocation", "exiter_entrant_reallocation", "share_survivors_t1",
                  "share_survivors_t2", "n_survivors", "n_exiters", "n_entrants"};
    csv::Table stat;
    stat.header = {"window", "group", "aggregate_change", "plant_improvement", "reallocation"};

    for (const auto& w : manifest_.windows) {
        WindowSpec window{w.t1, w.t2, w.continuity_required};
        std::string wlabel = std::to_string(w.t1) + "-" + std::to_string(w.t2);
        for (const auto& scheme : manifest_.decomposition_groups) {
            auto groups = group_map(scheme);
            DecompResult res = mp_dynamic(panel, window, groups);
            auto emit = [&dyn, &wlabel](const GroupDecomp& g, const std::string& label) {
                dyn.rows.push_back({wlabel, label, fmt(g.aggregate_change),
                                    fmt(g.terms.plant_improvement),
                                    fmt(g.terms.within_reallocation),
                                    fmt(g.terms.between_reallocation()), fmt(g.share_t1),
                                    fmt(g.share_t2), std::to_string(g.n_survivors),
                                    std::to_string(g.n_exiters), std::to_string(g.n_entrants)});
            };
            if (scheme == manifest_.decomposition_groups.front())
                emit(res.overall, "overall");
            for (const auto& g : res.per_group) emit(g, g.group);

            for (const auto& c : op_static_change(panel, window, groups)) {
                if (c.group.empty() && scheme != manifest_.decomposition_groups.front())
                    continue;
                stat.rows.push_back({wlabel, c.group.empty() ? "overall" : c.group,
                                     fmt(c.aggregate_change), fmt(c.plant_improvement),
                                     fmt(c.reallocation)});
            }
        }
        ++rec.rows_out;
    }
    csv::write_file(out_path(kDecomposition), dyn);
    csv::write_file(out_path(kDecompositionStatic), stat);
    return rec;
}

StageRecord PipelineRunner::run_stage(const std::string& name) {
    fs::create_directories(manifest_.resolve(manifest_.output_dir));
    auto start = std::chrono::steady_clock::now();
    StageRecord rec;
    if (name == "simulate") rec = stage_simulate();
    else if (name == "deflate") rec = stage_deflate();
    else if (name == "impute") rec = stage_impute();
    else if (name == "classify") rec = stage_classify();
    else if (name == "tfp") rec = stage_tfp();
    else if (name == "spillovers") rec = stage_spillovers();
    else if (name == "instruments") rec = stage_instruments();
    else if (name == "regress") rec = stage_regress();
    else if (name == "decompose") rec = stage_decompose();
    else throw ConfigError("unknown stage '" + name + "'");
    rec.duration_ms = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                            std::chrono::steady_clock::now() - start)
                                            .count());
    return rec;
}

PipelineOutcome PipelineRunner::run(const std::vector<std::string>& only) {
    PipelineOutcome out;
    fs::create_directories(manifest_.resolve(manifest_.output_dir));
    std::error_code ec;
    fs::remove(out_path(kFailedMarker), ec);

    std::vector<std::string> stages;
    for (const std::string& name : known_stages()) {
        if (std::find(manifest_.stages.begin(), manifest_.stages.end(), name) ==
            manifest_.stages.end())
            continue;
        if (!only.empty() &&
            std::find(only.begin(), only.end(), name) == only.end())
            continue;
        stages.push_back(name);
    }

    for (const std::string& name : stages) {
        try {
            out.log.push_back(run_stage(name));
        } catch (const std::exception& e) {
            StageRecord rec;
            rec.stage = name;
            rec.status = "failed";
            rec.warnings = e.what();
            out.log.push_back(rec);
            out.failed_stage = stage_index(name);
            out.error = e.what();
            std::ofstream marker(out_path(kFailedMarker));
            marker << name << ": " << e.what() << "\n";
            break;
        }
    }

    csv::Table log;
    log.header = {"stage", "status", "duration_ms", "rows_in", "rows_out", "warnings"};
    for (const auto& r : out.log)
        log.rows.push_back({r.stage, r.status, std::to_string(r.duration_ms),
                            std::to_string(r.rows_in), std::to_string(r.rows_out), r.warnings});
    csv::write_file(out_path(kRunLog), log);
    return out;
}

}  // namespace superspill
