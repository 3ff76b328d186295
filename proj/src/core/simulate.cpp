#include "core/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"
#include "core/rng.hpp"

namespace superspill {

void SimPanelConfig::validate() const {
    if (n_firms_initial < 1) throw ConfigError("n_firms_initial must be >= 1");
    if (n_years < 1) throw ConfigError("n_years must be >= 1");
    if (n_sectors < 1 || n_sectors > 99) throw ConfigError("n_sectors must be in [1,99]");
    if (n_provinces < 1) throw ConfigError("n_provinces must be >= 1");
    if (!(superstar_fraction > 0.0 && superstar_fraction < 1.0))
        throw ConfigError("superstar_fraction must be in (0,1)");
    if (!(beta_l > 0.0 && beta_l < 1.0)) throw ConfigError("beta_l must be in (0,1)");
    if (!(beta_k > 0.0 && beta_k < 1.0)) throw ConfigError("beta_k must be in (0,1)");
    if (beta_l + beta_k >= 1.0) throw ConfigError("beta_l + beta_k must be < 1");
    if (!(productivity_ar1 > -1.0 && productivity_ar1 < 1.0))
        throw ConfigError("productivity_ar1 must be in (-1,1)");
    if (noise_sd < 0.0) throw ConfigError("noise_sd must be >= 0");
    if (!(entry_rate >= 0.0 && entry_rate < 1.0)) throw ConfigError("entry_rate must be in [0,1)");
}

namespace {

// Fixed DGP constants (not part of the public config).
constexpr double kStarPremiumMean = 0.4;    // persistent superstar mean shift
constexpr double kStarPremiumInit = 1.2;    // extra initial superstar level
constexpr double kTfpShockSd = 0.12;        // AR(1) innovation
constexpr double kCellShockSd = 0.25;       // confounding cell shock u
constexpr double kStarCellLoad = 2.0;       // star TFP response to u_t
constexpr double kNonstarCellLoad = 0.8;    // non-star TFP response to u_{t-1}
constexpr double kNationalGrowthSd = 0.35;  // sector shock g
constexpr double kStarBartikLoad = 2.5;     // star TFP response to share0 * g
constexpr double kLabourTfpElast = 0.6;
constexpr double kLabourNoiseSd = 0.15;
constexpr double kLabourScale = 3.2;        // log workers intercept
constexpr double kCapitalAr = 0.8;
constexpr double kCapitalTfpLoad = 0.5;
constexpr double kCapitalNoiseSd = 0.22;
constexpr double kCapitalScale = 2.0;
constexpr double kMaterialsTfpElast = 1.0;  // strict monotonicity in TFP
constexpr double kMaterialsKElast = 0.3;
constexpr double kMaterialsScale = 0.5;

// Capability seeds the initial log-TFP level; the law of motion reverts to a
// mean that is common across firms (plus the superstar premium), keeping TFP
// a scalar Markov process as the proxy estimator assumes.
struct FirmState {
    std::string id;
    int sector = 0;
    int province = 0;
    double capability = 1.0;
    bool superstar = false;
    double anchor = 0.0;  // stationary mean of log TFP (0, or the star premium)
    double phi = 0.0;     // current log TFP
    double log_k = 0.0;
    bool active = true;
    int entry_year = 0;
};

std::string sector3_code(int s) { return std::to_string(101 + s); }
std::string province_code(int p) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "P%02d", p + 1);
    return buf;
}
std::string island_code(int p) { return "I" + std::to_string(p / 4 + 1); }

CounterRng firm_rng(std::uint64_t seed, const std::string& firm, int year,
                    const char* purpose) {
    return CounterRng(seed, CounterRng::stream_of(firm + "|" + std::to_string(year) + "|" +
                                                  purpose));
}

CounterRng global_rng(std::uint64_t seed, const std::string& key) {
    return CounterRng(seed, CounterRng::stream_of(key));
}

FirmYear make_row(const SimPanelConfig& cfg, const FirmState& f, int year, double phi,
                  double log_k, std::uint64_t seed) {
    CounterRng rng = firm_rng(seed, f.id, year, "obs");

    // Inputs: labour responds to current TFP (simultaneity for the estimator),
    // workers are integerized before entering the output identity.
    double log_l_latent =
        kLabourScale + kLabourTfpElast * phi + kLabourNoiseSd * rng.next_normal();
    long long workers = std::max<long long>(
        1, static_cast<long long>(std::llround(std::exp(log_l_latent))));
    double log_l = std::log(static_cast<double>(workers));

    double eps = cfg.noise_sd > 0.0 ? cfg.noise_sd * rng.next_normal() : 0.0;
    double log_va = cfg.beta_l * log_l + cfg.beta_k * log_k + phi + eps;
    double log_m = kMaterialsScale + kMaterialsTfpElast * phi + kMaterialsKElast * log_k;

    FirmYear r;
    r.firm_id = f.id;
    r.year = year;
    r.sector3 = sector3_code(f.sector);
    r.sector2 = r.sector3.substr(0, 2);
    r.province = province_code(f.province);
    r.island = island_code(f.province);
    r.value_added = std::exp(log_va);
    r.materials = std::exp(log_m);
    r.output = *r.value_added + *r.materials;
    r.capital = std::exp(log_k);
    r.energy = 0.15 * *r.materials * std::exp(0.2 * rng.next_normal());
    long long wp = std::max<long long>(1, static_cast<long long>(std::llround(0.75 * workers)));
    if (wp > workers) wp = workers;
    r.workers_production = wp;
    r.workers_nonproduction = workers - wp;
    r.wage_bill = static_cast<double>(workers) * std::exp(0.5 + 0.3 * phi);
    double u_f = rng.next_uniform();
    if (f.superstar)
        r.foreign_share = u_f < 0.4 ? 0.2 + 0.7 * rng.next_uniform() : 0.05 * rng.next_uniform();
    else
        r.foreign_share = u_f < 0.08 ? 0.1 + 0.5 * rng.next_uniform() : 0.05 * rng.next_uniform();
    r.export_flag = rng.next_uniform() < (f.superstar ? 0.3 : 0.1);
    r.imported_materials = 0.4 * rng.next_uniform() * *r.materials;
    return r;
}

}  // namespace

SimResult simulate_panel(const SimPanelConfig& cfg, const ModelParams& params) {
    cfg.validate();
    params.validate();

    SimResult out;
    GroundTruth& truth = out.truth;
    truth.beta_l = cfg.beta_l;
    truth.beta_k = cfg.beta_k;
    truth.alpha = params.alpha;
    truth.tau = params.tau;
    truth.psi = params.psi;
    truth.seed = cfg.seed;

    // Initial cohort: capability, location, capital.
    std::vector<FirmState> firms;
    firms.reserve(cfg.n_firms_initial);
    int next_id = 0;
    auto new_firm = [&](int entry_year) {
        FirmState f;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "F%06d", next_id++);
        f.id = buf;
        CounterRng rng = firm_rng(cfg.seed, f.id, 0, "init");
        f.sector = static_cast<int>(rng.next_below(cfg.n_sectors));
        f.province = static_cast<int>(rng.next_below(cfg.n_provinces));
        f.capability = dist_quantile(params.capability_dist,
                                     std::min(1.0 - 1e-12, std::max(1e-12, rng.next_uniform())));
        f.anchor = 0.0;
        f.phi = std::log(f.capability) + kTfpShockSd * rng.next_normal();
        f.log_k = kCapitalScale + kCapitalTfpLoad * f.phi + kCapitalNoiseSd * rng.next_normal();
        f.entry_year = entry_year;
        return f;
    };
    for (int i = 0; i < cfg.n_firms_initial; ++i) firms.push_back(new_firm(cfg.first_year));

    // Superstar flag: top fraction by capability per sector, ties by firm_id.
    {
        std::map<int, std::vector<std::size_t>> by_sector;
        for (std::size_t i = 0; i < firms.size(); ++i) by_sector[firms[i].sector].push_back(i);
        for (auto& [sector, idx] : by_sector) {
            std::sort(idx.begin(), idx.end(), [&firms](std::size_t a, std::size_t b) {
                if (firms[a].capability != firms[b].capability)
                    return firms[a].capability > firms[b].capability;
                return firms[a].id < firms[b].id;
            });
            std::size_t n_star = static_cast<std::size_t>(
                std::ceil(cfg.superstar_fraction * static_cast<double>(idx.size())));
            n_star = std::min(n_star, idx.size());
            for (std::size_t r = 0; r < n_star; ++r) {
                firms[idx[r]].superstar = true;
                firms[idx[r]].anchor += kStarPremiumMean;
                firms[idx[r]].phi += kStarPremiumMean + kStarPremiumInit;
            }
        }
        for (const FirmState& f : firms) {
            truth.flags.superstar[f.id] = f.superstar;
            truth.flags.ownership[f.id] = Ownership::None;
        }
    }

    // Random sparse IO table over the simulated sectors.
    {
        CounterRng rng = global_rng(cfg.seed, "io_table");
        truth.io.sectors.resize(cfg.n_sectors);
        for (int s = 0; s < cfg.n_sectors; ++s) truth.io.sectors[s] = sector3_code(s);
        truth.io.coeffs.assign(cfg.n_sectors, std::vector<double>(cfg.n_sectors, 0.0));
        for (int k = 0; k < cfg.n_sectors; ++k)
            for (int l = 0; l < cfg.n_sectors; ++l) {
                if (k == l) continue;
                if (rng.next_uniform() < 0.3)
                    truth.io.coeffs[k][l] = 0.05 + 0.25 * rng.next_uniform();
            }
    }

    // Tariff random walk per sector.
    {
        for (int s = 0; s < cfg.n_sectors; ++s) {
            CounterRng rng = global_rng(cfg.seed, "tariff|" + sector3_code(s));
            double level = 5.0 + 10.0 * rng.next_uniform();
            for (int t = -1; t < cfg.n_years; ++t) {
                int year = cfg.first_year + t;
                truth.tariffs.entries[{sector3_code(s), year}] = level;
                level = std::max(0.0, level + (-0.3 + 1.0 * rng.next_normal()));
            }
        }
    }

    // Regions: area fixed per province, road length observed from the third
    // simulated year onward (exercises the backfill rule).
    {
        int road_from = cfg.first_year + std::min(2, cfg.n_years - 1);
        for (int p = 0; p < cfg.n_provinces; ++p) {
            CounterRng rng = global_rng(cfg.seed, "region|" + province_code(p));
            double area = 800.0 + 1500.0 * rng.next_uniform();
            double road = area * (0.6 + 0.8 * rng.next_uniform());
            for (int t = 0; t < cfg.n_years; ++t) {
                int year = cfg.first_year + t;
                RegionYear r;
                r.province = province_code(p);
                r.year = year;
                r.area_km2 = area;
                if (year >= road_from) {
                    r.road_km = road;
                    road *= 1.0 + 0.03 * rng.next_uniform();
                }
                out.truth.regions.push_back(r);
            }
            truth.province_island[province_code(p)] = island_code(p);
        }
    }

    // Base-year labour share of superstars per cell: the instrument's weight
    // component and the differential loading of the national sector shock.
    std::map<std::pair<int, int>, double> base_share;  // (sector, province) -> share
    {
        std::map<std::pair<int, int>, std::pair<double, double>> sums;
        for (const FirmState& f : firms) {
            CounterRng rng = firm_rng(cfg.seed, f.id, cfg.first_year, "obs");
            double log_l_latent =
                kLabourScale + kLabourTfpElast * f.phi + kLabourNoiseSd * rng.next_normal();
            double workers = std::max(1.0, std::round(std::exp(log_l_latent)));
            double wp = std::max(1.0, std::round(0.75 * workers));
            auto& cell = sums[{f.sector, f.province}];
            cell.second += wp;
            if (f.superstar) cell.first += wp;
        }
        for (const auto& [key, s] : sums)
            base_share[key] = s.second > 0.0 ? s.first / s.second : 0.0;
    }

    std::vector<FirmYear> rows;
    SpilloverSeries h_prev, b_prev, f_prev;  // exposures of the previous year

    for (int t = 0; t < cfg.n_years; ++t) {
        int year = cfg.first_year + t;

        // Cell confounder u and national sector shock g for this year.
        std::map<std::pair<int, int>, double> u_now;
        std::map<int, double> g_now;
        for (int s = 0; s < cfg.n_sectors; ++s) {
            CounterRng rng = global_rng(cfg.seed, "g|" + std::to_string(s) + "|" +
                                                       std::to_string(year));
            g_now[s] = kNationalGrowthSd * rng.next_normal();
            for (int p = 0; p < cfg.n_provinces; ++p) {
                CounterRng rc = global_rng(cfg.seed, "u|" + std::to_string(s) + "|" +
                                                         std::to_string(p) + "|" +
                                                         std::to_string(year));
                u_now[{s, p}] = kCellShockSd * rc.next_normal();
            }
        }
        // TFP transition (skipped in the first year: phi comes from init).
        if (t > 0) {
            for (FirmState& f : firms) {
                if (!f.active) continue;
                CounterRng rng = firm_rng(cfg.seed, f.id, year, "tfp");
                double xi = kTfpShockSd * rng.next_normal();
                CellKey key{sector3_code(f.sector), province_code(f.province), year - 1};
                double h = h_prev.lookup(key).value_or(0.0);
                double b = b_prev.lookup(key).value_or(0.0);
                double fw = f_prev.lookup(key).value_or(0.0);
                double phi_prev = f.phi;
                double deviation = phi_prev - f.anchor;
                double spill = 0.0, shock = 0.0;
                if (f.superstar) {
                    // Stars respond to the current cell shock and to the
                    // national shock scaled by the base labour share.
                    double share0 = base_share.count({f.sector, f.province})
                                        ? base_share[{f.sector, f.province}]
                                        : 0.0;
                    shock = kStarCellLoad * u_now[{f.sector, f.province}] +
                            kStarBartikLoad * share0 * g_now[f.sector];
                } else {
                    // Non-stars carry the spillover terms (lagged exposures)
                    // and the lagged cell shock - the confounder.
                    CounterRng ru = global_rng(cfg.seed, "u|" + std::to_string(f.sector) + "|" +
                                                             std::to_string(f.province) + "|" +
                                                             std::to_string(year - 1));
                    double u_lag = kCellShockSd * ru.next_normal();
                    spill = truth.alpha * h + truth.tau * b + truth.psi * fw;
                    shock = kNonstarCellLoad * u_lag;
                }
                f.phi = f.anchor + cfg.productivity_ar1 * deviation + spill + shock + xi;
                // Capital is predetermined: it accumulates on last period's
                // TFP and never sees the current innovation.
                CounterRng rk = firm_rng(cfg.seed, f.id, year, "cap");
                f.log_k = kCapitalAr * f.log_k +
                          (1.0 - kCapitalAr) * (kCapitalScale + kCapitalTfpLoad * phi_prev) +
                          kCapitalNoiseSd * rk.next_normal();
            }
        }

        // Emit rows for active firms.
        for (const FirmState& f : firms) {
            if (!f.active) continue;
            FirmYear r = make_row(cfg, f, year, f.phi, f.log_k, cfg.seed);
            truth.true_tfp[{f.id, year}] = f.phi;
            rows.push_back(std::move(r));
        }

        // Exposures of this year feed next year's TFP law; computed with the
        // spillover module on this year's rows so a later recomputation on
        // the emitted panel matches bit for bit.
        {
            std::vector<FirmYear> year_rows;
            for (const FirmYear& r : rows)
                if (r.year == year) year_rows.push_back(r);
            Panel year_panel(std::move(year_rows));
            h_prev = hspill(year_panel, truth.flags);
            b_prev = bspill(h_prev, truth.io);
            f_prev = fspill(h_prev, truth.io);
            for (const auto& [k, v] : h_prev.values) truth.hspill.values[k] = v;
            for (const auto& [k, v] : b_prev.values) truth.bspill.values[k] = v;
            for (const auto& [k, v] : f_prev.values) truth.fspill.values[k] = v;
            truth.bspill.kind = SpillKind::B;
            truth.fspill.kind = SpillKind::F;
        }

        // Exit shock and entry for the next year.
        if (t + 1 < cfg.n_years) {
            long long active = 0;
            for (FirmState& f : firms) {
                if (!f.active) continue;
                CounterRng rng = firm_rng(cfg.seed, f.id, year, "exit");
                if (params.delta > 0.0 && rng.next_uniform() < params.delta) f.active = false;
                else ++active;
            }
            long long n_new = static_cast<long long>(std::llround(cfg.entry_rate * active));
            for (long long i = 0; i < n_new; ++i) {
                FirmState f = new_firm(year + 1);
                firms.push_back(std::move(f));
            }
        }
    }

    out.panel = Panel(std::move(rows));
    return out;
}

}  // namespace superspill
