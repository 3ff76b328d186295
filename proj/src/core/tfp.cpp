#include "core/tfp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <set>

#include "core/errors.hpp"

namespace superspill {

void ProxySpec::validate() const {
    if (first_stage_poly_degree < 2 || first_stage_poly_degree > 4)
        throw ConfigError("first_stage_poly_degree must be in [2,4]");
    if (markov_poly_degree < 1 || markov_poly_degree > 4)
        throw ConfigError("markov_poly_degree must be in [1,4]");
}

namespace {

struct ObsRow {
    std::string firm_id;
    int year;
    double y;      // log value added
    double l;      // log total workers
    double k;      // log capital
    double proxy;  // log proxy input
};

std::optional<double> log_proxy(const Panel& panel, const FirmYear& r, ProxySpec::Proxy proxy) {
    if (proxy == ProxySpec::Proxy::Materials) {
        if (r.materials && *r.materials > 0.0) return std::log(*r.materials);
        return std::nullopt;
    }
    // Investment proxy: capital change to the next observed consecutive year.
    const FirmYear* next = panel.find(r.firm_id, r.year + 1);
    if (!next || !next->capital || !r.capital) return std::nullopt;
    double inv = *next->capital - *r.capital;
    if (inv <= 0.0) return std::nullopt;
    return std::log(inv);
}

std::vector<ObsRow> usable_rows(const Panel& panel, const std::vector<std::size_t>& indices,
                                const ProxySpec& spec) {
    std::vector<ObsRow> rows;
    for (std::size_t i : indices) {
        const FirmYear& r = panel.rows()[i];
        auto workers = r.total_workers();
        if (!r.value_added || *r.value_added <= 0.0) continue;
        if (!workers || *workers < 1) continue;
        if (!r.capital || *r.capital <= 0.0) continue;
        auto p = log_proxy(panel, r, spec.proxy_field);
        if (!p) continue;
        rows.push_back(ObsRow{r.firm_id, r.year, std::log(*r.value_added),
                              std::log(static_cast<double>(*workers)), std::log(*r.capital), *p});
    }
    return rows;
}

// Full bivariate polynomial terms a+b in [1, degree] (the constant is added
// separately by callers).
void append_poly(std::vector<double>& out, double a, double b, int degree) {
    for (int total = 1; total <= degree; ++total)
        for (int i = 0; i <= total; ++i)
            out.push_back(std::pow(a, total - i) * std::pow(b, i));
}

int poly_terms(int degree) { return (degree + 1) * (degree + 2) / 2 - 1; }

Eigen::VectorXd solve_ls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    return (X.transpose() * X).ldlt().solve(X.transpose() * y);
}

// Sum of squared innovations of the Markov stage at a trial beta_k.
double markov_objective(double beta_k, const std::vector<ObsRow>& rows,
                        const std::vector<double>& phihat,
                        const std::vector<std::pair<std::size_t, std::size_t>>& lag_pairs,
                        int degree) {
    const std::size_t n = lag_pairs.size();
    Eigen::MatrixXd X(n, degree + 1);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto [cur, lag] = lag_pairs[i];
        double omega_t = phihat[cur] - beta_k * rows[cur].k;
        double omega_l = phihat[lag] - beta_k * rows[lag].k;
        X(i, 0) = 1.0;
        double p = 1.0;
        for (int d = 1; d <= degree; ++d) {
            p *= omega_l;
            X(i, d) = p;
        }
        y(i) = omega_t;
    }
    Eigen::VectorXd beta = solve_ls(X, y);
    return (y - X * beta).squaredNorm();
}

}  // namespace

namespace {

struct StagePrep {
    std::vector<ObsRow> rows;
    std::vector<double> phihat;
    std::vector<std::pair<std::size_t, std::size_t>> lag_pairs;
    double beta_l = 0.0;
};

StagePrep prepare_stages(const Panel& panel, const std::string& sector3, const ProxySpec& spec) {
    spec.validate();
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < panel.rows().size(); ++i)
        if (panel.rows()[i].sector3 == sector3) indices.push_back(i);
    StagePrep prep;
    prep.rows = usable_rows(panel, indices, spec);
    if (static_cast<long>(prep.rows.size()) < kMinSectorObs)
        throw InsufficientDataError("sector " + sector3 + ": " +
                                    std::to_string(prep.rows.size()) + " usable rows, need " +
                                    std::to_string(kMinSectorObs));
    const auto& rows = prep.rows;

    // Stage 1: y on l + polynomial(proxy, k) + intercept.
    const int np = poly_terms(spec.first_stage_poly_degree);
    Eigen::MatrixXd X(rows.size(), 2 + np);
    Eigen::VectorXd y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<double> terms;
        terms.reserve(np);
        append_poly(terms, rows[i].proxy, rows[i].k, spec.first_stage_poly_degree);
        X(i, 0) = rows[i].l;
        X(i, 1) = 1.0;
        for (int j = 0; j < np; ++j) X(i, 2 + j) = terms[j];
        y(i) = rows[i].y;
    }
    Eigen::VectorXd beta1 = solve_ls(X, y);
    prep.beta_l = beta1(0);

    // Composite Phi-hat = fitted y minus the labour contribution.
    prep.phihat.resize(rows.size());
    Eigen::VectorXd fitted = X * beta1;
    for (std::size_t i = 0; i < rows.size(); ++i)
        prep.phihat[i] = fitted(i) - prep.beta_l * rows[i].l;

    // Lag pairs: same firm, consecutive years, both usable.
    std::map<std::pair<std::string, int>, std::size_t> pos;
    for (std::size_t i = 0; i < rows.size(); ++i) pos[{rows[i].firm_id, rows[i].year}] = i;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto it = pos.find({rows[i].firm_id, rows[i].year - 1});
        if (it != pos.end()) prep.lag_pairs.emplace_back(i, it->second);
    }
    return prep;
}

}  // namespace

double stage2_objective(const Panel& panel, const std::string& sector3, const ProxySpec& spec,
                        double beta_k) {
    StagePrep prep = prepare_stages(panel, sector3, spec);
    return markov_objective(beta_k, prep.rows, prep.phihat, prep.lag_pairs,
                            spec.markov_poly_degree);
}

ProductionEstimate estimate_production(const Panel& panel, const std::string& sector3,
                                       const ProxySpec& spec) {
    StagePrep prep = prepare_stages(panel, sector3, spec);
    const std::vector<ObsRow>& rows = prep.rows;
    const std::vector<double>& phihat = prep.phihat;
    const std::vector<std::pair<std::size_t, std::size_t>>& lag_pairs = prep.lag_pairs;
    double beta_l = prep.beta_l;

    ProductionEstimate est;
    est.sector3 = sector3;
    est.beta_l = beta_l;
    est.n_obs = static_cast<long>(rows.size());

    if (lag_pairs.size() < static_cast<std::size_t>(spec.markov_poly_degree) + 2) {
        est.converged = false;
        return est;
    }

    // Stage 2: golden-section search on [0, 1] to 1e-6.
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0, b = 1.0;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = markov_objective(c, rows, phihat, lag_pairs, spec.markov_poly_degree);
    double fd = markov_objective(d, rows, phihat, lag_pairs, spec.markov_poly_degree);
    int iters = 0;
    while (b - a > 1e-6) {
        ++iters;
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = markov_objective(c, rows, phihat, lag_pairs, spec.markov_poly_degree);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = markov_objective(d, rows, phihat, lag_pairs, spec.markov_poly_degree);
        }
    }
    est.beta_k = 0.5 * (a + b);
    est.iterations = iters;
    est.objective = markov_objective(est.beta_k, rows, phihat, lag_pairs, spec.markov_poly_degree);
    // Bracket-edge solutions are flagged, not trusted.
    est.converged = est.beta_k > 1e-4 && est.beta_k < 1.0 - 1e-4;
    return est;
}

EstimateSet estimate_all(const Panel& panel, const ProxySpec& spec, bool fallback_to_2digit,
                         int threads, long min_obs) {
    spec.validate();
    // Usable-row counts per sector decide direct estimation vs fallback.
    std::map<std::string, std::vector<std::size_t>> by_sector;
    for (std::size_t i = 0; i < panel.rows().size(); ++i)
        by_sector[panel.rows()[i].sector3].push_back(i);

    std::map<std::string, long> usable_count;
    for (const auto& [sec, idx] : by_sector)
        usable_count[sec] = static_cast<long>(usable_rows(panel, idx, spec).size());

    struct Unit {
        std::string label;
        std::vector<std::string> covers;
        std::vector<std::size_t> indices;
    };
    std::vector<Unit> units;
    std::map<std::string, std::vector<std::string>> fallback_groups;  // sector2 -> sectors
    for (const auto& [sec, idx] : by_sector) {
        if (usable_count[sec] >= min_obs) {
            units.push_back(Unit{sec, {sec}, idx});
        } else if (fallback_to_2digit) {
            fallback_groups[panel.rows()[idx.front()].sector2].push_back(sec);
        }
    }

    EstimateSet out;
    for (const auto& [sec2, sectors] : fallback_groups) {
        Unit u;
        u.label = sec2 + "x";  // 2-digit pooled unit
        u.covers = sectors;
        for (const auto& s : sectors) {
            const auto& idx = by_sector[s];
            u.indices.insert(u.indices.end(), idx.begin(), idx.end());
        }
        if (static_cast<long>(usable_rows(panel, u.indices, spec).size()) >= min_obs)
            units.push_back(std::move(u));
        else
            for (const auto& s : sectors) out.skipped_sectors.push_back(s);
    }

    // Estimation per unit; deterministic slot collection under parallelism.
    std::vector<ProductionEstimate> results(units.size());
    auto run_unit = [&](std::size_t ui) {
        const Unit& u = units[ui];
        // Pooled units re-run the sector filter through a sub-panel view.
        std::vector<FirmYear> sub;
        sub.reserve(u.indices.size());
        for (std::size_t i : u.indices) sub.push_back(panel.rows()[i]);
        for (auto& r : sub) r.sector3 = u.label;  // unify the unit label
        Panel view(std::move(sub));
        ProductionEstimate est = estimate_production(view, u.label, spec);
        results[ui] = est;
    };

    if (threads <= 1 || units.size() <= 1) {
        for (std::size_t i = 0; i < units.size(); ++i) run_unit(i);
    } else {
        std::vector<std::future<void>> futs;
        std::atomic<std::size_t> next{0};
        int n_workers = std::min<int>(threads, static_cast<int>(units.size()));
        for (int t = 0; t < n_workers; ++t)
            futs.push_back(std::async(std::launch::async, [&]() {
                for (;;) {
                    std::size_t i = next.fetch_add(1);
                    if (i >= units.size()) return;
                    run_unit(i);
                }
            }));
        for (auto& f : futs) f.get();
    }

    for (std::size_t i = 0; i < units.size(); ++i) {
        out.estimates.push_back(results[i]);
        for (const auto& s : units[i].covers) out.by_sector[s] = out.estimates.size() - 1;
    }
    return out;
}

Panel compute_tfp(const Panel& panel, const EstimateSet& estimates, TfpReport* report) {
    std::vector<FirmYear> rows = panel.rows();
    for (auto& r : rows) {
        r.phi.reset();
        auto it = estimates.by_sector.find(r.sector3);
        if (it == estimates.by_sector.end()) {
            if (report) ++report->rows_without_estimate;
            continue;
        }
        const ProductionEstimate& est = estimates.estimates[it->second];
        if (!est.converged) {
            if (report) ++report->rows_without_estimate;
            continue;
        }
        auto workers = r.total_workers();
        if (!r.value_added || *r.value_added <= 0.0 || !workers || *workers < 1 || !r.capital ||
            *r.capital <= 0.0) {
            if (report) ++report->rows_missing_inputs;
            continue;
        }
        double y = std::log(*r.value_added);
        double l = std::log(static_cast<double>(*workers));
        double k = std::log(*r.capital);
        r.phi = y - est.beta_l * l - est.beta_k * k;
    }
    return Panel(std::move(rows), panel.deflated());
}

Panel tfp_growth(const Panel& panel) {
    // First phi-observed year per firm.
    std::map<std::string, int> base_year;
    for (const FirmYear& r : panel.rows()) {
        if (!r.phi) continue;
        auto it = base_year.find(r.firm_id);
        if (it == base_year.end() || r.year < it->second) base_year[r.firm_id] = r.year;
    }
    std::vector<FirmYear> rows = panel.rows();
    for (auto& r : rows) {
        r.dphi.reset();
        r.dphi_base_year = false;
        if (!r.phi) continue;
        int t0 = base_year.at(r.firm_id);
        if (r.year == t0) {
            r.dphi = 0.0;
            r.dphi_base_year = true;
        } else {
            const FirmYear* base = panel.find(r.firm_id, t0);
            r.dphi = *r.phi - *base->phi;
        }
    }
    return Panel(std::move(rows), panel.deflated());
}

Panel labour_productivity(const Panel& panel, TfpReport* report) {
    std::vector<FirmYear> rows = panel.rows();
    for (auto& r : rows) {
        r.lp.reset();
        auto workers = r.total_workers();
        if (!r.value_added || *r.value_added <= 0.0 || !workers || *workers < 1) {
            if (report) ++report->lp_unavailable;
            continue;
        }
        r.lp = std::log(*r.value_added / static_cast<double>(*workers));
    }
    return Panel(std::move(rows), panel.deflated());
}

}  // namespace superspill
