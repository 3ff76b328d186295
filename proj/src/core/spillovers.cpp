#include "core/spillovers.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"

namespace superspill {

void SuperstarRule::validate() const {
    if (!(top_share_cutoff > 0.0 && top_share_cutoff < 1.0))
        throw ConfigError("top_share_cutoff must be in (0,1)");
    if (min_tenure_years < 0) throw ConfigError("min_tenure_years must be >= 0");
    if (!(top_frequency > 0.0 && top_frequency <= 1.0))
        throw ConfigError("top_frequency must be in (0,1]");
    if (foreign_threshold && !(*foreign_threshold > 0.0 && *foreign_threshold < 1.0))
        throw ConfigError("foreign_threshold must be in (0,1)");
}

namespace {

// Empirical quantile with linear interpolation (type 7).
double quantile_type7(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    double h = (static_cast<double>(v.size()) - 1.0) * p;
    std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (h - lo) * (v[lo + 1] - v[lo]);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

SuperstarFlags classify_superstars(const Panel& panel, const SuperstarRule& rule,
                                   ClassifyDiagnostics* diag) {
    rule.validate();

    // Classification cell is (sector3, year) nationwide.
    std::map<std::pair<std::string, int>, std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < panel.rows().size(); ++i) {
        const FirmYear& r = panel.rows()[i];
        if (!r.output) {
            if (diag) ++diag->rows_missing_output;
            continue;
        }
        cells[{r.sector3, r.year}].push_back(i);
    }

    // Within-cell output shares per firm-year.
    std::map<std::pair<std::string, int>, double> share;  // (firm, year) -> share
    std::map<std::pair<std::string, int>, double> cell_quantile;
    for (const auto& [cell, idxs] : cells) {
        double total = 0.0;
        for (std::size_t i : idxs) total += *panel.rows()[i].output;
        if (total <= 0.0) continue;
        std::vector<double> shares;
        shares.reserve(idxs.size());
        for (std::size_t i : idxs) {
            const FirmYear& r = panel.rows()[i];
            double s = *r.output / total;
            share[{r.firm_id, r.year}] = s;
            shares.push_back(s);
        }
        if (idxs.size() == 1 && diag) ++diag->single_firm_cells;
        cell_quantile[cell] = quantile_type7(shares, 1.0 - rule.top_share_cutoff);
    }

    // Observed years and in-top margins per firm.
    struct FirmTrack {
        int years_observed = 0;
        int years_in_top = 0;
        std::vector<double> share_margins;  // share - cell quantile, per year
        std::vector<double> foreign_shares;
        std::string sector3;
    };
    std::map<std::string, FirmTrack> firms;
    for (const FirmYear& r : panel.rows()) {
        FirmTrack& t = firms[r.firm_id];
        ++t.years_observed;
        t.sector3 = r.sector3;
        if (r.foreign_share) t.foreign_shares.push_back(*r.foreign_share);
        auto sh = share.find({r.firm_id, r.year});
        if (sh == share.end()) continue;
        double q = cell_quantile.at({r.sector3, r.year});
        double margin = sh->second - q;
        t.share_margins.push_back(margin);
        if (sh->second >= q) ++t.years_in_top;  // ties at the quantile are in-top
    }

    SuperstarFlags flags;
    for (const auto& [firm_id, t] : firms) {
        bool tenure_ok = t.years_observed > rule.min_tenure_years;
        bool persistent = false;
        if (!t.share_margins.empty()) {
            if (rule.variant == SuperstarRule::Variant::MedianShare) {
                persistent = median(t.share_margins) >= 0.0;
            } else {
                double freq = static_cast<double>(t.years_in_top) /
                              static_cast<double>(t.share_margins.size());
                persistent = freq > rule.top_frequency;
            }
        }
        bool star = tenure_ok && persistent;
        flags.superstar[firm_id] = star;
        Ownership own = Ownership::None;
        if (star && rule.foreign_threshold) {
            double med_foreign =
                t.foreign_shares.empty() ? 0.0 : median(t.foreign_shares);
            own = med_foreign > *rule.foreign_threshold ? Ownership::Foreign
                                                        : Ownership::Domestic;
        }
        flags.ownership[firm_id] = own;
        if (star && diag) ++diag->firms_flagged;
    }
    return flags;
}

SpilloverSeries hspill(const Panel& panel, const SuperstarFlags& flags,
                       SpilloverDiagnostics* diag) {
    SpilloverSeries out;
    out.kind = SpillKind::H;
    for (const auto& [key, idxs] : panel.cell_index()) {
        double total = 0.0, star = 0.0;
        bool any = false;
        for (std::size_t i : idxs) {
            const FirmYear& r = panel.rows()[i];
            if (!r.output) continue;
            any = true;
            total += *r.output;
            if (flags.is_superstar(r.firm_id)) star += *r.output;
        }
        if (!any || total <= 0.0) {
            if (diag) diag->zero_output_cells.push_back(key);
            continue;
        }
        out.values[key] = 100.0 * star / total;
    }
    return out;
}

namespace {

// Shared kernel: vertical = sum over other sectors k of weight(k, target) * H_k.
SpilloverSeries vertical_spill(const SpilloverSeries& hs, const IOTable& io, SpillKind kind,
                               SpilloverDiagnostics* diag) {
    // Cells grouped by (province, year) so each target sector sees the H
    // values of every other sector in its local market.
    std::map<std::pair<std::string, int>, std::map<std::string, double>> by_market;
    std::vector<std::string> dropped;
    for (const auto& [key, h] : hs.values) {
        if (!io.index_of(key.sector3)) {
            if (std::find(dropped.begin(), dropped.end(), key.sector3) == dropped.end())
                dropped.push_back(key.sector3);
            continue;
        }
        by_market[{key.province, key.year}][key.sector3] = h;
    }
    if (diag)
        for (auto& s : dropped) diag->sectors_not_in_io.push_back(s);

    SpilloverSeries out;
    out.kind = kind;
    for (const auto& [market, hmap] : by_market) {
        for (const std::string& target : io.sectors) {
            std::size_t ti = *io.index_of(target);
            double sum = 0.0;
            bool in_market = hmap.count(target) > 0;
            if (!in_market) continue;  // only sectors present in the market get values
            for (const auto& [src, h] : hmap) {
                if (src == target) continue;  // own-sector coefficient excluded
                std::size_t si = *io.index_of(src);
                // B: target is the upstream seller -> coeff(buyer k, seller target).
                // F: target is the downstream buyer -> coeff(buyer target, seller k).
                double w = (kind == SpillKind::B) ? io.coeff(si, ti) : io.coeff(ti, si);
                sum += w * h;
            }
            out.values[CellKey{target, market.first, market.second}] = sum;
        }
    }
    if (diag) {
        // Missing H cells (sectors in IO but absent from a market) contribute 0.
        for (const auto& [market, hmap] : by_market)
            diag->missing_hspill_contributions +=
                io.sectors.size() > hmap.size() ? io.sectors.size() - hmap.size() : 0;
    }
    return out;
}

}  // namespace

SpilloverSeries bspill(const SpilloverSeries& hs, const IOTable& io,
                       SpilloverDiagnostics* diag) {
    return vertical_spill(hs, io, SpillKind::B, diag);
}

SpilloverSeries fspill(const SpilloverSeries& hs, const IOTable& io,
                       SpilloverDiagnostics* diag) {
    return vertical_spill(hs, io, SpillKind::F, diag);
}

ControlColumns controls(const Panel& panel, const SuperstarFlags& /*flags*/) {
    const auto& rows = panel.rows();
    ControlColumns out;
    out.hhi.resize(rows.size());
    out.import_intensity.resize(rows.size());
    out.absorptive.resize(rows.size());
    out.d_foreign.resize(rows.size());
    out.d_exporter.resize(rows.size());

    // HHI over the national (sector3, year) cell, shares in [0,1].
    std::map<std::pair<std::string, int>, double> totals;
    for (const FirmYear& r : rows)
        if (r.output) totals[{r.sector3, r.year}] += *r.output;
    std::map<std::pair<std::string, int>, double> hhi;
    for (const FirmYear& r : rows) {
        if (!r.output) continue;
        double tot = totals[{r.sector3, r.year}];
        if (tot <= 0.0) continue;
        double s = *r.output / tot;
        hhi[{r.sector3, r.year}] += s * s;
    }

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const FirmYear& r = rows[i];
        auto it = hhi.find({r.sector3, r.year});
        if (it != hhi.end()) out.hhi[i] = it->second;
        if (r.materials && *r.materials > 0.0 && r.imported_materials)
            out.import_intensity[i] = *r.imported_materials / *r.materials;
        auto workers = r.total_workers();
        if (r.wage_bill && *r.wage_bill > 0.0 && workers && *workers >= 1)
            out.absorptive[i] = std::log(*r.wage_bill / static_cast<double>(*workers));
        if (r.foreign_share) out.d_foreign[i] = *r.foreign_share > 0.10 ? 1.0 : 0.0;
        if (r.export_flag) out.d_exporter[i] = *r.export_flag ? 1.0 : 0.0;
    }
    return out;
}

}  // namespace superspill
