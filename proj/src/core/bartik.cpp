#include "core/bartik.hpp"

#include <algorithm>
#include <set>

#include "core/errors.hpp"

namespace superspill {

std::map<std::pair<std::string, std::string>, double> base_labor_share(
    const Panel& panel, const SuperstarFlags& flags, int base_year, LaborSkill skill,
    BartikDiagnostics* diag) {
    std::map<std::pair<std::string, std::string>, std::pair<double, double>> sums;  // star, all
    for (const FirmYear& r : panel.rows()) {
        if (r.year != base_year) continue;
        std::optional<long long> workers = skill == LaborSkill::Unskilled
                                               ? r.workers_production
                                               : r.total_workers();
        if (!workers) continue;
        auto& cell = sums[{r.sector3, r.province}];
        cell.second += static_cast<double>(*workers);
        if (flags.is_superstar(r.firm_id)) cell.first += static_cast<double>(*workers);
    }
    std::map<std::pair<std::string, std::string>, double> out;
    for (const auto& [key, s] : sums) {
        if (s.second <= 0.0) {
            if (diag) ++diag->zero_worker_cells;
            continue;
        }
        out[key] = s.first / s.second;
    }
    return out;
}

std::map<std::pair<std::string, std::string>, double> base_output_share(
    const Panel& panel, const SuperstarFlags& flags, int base_year, BartikDiagnostics* diag) {
    std::map<std::pair<std::string, std::string>, std::pair<double, double>> sums;
    for (const FirmYear& r : panel.rows()) {
        if (r.year != base_year || !r.output) continue;
        auto& cell = sums[{r.sector3, r.province}];
        cell.second += *r.output;
        if (flags.is_superstar(r.firm_id)) cell.first += *r.output;
    }
    std::map<std::pair<std::string, std::string>, double> out;
    for (const auto& [key, s] : sums) {
        if (s.second <= 0.0) {
            if (diag) ++diag->zero_worker_cells;
            continue;
        }
        out[key] = s.first / s.second;
    }
    return out;
}

namespace {

// (sector3, province, year) -> total output; also sector-year national totals.
struct OutputIndex {
    std::map<CellKey, double> cell;
    std::map<std::pair<std::string, int>, double> national;

    explicit OutputIndex(const Panel& panel) {
        for (const FirmYear& r : panel.rows()) {
            if (!r.output) continue;
            cell[CellKey{r.sector3, r.province, r.year}] += *r.output;
            national[{r.sector3, r.year}] += *r.output;
        }
    }

    double cell_or_zero(const std::string& s, const std::string& p, int y) const {
        auto it = cell.find(CellKey{s, p, y});
        return it == cell.end() ? 0.0 : it->second;
    }
    double national_or_zero(const std::string& s, int y) const {
        auto it = national.find({s, y});
        return it == national.end() ? 0.0 : it->second;
    }
};

std::optional<double> loo_growth_from_index(const OutputIndex& idx, const std::string& sector3,
                                            const std::string& province, int year) {
    double now = idx.national_or_zero(sector3, year) - idx.cell_or_zero(sector3, province, year);
    double lag = idx.national_or_zero(sector3, year - 1) -
                 idx.cell_or_zero(sector3, province, year - 1);
    if (lag <= 0.0) return std::nullopt;  // empty leave-out set or zero lagged total
    return (now - lag) / lag;
}

}  // namespace

std::optional<double> loo_output_growth(const Panel& panel, const std::string& sector3,
                                        const std::string& province, int year) {
    OutputIndex idx(panel);
    return loo_growth_from_index(idx, sector3, province, year);
}

InstrumentSeries lab_bartik_iv(
    const std::map<std::pair<std::string, std::string>, double>& shares, const Panel& panel,
    BartikDiagnostics* diag) {
    OutputIndex idx(panel);
    std::vector<int> years = panel.years();

    InstrumentSeries out;
    out.kind = InstrumentKind::LabBartik;
    for (const auto& [cell, share] : shares) {
        const auto& [sector3, province] = cell;
        for (int year : years) {
            auto growth = loo_growth_from_index(idx, sector3, province, year);
            if (!growth) {
                if (diag) ++diag->missing_growth_cells;
                continue;
            }
            out.values[CellKey{sector3, province, year}] = share * (*growth);
        }
    }
    return out;
}

InstrumentSeries tariff_bartik_iv(const Panel& panel, const SuperstarFlags& flags,
                                  const TariffTable& tariffs, int base_year,
                                  BartikDiagnostics* diag) {
    auto shares = base_output_share(panel, flags, base_year, diag);
    std::vector<int> years = panel.years();

    InstrumentSeries out;
    out.kind = InstrumentKind::TarrBartik;
    for (const auto& [cell, share] : shares) {
        const auto& [sector3, province] = cell;
        for (int year : years) {
            auto now = tariffs.lookup(sector3, year);
            auto lag = tariffs.lookup(sector3, year - 1);
            if (!now || !lag) {
                if (diag) ++diag->missing_tariff_cells;
                continue;
            }
            out.values[CellKey{sector3, province, year}] = share * (*now - *lag);
        }
    }
    return out;
}

std::map<std::pair<std::string, int>, double> road_density(
    const std::vector<RegionYear>& regions) {
    // First year with observed road length per province (backfill source).
    std::map<std::string, std::pair<int, double>> first_road;
    for (const RegionYear& r : regions) {
        if (!r.road_km) continue;
        auto it = first_road.find(r.province);
        if (it == first_road.end() || r.year < it->second.first)
            first_road[r.province] = {r.year, *r.road_km};
    }

    std::map<std::pair<std::string, int>, double> out;
    for (const RegionYear& r : regions) {
        if (r.area_km2 <= 0.0)
            throw DomainError("road_density: zero or negative area for province " + r.province +
                              " year " + std::to_string(r.year));
        std::optional<double> road = r.road_km;
        if (!road) {
            auto it = first_road.find(r.province);
            if (it != first_road.end() && r.year < it->second.first)
                road = it->second.second;  // lengths before the first observation backfill
        }
        if (!road) continue;
        out[{r.province, r.year}] = *road / r.area_km2;
    }
    return out;
}

}  // namespace superspill
