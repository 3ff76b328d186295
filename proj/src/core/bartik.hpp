#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/csv.hpp"
#include "core/spillovers.hpp"
#include "core/types.hpp"

namespace superspill {

enum class InstrumentKind { LabBartik, TarrBartik, RoadDensity };

struct InstrumentSeries {
    std::map<CellKey, double> values;
    InstrumentKind kind = InstrumentKind::LabBartik;

    std::optional<double> lookup(const CellKey& key) const {
        auto it = values.find(key);
        if (it == values.end()) return std::nullopt;
        return it->second;
    }
};

struct BartikDiagnostics {
    std::size_t zero_worker_cells = 0;
    std::size_t missing_growth_cells = 0;  // empty leave-out set or zero lagged total
    std::size_t missing_tariff_cells = 0;
};

enum class LaborSkill { Unskilled, All };

// Base-year share of superstar workers per (sector3, province) cell.
// Unskilled uses production workers; All uses total workers.
std::map<std::pair<std::string, std::string>, double> base_labor_share(
    const Panel& panel, const SuperstarFlags& flags, int base_year, LaborSkill skill,
    BartikDiagnostics* diag = nullptr);

// Leave-one-out national output growth of sector3 at `year`, excluding
// province j from both the level and the lag. Missing when the leave-out set
// is empty or the lagged total is zero.
std::optional<double> loo_output_growth(const Panel& panel, const std::string& sector3,
                                        const std::string& province, int year);

// value(k, j, t) = base share(k, j) x leave-one-out growth(k, -j, t).
InstrumentSeries lab_bartik_iv(
    const std::map<std::pair<std::string, std::string>, double>& shares, const Panel& panel,
    BartikDiagnostics* diag = nullptr);

// value(k, j, t) = base-year superstar output share(k, j) x tariff change
// (Tariff_{k,t} - Tariff_{k,t-1}).
InstrumentSeries tariff_bartik_iv(const Panel& panel, const SuperstarFlags& flags,
                                  const TariffTable& tariffs, int base_year,
                                  BartikDiagnostics* diag = nullptr);

// Base-year superstar output share per cell (TarrBartik weight component).
std::map<std::pair<std::string, std::string>, double> base_output_share(
    const Panel& panel, const SuperstarFlags& flags, int base_year,
    BartikDiagnostics* diag = nullptr);

// road_km / area_km2 per (province, year). Years before the first observed
// road length inherit that length. Throws on zero area.
std::map<std::pair<std::string, int>, double> road_density(const std::vector<RegionYear>& regions);

}  // namespace superspill
