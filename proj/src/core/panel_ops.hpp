#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace superspill {

// Divides output, value_added, capital, materials, energy and
// imported_materials by (wpi / 100). Not idempotent: the returned panel
// carries deflated() == true and the caller tracks state through it.
// Throws KeyError when a (sector2, year) cell is absent from the table.
Panel apply_deflators(const Panel& panel, const DeflatorTable& deflators);

struct GapImputeReport {
    // (firm_id, field) pairs left missing because a neighbor year is absent.
    std::vector<std::pair<std::string, std::string>> unimputable;
    std::size_t imputed = 0;
};

// Fills a missing value at `year` with the mean of the firm's observed t-1
// and t+1 values, per field in `variables`. Firms missing either neighbor are
// reported, never fatal.
Panel impute_gap_average(const Panel& panel, const std::vector<Field>& variables, int year,
                         GapImputeReport* report = nullptr);

struct CapitalImputeReport {
    std::size_t training_rows = 0;
    std::size_t imputed = 0;
    std::size_t skipped_missing_lags = 0;
    // Fitted coefficients in logs: intercept, output, labour, materials, energy.
    std::vector<double> coefficients;
};

// Fits log capital_t on lagged log output, labour, materials and energy over
// all observed firm-years (optionally per 2-digit sector), then predicts
// capital at target_year as the fitted value plus the firm's most recent
// residual (0 when the firm has none). Imputed rows are flagged.
// Throws InsufficientDataError when usable training rows < 5x parameter count.
Panel impute_capital_regression(const Panel& panel, int target_year, bool per_sector = false,
                                CapitalImputeReport* report = nullptr);

// Fills empty island codes from a province -> island lookup.
Panel apply_island_map(const Panel& panel, const std::map<std::string, std::string>& mapping);

}  // namespace superspill
