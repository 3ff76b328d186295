#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace superspill::csv {

// Minimal RFC-4180-ish table: first record is the header. Quoted fields are
// accepted on input; output quotes only when a field contains , " or newline.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(const std::string& name) const;
};

Table read_file(const std::string& path);
Table parse(const std::string& text);
void write_file(const std::string& path, const Table& table);
std::string to_string(const Table& table);

// Shortest representation that parses back to the same double (to_chars).
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& context);
long long parse_int(const std::string& s, const std::string& context);

}  // namespace superspill::csv

namespace superspill {

// Canonical field name -> actual CSV header name. Unmapped names are used
// verbatim.
using ColumnSchema = std::map<std::string, std::string>;

struct RejectedRow {
    std::size_t line = 0;  // 1-based data-row number (header excluded)
    std::string firm_id;
    int year = 0;
    std::string reason;
};

struct LoadReport {
    std::vector<RejectedRow> rejected;
};

// Panel CSV columns (exact canonical names): firm_id, year, sector3, sector2,
// province, island, output, value_added, capital, materials, energy,
// workers_production, workers_nonproduction, wage_bill, foreign_share,
// export_flag, imported_materials. Empty string = missing.
Panel load_panel(const std::string& path, const ColumnSchema& schema = {},
                 LoadReport* report = nullptr);
Panel panel_from_csv(const csv::Table& table, const ColumnSchema& schema = {},
                     LoadReport* report = nullptr);

// include_derived adds phi, dphi, lp and the imputation flags.
void write_panel(const Panel& panel, const std::string& path, bool include_derived = false);
csv::Table panel_to_csv(const Panel& panel, bool include_derived = false);

// Deflator CSV: sector2, year, wpi.
DeflatorTable load_deflators(const std::string& path, int base_year);
// IO-table CSV: row_sector, col_sector, coeff (row = downstream buyer).
IOTable load_io_table(const std::string& path);
// Tariff CSV: sector3, year, mfn.
TariffTable load_tariffs(const std::string& path);
// Province-island CSV: province, island.
std::map<std::string, std::string> load_province_island(const std::string& path);

struct RegionYear {
    std::string province;
    int year = 0;
    std::optional<double> road_km;
    double area_km2 = 0.0;
};
// Region CSV: province, year, road_km, area_km2 (road_km may be empty).
std::vector<RegionYear> load_regions(const std::string& path);

}  // namespace superspill
