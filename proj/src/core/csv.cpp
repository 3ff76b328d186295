#include "core/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace superspill::csv {

std::optional<std::size_t> Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return std::nullopt;
}

namespace {

std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(ch);
        }
    }
    out.push_back(std::move(field));
    return out;
}

std::string encode_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

}  // namespace

Table parse(const std::string& text) {
    Table t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.eof()) break;
        auto fields = split_record(line);
        if (first) {
            t.header = std::move(fields);
            first = false;
        } else {
            t.rows.push_back(std::move(fields));
        }
    }
    return t;
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string to_string(const Table& table) {
    std::string out;
    auto emit = [&out](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out.push_back(',');
            out += encode_field(fields[i]);
        }
        out.push_back('\n');
    };
    emit(table.header);
    for (const auto& r : table.rows) emit(r);
    return out;
}

void write_file(const std::string& path, const Table& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    out << to_string(table);
    if (!out) throw IoError("write failed: " + path);
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& context) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw SchemaError("cannot parse number '" + s + "' in " + context);
    return v;
}

long long parse_int(const std::string& s, const std::string& context) {
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw SchemaError("cannot parse integer '" + s + "' in " + context);
    return v;
}

}  // namespace superspill::csv

namespace superspill {

namespace {

const char* kPanelColumns[] = {
    "firm_id",       "year",     "sector3",  "sector2",
    "province",      "island",   "output",   "value_added",
    "capital",       "materials", "energy",  "workers_production",
    "workers_nonproduction", "wage_bill", "foreign_share", "export_flag",
    "imported_materials",
};

std::string mapped(const ColumnSchema& schema, const std::string& canonical) {
    auto it = schema.find(canonical);
    return it == schema.end() ? canonical : it->second;
}

std::optional<double> opt_double(const std::string& s, const std::string& ctx) {
    if (s.empty()) return std::nullopt;
    return csv::parse_double(s, ctx);
}

std::optional<long long> opt_int(const std::string& s, const std::string& ctx) {
    if (s.empty()) return std::nullopt;
    return csv::parse_int(s, ctx);
}

std::optional<bool> opt_bool(const std::string& s, const std::string& ctx) {
    if (s.empty()) return std::nullopt;
    if (s == "1" || s == "true" || s == "TRUE") return true;
    if (s == "0" || s == "false" || s == "FALSE") return false;
    throw SchemaError("cannot parse boolean '" + s + "' in " + ctx);
}

// Row-level invariants; returns a reason when the row must be rejected.
std::optional<std::string> validate_row(const FirmYear& r) {
    if (r.firm_id.empty()) return "empty firm_id";
    if (r.sector3.empty() || r.sector2.empty()) return "empty sector code";
    if (r.sector3.rfind(r.sector2, 0) != 0)
        return "sector2 '" + r.sector2 + "' is not a prefix of sector3 '" + r.sector3 + "'";
    auto nonneg = [](const std::optional<double>& v) { return !v || *v >= 0.0; };
    if (!nonneg(r.output)) return "negative output";
    if (!nonneg(r.capital)) return "negative capital";
    if (!nonneg(r.materials)) return "negative materials";
    if (!nonneg(r.energy)) return "negative energy";
    if (!nonneg(r.wage_bill)) return "negative wage_bill";
    if (!nonneg(r.imported_materials)) return "negative imported_materials";
    if (r.workers_production && *r.workers_production < 0) return "negative workers_production";
    if (r.workers_nonproduction && *r.workers_nonproduction < 0)
        return "negative workers_nonproduction";
    if (r.foreign_share && (*r.foreign_share < 0.0 || *r.foreign_share > 1.0))
        return "foreign_share outside [0,1]";
    if (r.imported_materials && r.materials && *r.imported_materials > *r.materials)
        return "imported_materials exceeds materials";
    return std::nullopt;
}

}  // namespace

Panel panel_from_csv(const csv::Table& table, const ColumnSchema& schema, LoadReport* report) {
    std::map<std::string, std::size_t> col;
    for (const char* canonical : kPanelColumns) {
        std::string actual = mapped(schema, canonical);
        auto idx = table.column(actual);
        if (!idx) throw SchemaError("missing column '" + actual + "' (for " + canonical + ")");
        col[canonical] = *idx;
    }

    std::vector<FirmYear> rows;
    rows.reserve(table.rows.size());
    std::map<std::pair<std::string, int>, std::size_t> seen;
    std::vector<std::string> duplicates;

    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& rec = table.rows[i];
        auto get = [&](const char* name) -> const std::string& {
            static const std::string kEmpty;
            std::size_t j = col.at(name);
            return j < rec.size() ? rec[j] : kEmpty;
        };
        std::string ctx = "row " + std::to_string(i + 1);

        FirmYear r;
        r.firm_id = get("firm_id");
        r.year = static_cast<int>(csv::parse_int(get("year"), ctx + " year"));
        r.sector3 = get("sector3");
        r.sector2 = get("sector2");
        r.province = get("province");
        r.island = get("island");
        r.output = opt_double(get("output"), ctx + " output");
        r.value_added = opt_double(get("value_added"), ctx + " value_added");
        r.capital = opt_double(get("capital"), ctx + " capital");
        r.materials = opt_double(get("materials"), ctx + " materials");
        r.energy = opt_double(get("energy"), ctx + " energy");
        r.workers_production = opt_int(get("workers_production"), ctx + " workers_production");
        r.workers_nonproduction =
            opt_int(get("workers_nonproduction"), ctx + " workers_nonproduction");
        r.wage_bill = opt_double(get("wage_bill"), ctx + " wage_bill");
        r.foreign_share = opt_double(get("foreign_share"), ctx + " foreign_share");
        r.export_flag = opt_bool(get("export_flag"), ctx + " export_flag");
        r.imported_materials = opt_double(get("imported_materials"), ctx + " imported_materials");

        // Derived columns (written by the augmented writer) round-trip too.
        auto opt_col = [&table, &rec](const char* name) -> std::string {
            auto idx = table.column(name);
            if (!idx || *idx >= rec.size()) return {};
            return rec[*idx];
        };
        if (std::string v = opt_col("phi"); !v.empty())
            r.phi = csv::parse_double(v, ctx + " phi");
        if (std::string v = opt_col("dphi"); !v.empty())
            r.dphi = csv::parse_double(v, ctx + " dphi");
        if (std::string v = opt_col("lp"); !v.empty()) r.lp = csv::parse_double(v, ctx + " lp");
        if (opt_col("dphi_base_year") == "1") r.dphi_base_year = true;
        if (opt_col("capital_imputed") == "1") r.capital_imputed = true;
        if (opt_col("gap_imputed") == "1") r.gap_imputed = true;

        auto key = std::make_pair(r.firm_id, r.year);
        auto it = seen.find(key);
        if (it != seen.end()) {
            duplicates.push_back("(" + r.firm_id + ", " + std::to_string(r.year) + ")");
            continue;
        }

        if (auto reason = validate_row(r)) {
            if (report)
                report->rejected.push_back(RejectedRow{i + 1, r.firm_id, r.year, *reason});
            continue;
        }
        seen.emplace(key, rows.size());
        rows.push_back(std::move(r));
    }

    if (!duplicates.empty()) {
        std::string msg = "duplicate (firm_id, year): ";
        for (std::size_t i = 0; i < duplicates.size(); ++i) {
            if (i) msg += ", ";
            msg += duplicates[i];
        }
        throw IntegrityError(msg);
    }
    return Panel(std::move(rows));
}

Panel load_panel(const std::string& path, const ColumnSchema& schema, LoadReport* report) {
    return panel_from_csv(csv::read_file(path), schema, report);
}

csv::Table panel_to_csv(const Panel& panel, bool include_derived) {
    csv::Table t;
    for (const char* c : kPanelColumns) t.header.push_back(c);
    if (include_derived) {
        t.header.insert(t.header.end(),
                        {"phi", "dphi", "lp", "dphi_base_year", "capital_imputed", "gap_imputed"});
    }
    auto fmt = [](const std::optional<double>& v) {
        return v ? csv::format_double(*v) : std::string();
    };
    auto fmt_i = [](const std::optional<long long>& v) {
        return v ? std::to_string(*v) : std::string();
    };
    for (const auto& r : panel.rows()) {
        std::vector<std::string> rec = {
            r.firm_id,
            std::to_string(r.year),
            r.sector3,
            r.sector2,
            r.province,
            r.island,
            fmt(r.output),
            fmt(r.value_added),
            fmt(r.capital),
            fmt(r.materials),
            fmt(r.energy),
            fmt_i(r.workers_production),
            fmt_i(r.workers_nonproduction),
            fmt(r.wage_bill),
            fmt(r.foreign_share),
            r.export_flag ? (*r.export_flag ? "1" : "0") : "",
            fmt(r.imported_materials),
        };
        if (include_derived) {
            rec.push_back(fmt(r.phi));
            rec.push_back(fmt(r.dphi));
            rec.push_back(fmt(r.lp));
            rec.push_back(r.dphi_base_year ? "1" : "0");
            rec.push_back(r.capital_imputed ? "1" : "0");
            rec.push_back(r.gap_imputed ? "1" : "0");
        }
        t.rows.push_back(std::move(rec));
    }
    return t;
}

void write_panel(const Panel& panel, const std::string& path, bool include_derived) {
    csv::write_file(path, panel_to_csv(panel, include_derived));
}

DeflatorTable load_deflators(const std::string& path, int base_year) {
    csv::Table t = csv::read_file(path);
    auto cs = t.column("sector2"), cy = t.column("year"), cw = t.column("wpi");
    if (!cs || !cy || !cw) throw SchemaError("deflator CSV needs columns sector2, year, wpi");
    DeflatorTable d;
    d.base_year = base_year;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& rec = t.rows[i];
        std::string ctx = "deflators row " + std::to_string(i + 1);
        std::string s = rec[*cs];
        int y = static_cast<int>(csv::parse_int(rec[*cy], ctx));
        double w = csv::parse_double(rec[*cw], ctx);
        if (w <= 0.0) throw IntegrityError(ctx + ": non-positive wpi");
        d.entries[{s, y}] = w;
    }
    for (const auto& [key, w] : d.entries) {
        auto base = d.entries.find({key.first, base_year});
        if (base != d.entries.end() && std::abs(base->second - 100.0) > 1e-9)
            throw IntegrityError("deflator for sector2 " + key.first + " at base year " +
                                 std::to_string(base_year) + " is not 100");
    }
    return d;
}

IOTable load_io_table(const std::string& path) {
    csv::Table t = csv::read_file(path);
    auto cr = t.column("row_sector"), cc = t.column("col_sector"), cv = t.column("coeff");
    if (!cr || !cc || !cv)
        throw SchemaError("IO-table CSV needs columns row_sector, col_sector, coeff");
    std::vector<std::string> sectors;
    auto intern = [&sectors](const std::string& s) {
        for (std::size_t i = 0; i < sectors.size(); ++i)
            if (sectors[i] == s) return i;
        sectors.push_back(s);
        return sectors.size() - 1;
    };
    std::vector<std::tuple<std::size_t, std::size_t, double>> cells;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& rec = t.rows[i];
        std::string ctx = "io_table row " + std::to_string(i + 1);
        double v = csv::parse_double(rec[*cv], ctx);
        if (!std::isfinite(v) || v < 0.0) throw IntegrityError(ctx + ": coefficient must be finite and >= 0");
        cells.emplace_back(intern(rec[*cr]), intern(rec[*cc]), v);
    }
    IOTable io;
    io.sectors = sectors;
    io.coeffs.assign(sectors.size(), std::vector<double>(sectors.size(), 0.0));
    for (const auto& [r, c, v] : cells) io.coeffs[r][c] = v;
    return io;
}

TariffTable load_tariffs(const std::string& path) {
    csv::Table t = csv::read_file(path);
    auto cs = t.column("sector3"), cy = t.column("year"), cm = t.column("mfn");
    if (!cs || !cy || !cm) throw SchemaError("tariff CSV needs columns sector3, year, mfn");
    TariffTable tt;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& rec = t.rows[i];
        std::string ctx = "tariffs row " + std::to_string(i + 1);
        double m = csv::parse_double(rec[*cm], ctx);
        if (!std::isfinite(m) || m < 0.0) throw IntegrityError(ctx + ": mfn must be finite and >= 0");
        tt.entries[{rec[*cs], static_cast<int>(csv::parse_int(rec[*cy], ctx))}] = m;
    }
    return tt;
}

std::map<std::string, std::string> load_province_island(const std::string& path) {
    csv::Table t = csv::read_file(path);
    auto cp = t.column("province"), ci = t.column("island");
    if (!cp || !ci) throw SchemaError("province-island CSV needs columns province, island");
    std::map<std::string, std::string> m;
    for (const auto& rec : t.rows) m[rec[*cp]] = rec[*ci];
    return m;
}

std::vector<RegionYear> load_regions(const std::string& path) {
    csv::Table t = csv::read_file(path);
    auto cp = t.column("province"), cy = t.column("year"), cr = t.column("road_km"),
         ca = t.column("area_km2");
    if (!cp || !cy || !cr || !ca)
        throw SchemaError("region CSV needs columns province, year, road_km, area_km2");
    std::vector<RegionYear> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& rec = t.rows[i];
        std::string ctx = "regions row " + std::to_string(i + 1);
        RegionYear r;
        r.province = rec[*cp];
        r.year = static_cast<int>(csv::parse_int(rec[*cy], ctx));
        r.road_km = rec[*cr].empty()
                        ? std::nullopt
                        : std::optional<double>(csv::parse_double(rec[*cr], ctx));
        r.area_km2 = csv::parse_double(rec[*ca], ctx);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace superspill
