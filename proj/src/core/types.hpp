#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace superspill {

// (sector3, province, year) cell key used by spillover and instrument series.
struct CellKey {
    std::string sector3;
    std::string province;
    int year = 0;

    friend bool operator<(const CellKey& a, const CellKey& b) {
        return std::tie(a.sector3, a.province, a.year) < std::tie(b.sector3, b.province, b.year);
    }
    friend bool operator==(const CellKey& a, const CellKey& b) {
        return std::tie(a.sector3, a.province, a.year) == std::tie(b.sector3, b.province, b.year);
    }
};

// One firm-year observation. Monetary fields are constant-price millions.
// Absent values are std::nullopt, never sentinel numbers; the CSV form uses
// the empty string.
struct FirmYear {
    std::string firm_id;
    int year = 0;
    std::string sector3;
    std::string sector2;
    std::string province;
    std::string island;

    std::optional<double> output;
    std::optional<double> value_added;
    std::optional<double> capital;
    std::optional<double> materials;
    std::optional<double> energy;
    std::optional<long long> workers_production;
    std::optional<long long> workers_nonproduction;
    std::optional<double> wage_bill;
    std::optional<double> foreign_share;
    std::optional<bool> export_flag;
    std::optional<double> imported_materials;

    // Derived columns attached by downstream stages; not part of the input
    // schema and only emitted by the augmented writer.
    std::optional<double> phi;
    std::optional<double> dphi;
    std::optional<double> lp;
    bool dphi_base_year = false;
    bool capital_imputed = false;
    bool gap_imputed = false;

    std::optional<long long> total_workers() const {
        if (!workers_production || !workers_nonproduction) return std::nullopt;
        return *workers_production + *workers_nonproduction;
    }
};

// Numeric FirmYear fields addressable by name (imputation operates on these).
enum class Field {
    Output,
    ValueAdded,
    Capital,
    Materials,
    Energy,
    WorkersProduction,
    WorkersNonproduction,
    WageBill,
    ForeignShare,
    ImportedMaterials,
};

const char* field_name(Field f);
Field field_from_name(const std::string& name);
std::optional<double> get_field(const FirmYear& row, Field f);
void set_field(FirmYear& row, Field f, std::optional<double> v);

// Indexed, immutable-after-construction firm-year panel. Row order is the
// ingestion order, so iteration is deterministic given identical input.
class Panel {
  public:
    Panel() = default;
    explicit Panel(std::vector<FirmYear> rows, bool deflated = false);

    const std::vector<FirmYear>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    bool deflated() const { return deflated_; }

    // nullptr when (firm_id, year) is absent.
    const FirmYear* find(const std::string& firm_id, int year) const;
    // Row indices of a (sector3, province, year) cell; empty if none.
    const std::vector<std::size_t>& cell(const CellKey& key) const;

    const std::map<std::pair<std::string, int>, std::size_t>& firm_year_index() const {
        return by_firm_year_;
    }
    const std::map<CellKey, std::vector<std::size_t>>& cell_index() const { return by_cell_; }

    std::vector<int> years() const;

  private:
    std::vector<FirmYear> rows_;
    bool deflated_ = false;
    std::map<std::pair<std::string, int>, std::size_t> by_firm_year_;
    std::map<CellKey, std::vector<std::size_t>> by_cell_;
};

// WPI deflator indexed by (sector2, year); base-year entries must equal 100.
struct DeflatorTable {
    std::map<std::pair<std::string, int>, double> entries;
    int base_year = 0;

    std::optional<double> lookup(const std::string& sector2, int year) const {
        auto it = entries.find({sector2, year});
        if (it == entries.end()) return std::nullopt;
        return it->second;
    }
};

// Square intermediate-use coefficient matrix over 3-digit sectors.
// coeff(k, l) is the use from upstream l per unit of output of downstream k.
struct IOTable {
    std::vector<std::string> sectors;
    std::vector<std::vector<double>> coeffs;

    std::optional<std::size_t> index_of(const std::string& sector) const {
        for (std::size_t i = 0; i < sectors.size(); ++i)
            if (sectors[i] == sector) return i;
        return std::nullopt;
    }
    double coeff(std::size_t downstream_k, std::size_t upstream_l) const {
        return coeffs[downstream_k][upstream_l];
    }
};

// MFN simple-average tariff rate (percent) by (sector3, year).
struct TariffTable {
    std::map<std::pair<std::string, int>, double> entries;

    std::optional<double> lookup(const std::string& sector3, int year) const {
        auto it = entries.find({sector3, year});
        if (it == entries.end()) return std::nullopt;
        return it->second;
    }
};

}  // namespace superspill
