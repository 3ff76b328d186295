#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace superspill {

// Persistent-dominance classification rule. A firm is a superstar when it has
// been observed for more than min_tenure_years and sits in the top
// top_share_cutoff of its (sector3, year) output-share distribution in more
// than top_frequency of its observed years.
struct SuperstarRule {
    double top_share_cutoff = 0.05;
    int min_tenure_years = 10;
    double top_frequency = 0.90;
    std::optional<double> foreign_threshold = 0.10;  // ownership split when set
    // median_share ranks firms by the median of their yearly within-cell
    // shares instead of the year-by-year frequency rule.
    enum class Variant { YearFrequency, MedianShare };
    Variant variant = Variant::YearFrequency;

    void validate() const;
};

enum class Ownership { None, Foreign, Domestic };

struct SuperstarFlags {
    // firm_id -> superstar; time-invariant.
    std::map<std::string, bool> superstar;
    std::map<std::string, Ownership> ownership;  // split of superstars only

    bool is_superstar(const std::string& firm_id) const {
        auto it = superstar.find(firm_id);
        return it != superstar.end() && it->second;
    }
};

struct ClassifyDiagnostics {
    std::size_t single_firm_cells = 0;
    std::size_t firms_flagged = 0;
    std::size_t rows_missing_output = 0;
};

SuperstarFlags classify_superstars(const Panel& panel, const SuperstarRule& rule,
                                   ClassifyDiagnostics* diag = nullptr);

enum class SpillKind { H, B, F };

// Values keyed by (sector3, province, year). H is an output share in percent
// (0-100); B and F are IO-weighted sums of H.
struct SpilloverSeries {
    std::map<CellKey, double> values;
    SpillKind kind = SpillKind::H;

    std::optional<double> lookup(const CellKey& key) const {
        auto it = values.find(key);
        if (it == values.end()) return std::nullopt;
        return it->second;
    }
};

struct SpilloverDiagnostics {
    std::vector<CellKey> zero_output_cells;          // hspill
    std::vector<std::string> sectors_not_in_io;      // bspill/fspill, dropped
    std::size_t missing_hspill_contributions = 0;    // treated as 0 in sums
};

// 100 x superstar output / total output per populated cell.
SpilloverSeries hspill(const Panel& panel, const SuperstarFlags& flags,
                       SpilloverDiagnostics* diag = nullptr);

// BSpill_{l,j,t} = sum_{k != l} coeff(k, l) * HSpill_{k,j,t}: exposure of
// upstream sector l to superstar-heavy downstream buyers.
SpilloverSeries bspill(const SpilloverSeries& hs, const IOTable& io,
                       SpilloverDiagnostics* diag = nullptr);

// FSpill_{m,j,t} = sum_{k != m} coeff(m, k) * HSpill_{k,j,t}: exposure of
// downstream sector m to superstar-heavy upstream sellers.
SpilloverSeries fspill(const SpilloverSeries& hs, const IOTable& io,
                       SpilloverDiagnostics* diag = nullptr);

// Row-aligned covariate columns for the regression stage.
struct ControlColumns {
    std::vector<std::optional<double>> hhi;               // national (sector3, year) cell
    std::vector<std::optional<double>> import_intensity;  // imported / materials
    std::vector<std::optional<double>> absorptive;        // ln(wage bill per worker)
    std::vector<std::optional<double>> d_foreign;         // foreign_share > 0.10
    std::vector<std::optional<double>> d_exporter;
};

ControlColumns controls(const Panel& panel, const SuperstarFlags& flags);

}  // namespace superspill
