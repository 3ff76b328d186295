#include "core/types.hpp"

#include <algorithm>

#include "core/errors.hpp"

namespace superspill {

const char* field_name(Field f) {
    switch (f) {
        case Field::Output: return "output";
        case Field::ValueAdded: return "value_added";
        case Field::Capital: return "capital";
        case Field::Materials: return "materials";
        case Field::Energy: return "energy";
        case Field::WorkersProduction: return "workers_production";
        case Field::WorkersNonproduction: return "workers_nonproduction";
        case Field::WageBill: return "wage_bill";
        case Field::ForeignShare: return "foreign_share";
        case Field::ImportedMaterials: return "imported_materials";
    }
    return "?";
}

Field field_from_name(const std::string& name) {
    static const std::pair<const char*, Field> table[] = {
        {"output", Field::Output},
        {"value_added", Field::ValueAdded},
        {"capital", Field::Capital},
        {"materials", Field::Materials},
        {"energy", Field::Energy},
        {"workers_production", Field::WorkersProduction},
        {"workers_nonproduction", Field::WorkersNonproduction},
        {"wage_bill", Field::WageBill},
        {"foreign_share", Field::ForeignShare},
        {"imported_materials", Field::ImportedMaterials},
    };
    for (const auto& [n, f] : table)
        if (name == n) return f;
    throw ConfigError("unknown panel field: " + name);
}

std::optional<double> get_field(const FirmYear& row, Field f) {
    switch (f) {
        case Field::Output: return row.output;
        case Field::ValueAdded: return row.value_added;
        case Field::Capital: return row.capital;
        case Field::Materials: return row.materials;
        case Field::Energy: return row.energy;
        case Field::WorkersProduction:
            if (!row.workers_production) return std::nullopt;
            return static_cast<double>(*row.workers_production);
        case Field::WorkersNonproduction:
            if (!row.workers_nonproduction) return std::nullopt;
            return static_cast<double>(*row.workers_nonproduction);
        case Field::WageBill: return row.wage_bill;
        case Field::ForeignShare: return row.foreign_share;
        case Field::ImportedMaterials: return row.imported_materials;
    }
    return std::nullopt;
}

void set_field(FirmYear& row, Field f, std::optional<double> v) {
    auto as_count = [](std::optional<double> x) -> std::optional<long long> {
        if (!x) return std::nullopt;
        return static_cast<long long>(*x + (*x >= 0 ? 0.5 : -0.5));
    };
    switch (f) {
        case Field::Output: row.output = v; break;
        case Field::ValueAdded: row.value_added = v; break;
        case Field::Capital: row.capital = v; break;
        case Field::Materials: row.materials = v; break;
        case Field::Energy: row.energy = v; break;
        case Field::WorkersProduction: row.workers_production = as_count(v); break;
        case Field::WorkersNonproduction: row.workers_nonproduction = as_count(v); break;
        case Field::WageBill: row.wage_bill = v; break;
        case Field::ForeignShare: row.foreign_share = v; break;
        case Field::ImportedMaterials: row.imported_materials = v; break;
    }
}

Panel::Panel(std::vector<FirmYear> rows, bool deflated)
    : rows_(std::move(rows)), deflated_(deflated) {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const FirmYear& r = rows_[i];
        auto [it, inserted] = by_firm_year_.emplace(std::make_pair(r.firm_id, r.year), i);
        if (!inserted)
            throw IntegrityError("duplicate (firm_id, year): (" + r.firm_id + ", " +
                                 std::to_string(r.year) + ")");
        by_cell_[CellKey{r.sector3, r.province, r.year}].push_back(i);
    }
}

const FirmYear* Panel::find(const std::string& firm_id, int year) const {
    auto it = by_firm_year_.find({firm_id, year});
    if (it == by_firm_year_.end()) return nullptr;
    return &rows_[it->second];
}

const std::vector<std::size_t>& Panel::cell(const CellKey& key) const {
    static const std::vector<std::size_t> kEmpty;
    auto it = by_cell_.find(key);
    if (it == by_cell_.end()) return kEmpty;
    return it->second;
}

std::vector<int> Panel::years() const {
    std::vector<int> ys;
    for (const auto& r : rows_)
        if (std::find(ys.begin(), ys.end(), r.year) == ys.end()) ys.push_back(r.year);
    std::sort(ys.begin(), ys.end());
    return ys;
}

}  // namespace superspill
