#include "core/panel_ops.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "core/errors.hpp"

namespace superspill {

Panel apply_deflators(const Panel& panel, const DeflatorTable& deflators) {
    std::vector<FirmYear> rows = panel.rows();
    for (auto& r : rows) {
        auto idx = deflators.lookup(r.sector2, r.year);
        if (!idx)
            throw KeyError("no deflator for (sector2=" + r.sector2 +
                           ", year=" + std::to_string(r.year) + ")");
        double scale = *idx / 100.0;
        auto deflate = [scale](std::optional<double>& v) {
            if (v) v = *v / scale;
        };
        deflate(r.output);
        deflate(r.value_added);
        deflate(r.capital);
        deflate(r.materials);
        deflate(r.energy);
        deflate(r.imported_materials);
    }
    return Panel(std::move(rows), /*deflated=*/true);
}

Panel impute_gap_average(const Panel& panel, const std::vector<Field>& variables, int year,
                         GapImputeReport* report) {
    std::vector<FirmYear> rows = panel.rows();
    for (auto& r : rows) {
        if (r.year != year) continue;
        const FirmYear* prev = panel.find(r.firm_id, year - 1);
        const FirmYear* next = panel.find(r.firm_id, year + 1);
        for (Field f : variables) {
            if (get_field(r, f)) continue;  // only missing values are touched
            std::optional<double> a = prev ? get_field(*prev, f) : std::nullopt;
            std::optional<double> b = next ? get_field(*next, f) : std::nullopt;
            if (a && b) {
                set_field(r, f, (*a + *b) / 2.0);
                r.gap_imputed = true;
                if (report) ++report->imputed;
            } else if (report) {
                report->unimputable.emplace_back(r.firm_id, field_name(f));
            }
        }
    }
    return Panel(std::move(rows), panel.deflated());
}

namespace {

struct TrainRow {
    std::size_t row_index;
    double log_capital;
    Eigen::Vector<double, 5> x;  // 1, log y_{t-1}, log l_{t-1}, log m_{t-1}, log e_{t-1}
};

std::optional<Eigen::Vector<double, 5>> lagged_regressors(const Panel& panel,
                                                          const FirmYear& row) {
    const FirmYear* lag = panel.find(row.firm_id, row.year - 1);
    if (!lag) return std::nullopt;
    auto workers = lag->total_workers();
    if (!lag->output || !workers || !lag->materials || !lag->energy) return std::nullopt;
    if (*lag->output <= 0.0 || *workers < 1 || *lag->materials <= 0.0 || *lag->energy <= 0.0)
        return std::nullopt;
    Eigen::Vector<double, 5> x;
    x << 1.0, std::log(*lag->output), std::log(static_cast<double>(*workers)),
        std::log(*lag->materials), std::log(*lag->energy);
    return x;
}

}  // namespace

Panel impute_capital_regression(const Panel& panel, int target_year, bool per_sector,
                                CapitalImputeReport* report) {
    std::vector<FirmYear> rows = panel.rows();

    // Group key: pooled fit uses a single group, per-sector uses sector2.
    auto group_of = [per_sector](const FirmYear& r) {
        return per_sector ? r.sector2 : std::string("*");
    };

    std::map<std::string, std::vector<TrainRow>> training;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const FirmYear& r = rows[i];
        if (!r.capital || *r.capital <= 0.0) continue;
        auto x = lagged_regressors(panel, r);
        if (!x) continue;
        training[group_of(r)].push_back(TrainRow{i, std::log(*r.capital), *x});
    }

    constexpr int kParams = 5;
    std::map<std::string, Eigen::Vector<double, 5>> betas;
    // residuals by (group, firm, year) for the "most recent residual" rule
    std::map<std::tuple<std::string, std::string, int>, double> residuals;

    for (auto& [group, data] : training) {
        if (data.size() < 5 * kParams)
            throw InsufficientDataError(
                "capital imputation: " + std::to_string(data.size()) +
                " usable training rows in group '" + group + "', need at least " +
                std::to_string(5 * kParams));
        Eigen::MatrixXd X(data.size(), kParams);
        Eigen::VectorXd y(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            X.row(i) = data[i].x;
            y(i) = data[i].log_capital;
        }
        Eigen::VectorXd beta = (X.transpose() * X).ldlt().solve(X.transpose() * y);
        betas[group] = beta;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const FirmYear& r = rows[data[i].row_index];
            residuals[{group, r.firm_id, r.year}] = y(i) - X.row(i).dot(beta);
        }
        if (report) {
            report->training_rows += data.size();
            report->coefficients.assign(beta.data(), beta.data() + kParams);
        }
    }

    for (auto& r : rows) {
        if (r.year != target_year || r.capital) continue;
        std::string group = group_of(r);
        auto bit = betas.find(group);
        if (bit == betas.end()) continue;
        auto x = lagged_regressors(panel, r);
        if (!x) {
            if (report) ++report->skipped_missing_lags;
            continue;
        }
        double fitted = bit->second.dot(*x);
        // Most recent prior residual of this firm within the group, 0 if none.
        double resid = 0.0;
        for (int y = r.year - 1; y >= r.year - 64; --y) {
            auto it = residuals.find({group, r.firm_id, y});
            if (it != residuals.end()) {
                resid = it->second;
                break;
            }
        }
        r.capital = std::exp(fitted + resid);
        r.capital_imputed = true;
        if (report) ++report->imputed;
    }
    return Panel(std::move(rows), panel.deflated());
}

Panel apply_island_map(const Panel& panel, const std::map<std::string, std::string>& mapping) {
    std::vector<FirmYear> rows = panel.rows();
    for (auto& r : rows) {
        if (!r.island.empty()) continue;
        auto it = mapping.find(r.province);
        if (it != mapping.end()) r.island = it->second;
    }
    return Panel(std::move(rows), panel.deflated());
}

}  // namespace superspill
