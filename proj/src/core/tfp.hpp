#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/types.hpp"

namespace superspill {

// Proxy-variable estimator configuration. `materials` follows the
// intermediate-inputs proxy; `investment` derives the proxy from the
// firm's capital change between consecutive years (rows with non-positive
// change are unusable, the classic truncation of the investment proxy).
struct ProxySpec {
    enum class Proxy { Materials, Investment };
    Proxy proxy_field = Proxy::Materials;
    int first_stage_poly_degree = 3;  // in (log proxy, log capital), 2..4
    int markov_poly_degree = 1;       // lagged-composite polynomial, 1..4

    void validate() const;
};

struct ProductionEstimate {
    std::string sector3;  // estimation unit label (3-digit code, or 2-digit fallback)
    double beta_l = 0.0;
    double beta_k = 0.0;
    long n_obs = 0;
    bool converged = false;
    int iterations = 0;
    double objective = 0.0;
};

// Minimum usable firm-year rows per estimation unit.
inline constexpr long kMinSectorObs = 50;

// Two-stage proxy estimation on one 3-digit sector.
// Stage 1: log value added on log workers plus a full polynomial in
// (log proxy, log capital); beta_l is the labour coefficient and the fitted
// polynomial part is the composite Phi-hat.
// Stage 2: golden-section search for beta_k in [0,1] minimizing the sum of
// squared residuals of (Phihat_t - beta_k k_t) on a polynomial of
// (Phihat_{t-1} - beta_k k_{t-1}).
// Throws InsufficientDataError below kMinSectorObs rows.
ProductionEstimate estimate_production(const Panel& panel, const std::string& sector3,
                                       const ProxySpec& spec);

// The stage-2 moment objective at a pinned beta_k, on the same subsample and
// stage-1 composite that estimate_production uses. Test hook for verifying
// the golden-section minimizer against a grid scan.
double stage2_objective(const Panel& panel, const std::string& sector3, const ProxySpec& spec,
                        double beta_k);

struct EstimateSet {
    std::vector<ProductionEstimate> estimates;
    // sector3 -> index into estimates (fallback units cover several sectors).
    std::map<std::string, std::size_t> by_sector;
    std::vector<std::string> skipped_sectors;  // below the sample threshold
};

// Runs estimate_production per 3-digit sector (in parallel across sectors
// when threads > 1; results are deterministic regardless). Sectors below the
// threshold fall back to their 2-digit parent when fallback_to_2digit is set,
// otherwise they are skipped.
EstimateSet estimate_all(const Panel& panel, const ProxySpec& spec,
                         bool fallback_to_2digit = true, int threads = 1,
                         long min_obs = kMinSectorObs);

struct TfpReport {
    std::size_t rows_without_estimate = 0;
    std::size_t rows_missing_inputs = 0;
    std::size_t lp_unavailable = 0;
};

// phi = y - beta_l l - beta_k k (logs) per row; rows in sectors without a
// converged estimate keep phi missing and are counted.
Panel compute_tfp(const Panel& panel, const EstimateSet& estimates, TfpReport* report = nullptr);

// dphi = phi_t - phi at the firm's first phi-observed year; base-year rows
// carry dphi = 0 and the dphi_base_year flag.
Panel tfp_growth(const Panel& panel);

// lp = ln(value added / total workers); value added <= 0 or zero workers
// leaves lp missing and is counted in the report.
Panel labour_productivity(const Panel& panel, TfpReport* report = nullptr);

}  // namespace superspill
