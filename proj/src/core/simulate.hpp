#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/csv.hpp"
#include "core/model.hpp"
#include "core/spillovers.hpp"
#include "core/types.hpp"

namespace superspill {

struct SimPanelConfig {
    int n_firms_initial = 1000;
    int n_years = 8;
    int n_sectors = 6;
    int n_provinces = 8;
    double superstar_fraction = 0.05;
    double beta_l = 0.45;
    double beta_k = 0.30;
    double productivity_ar1 = 0.5;
    double noise_sd = 0.1;     // measurement noise on log value added
    double entry_rate = 0.08;  // entrants per year as a share of active firms
    std::uint64_t seed = 1;

    int first_year = 2001;

    void validate() const;  // beta_l + beta_k < 1 and range checks
};

struct GroundTruth {
    double beta_l = 0.0;
    double beta_k = 0.0;
    double alpha = 0.0;
    double tau = 0.0;
    double psi = 0.0;
    std::uint64_t seed = 0;
    // log-TFP per (firm_id, year), exactly the phi entering the output identity
    std::map<std::pair<std::string, int>, double> true_tfp;
    SuperstarFlags flags;
    SpilloverSeries hspill, bspill, fspill;  // the series used in the TFP law
    IOTable io;
    TariffTable tariffs;
    std::vector<RegionYear> regions;
    std::map<std::string, std::string> province_island;
};

struct SimResult {
    Panel panel;
    GroundTruth truth;
};

// Synthetic firm panel with known production elasticities and spillover
// structure. Capability draws set a time-invariant superstar flag (top
// superstar_fraction per sector, ties by firm_id); cell exposures are
// computed with the spillover module on the running panel and enter the TFP
// law of motion lagged one period; materials are strictly increasing in TFP;
// a cell-level shock moves superstar output and next year's non-superstar TFP
// together (so contemporaneized exposure is endogenous), while a national
// sector shock moves superstar expansion proportionally to the cell's base
// labour share (the shift-share instrument's first stage). Deterministic
// given the seed: all draws are counter-based on (seed, firm, year).
SimResult simulate_panel(const SimPanelConfig& config, const ModelParams& params);

}  // namespace superspill
