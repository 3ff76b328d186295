#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/bartik.hpp"
#include "core/csv.hpp"
#include "core/model.hpp"
#include "core/simulate.hpp"
#include "core/spillovers.hpp"
#include "core/tfp.hpp"

namespace superspill {

// One regression request as declared in the manifest. Interactions follow the
// just-identified convention: an interacted endogenous column is instrumented
// by instrument x the same dummy.
struct ManifestRegression {
    std::string name;
    std::string dependent;  // phi | dphi | lp
    std::vector<std::string> endogenous;
    std::vector<std::string> instruments;
    std::vector<std::string> exogenous;
    std::vector<std::string> fe;
    std::string cluster = "firm_id";
    std::string sample = "non_superstar";  // or "all"
    bool ipw = false;
    bool interact_fe = false;
    bool lag_exposure = false;  // merge cell series at year-1
    struct Interaction {
        std::string var;         // endogenous column
        std::string instrument;  // its instrument
        std::string with;        // dummy column
    };
    std::vector<Interaction> interactions;
};

struct ManifestWindow {
    int t1 = 0;
    int t2 = 0;
    bool continuity_required = true;
};

struct GapImputeConfig {
    int year = 0;
    std::vector<std::string> variables;
};

struct CapitalImputeConfig {
    int target_year = 0;
    bool per_sector = false;
};

struct RunManifest {
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string output_dir = "out";
    int threads = 1;

    // Input paths (unused ones may be empty).
    std::string panel_path, io_table_path, deflators_path, tariffs_path, regions_path,
        province_island_path;
    ColumnSchema schema;

    std::vector<std::string> stages;  // execution order, validated names

    int deflator_base_year = 2000;
    SuperstarRule superstar;
    ProxySpec proxy;
    bool tfp_fallback_2digit = true;
    std::optional<GapImputeConfig> gap_impute;
    std::optional<CapitalImputeConfig> capital_impute;
    int instrument_base_year = 2001;
    LaborSkill instrument_labor_skill = LaborSkill::Unskilled;

    std::vector<ManifestRegression> regressions;
    std::vector<ManifestWindow> windows;
    std::vector<std::string> decomposition_groups;  // "superstar", "ownership"

    SimPanelConfig sim;
    ModelParams sim_model;
    bool has_sim = false;

    std::string source_dir;  // directory of the manifest file, for relative paths

    std::string resolve(const std::string& path) const;
};

// Parse + structural validation; errors name the offending field path.
RunManifest parse_manifest_file(const std::string& path);
RunManifest parse_manifest_json(const std::string& json_text, const std::string& source_dir = "");

// Existence checks for the inputs required by the enabled stages.
void validate_manifest(const RunManifest& manifest);

const std::vector<std::string>& known_stages();  // canonical order

}  // namespace superspill
