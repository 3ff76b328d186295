#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/bartik.hpp"
#include "core/econometrics.hpp"
#include "core/manifest.hpp"

namespace superspill {

struct StageRecord {
    std::string stage;
    std::string status;  // ok | failed
    long duration_ms = 0;
    long rows_in = 0;
    long rows_out = 0;
    std::string warnings;
};

struct PipelineOutcome {
    std::vector<StageRecord> log;
    int failed_stage = -1;  // index into known_stages(), -1 when clean
    std::string error;

    bool ok() const { return failed_stage < 0; }
};

// Executes manifest stages against the output directory. Stages communicate
// through CSV artifacts, so each can also run standalone provided its inputs
// exist (from the manifest or a previous stage's output).
class PipelineRunner {
  public:
    explicit PipelineRunner(RunManifest manifest);

    // Runs one stage; throws on failure.
    StageRecord run_stage(const std::string& name);

    // Runs every enabled stage in canonical order (optionally filtered),
    // recording per-stage results; the first failure aborts, leaves a FAILED
    // marker and is reported in the outcome rather than thrown.
    PipelineOutcome run(const std::vector<std::string>& only = {});

    const RunManifest& manifest() const { return manifest_; }
    static int stage_index(const std::string& name);

    // Stage artifact file names inside the output directory.
    static constexpr const char* kPanelSim = "panel.csv";
    static constexpr const char* kGroundTruth = "ground_truth.csv";
    static constexpr const char* kGroundTruthParams = "ground_truth_params.csv";
    static constexpr const char* kFlagsTrue = "flags_true.csv";
    static constexpr const char* kSpilloversTrue = "spillovers_true.csv";
    static constexpr const char* kPanelDeflated = "panel_deflated.csv";
    static constexpr const char* kPanelImputed = "panel_imputed.csv";
    static constexpr const char* kImputeReport = "impute_report.csv";
    static constexpr const char* kFlags = "flags.csv";
    static constexpr const char* kEstimates = "estimates.csv";
    static constexpr const char* kPanelTfp = "panel_tfp.csv";
    static constexpr const char* kSpillovers = "spillovers.csv";
    static constexpr const char* kInstruments = "instruments.csv";
    static constexpr const char* kDecomposition = "decomposition.csv";
    static constexpr const char* kDecompositionStatic = "decomposition_static.csv";
    static constexpr const char* kRunLog = "run_log.csv";
    static constexpr const char* kFailedMarker = "FAILED";

  private:
    struct Impl;

    RunManifest manifest_;

    std::string out_path(const std::string& name) const;
    Panel resolve_panel(bool need_tfp) const;
    SuperstarFlags resolve_flags() const;

    StageRecord stage_simulate();
    StageRecord stage_deflate();
    StageRecord stage_impute();
    StageRecord stage_classify();
    StageRecord stage_tfp();
    StageRecord stage_spillovers();
    StageRecord stage_instruments();
    StageRecord stage_regress();
    StageRecord stage_decompose();
};

// Builds the regression frame from the TFP panel, flags, spillover series and
// instruments; exposed for tests and the acceptance suite.
Frame build_regression_frame(const Panel& panel, const SuperstarFlags& flags,
                             const SpilloverSeries& hs, const SpilloverSeries& bs,
                             const SpilloverSeries& fs, const InstrumentSeries& lab,
                             const InstrumentSeries& tarr,
                             const std::map<std::pair<std::string, int>, double>& road);

// Applies sample filter, exposure lagging, interactions and IPW, then runs
// the regression. Returns the kernel result plus the realized spec.
struct RegressionRun {
    RegressionResult result;
    RegressionSpec spec;
};
RegressionRun run_manifest_regression(const ManifestRegression& reg, const Frame& master,
                                      const Panel& panel, const SuperstarFlags& flags);

}  // namespace superspill
