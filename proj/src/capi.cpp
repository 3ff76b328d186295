#include "superspill.h"

#include <cstring>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>

#include "core/errors.hpp"
#include "core/model.hpp"
#include "core/pipeline.hpp"

using namespace superspill;

namespace {

thread_local std::string g_last_error;

ss_status status_of(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return SS_ERR_CONFIG;
    if (dynamic_cast<const IoError*>(&e)) return SS_ERR_IO;
    if (dynamic_cast<const SchemaError*>(&e)) return SS_ERR_SCHEMA;
    if (dynamic_cast<const IntegrityError*>(&e)) return SS_ERR_INTEGRITY;
    if (dynamic_cast<const KeyError*>(&e)) return SS_ERR_KEY;
    if (dynamic_cast<const InsufficientDataError*>(&e)) return SS_ERR_INSUFFICIENT_DATA;
    if (dynamic_cast<const NumericError*>(&e)) return SS_ERR_NUMERIC;
    if (dynamic_cast<const DomainError*>(&e)) return SS_ERR_DOMAIN;
    if (dynamic_cast<const EmptyMarketError*>(&e)) return SS_ERR_EMPTY_MARKET;
    return SS_ERR_UNKNOWN;
}

ModelParams to_params(const ss_model_params* p) {
    ModelParams m;
    m.rho = p->rho;
    m.theta = p->theta;
    m.w = p->w;
    m.f = p->f;
    m.f_e = p->f_e;
    m.delta = p->delta;
    m.alpha = p->alpha;
    m.tau = p->tau;
    m.psi = p->psi;
    m.c = p->c;
    if (p->dist_kind == 0) m.capability_dist = LogNormalDist{p->dist_a, p->dist_b};
    else if (p->dist_kind == 1) m.capability_dist = ParetoDist{p->dist_a, p->dist_b};
    else throw ConfigError("dist_kind must be 0 (lognormal) or 1 (pareto)");
    m.validate();
    return m;
}

template <typename F>
ss_status guarded(F&& fn) {
    try {
        fn();
        return SS_OK;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return status_of(e);
    }
}

}  // namespace

struct ss_context {
    std::unique_ptr<RunManifest> manifest;
    ss_status status = SS_OK;
    std::string error;
    int failed_stage = -1;
    std::string run_log;

    void fail(const std::exception& e) {
        status = status_of(e);
        error = e.what();
    }
    void clear() {
        status = SS_OK;
        error.clear();
    }
};

struct ss_panel {
    Panel panel;
};

extern "C" {

SS_API ss_context* ss_context_open(const char* manifest_path) {
    auto* ctx = new (std::nothrow) ss_context;
    if (!ctx) return nullptr;
    try {
        ctx->manifest = std::make_unique<RunManifest>(parse_manifest_file(manifest_path));
    } catch (const std::exception& e) {
        ctx->fail(e);
    }
    return ctx;
}

SS_API ss_context* ss_context_open_json(const char* manifest_json) {
    auto* ctx = new (std::nothrow) ss_context;
    if (!ctx) return nullptr;
    try {
        ctx->manifest = std::make_unique<RunManifest>(parse_manifest_json(manifest_json));
    } catch (const std::exception& e) {
        ctx->fail(e);
    }
    return ctx;
}

SS_API void ss_context_close(ss_context* ctx) { delete ctx; }

SS_API ss_status ss_context_status(const ss_context* ctx) {
    return ctx ? ctx->status : SS_ERR_CONFIG;
}

SS_API const char* ss_context_error(const ss_context* ctx) {
    return ctx ? ctx->error.c_str() : "null context";
}

SS_API ss_status ss_context_set_output_dir(ss_context* ctx, const char* dir) {
    if (!ctx || !ctx->manifest || !dir) return SS_ERR_CONFIG;
    // Anchor to the caller's cwd so the manifest's source dir does not apply.
    ctx->manifest->output_dir = std::filesystem::absolute(dir).string();
    return SS_OK;
}

SS_API ss_status ss_context_set_threads(ss_context* ctx, int threads) {
    if (!ctx || !ctx->manifest || threads < 1) return SS_ERR_CONFIG;
    ctx->manifest->threads = threads;
    return SS_OK;
}

SS_API ss_status ss_context_set_seed(ss_context* ctx, uint64_t seed) {
    if (!ctx || !ctx->manifest) return SS_ERR_CONFIG;
    ctx->manifest->seed = seed;
    ctx->manifest->seed_set = true;
    return SS_OK;
}

SS_API ss_status ss_context_validate(ss_context* ctx) {
    if (!ctx) return SS_ERR_CONFIG;
    if (!ctx->manifest) return ctx->status;
    ctx->clear();
    try {
        validate_manifest(*ctx->manifest);
    } catch (const std::exception& e) {
        ctx->fail(e);
    }
    return ctx->status;
}

SS_API ss_status ss_context_run_stage(ss_context* ctx, const char* stage) {
    if (!ctx || !stage) return SS_ERR_CONFIG;
    if (!ctx->manifest) return ctx->status;
    ctx->clear();
    try {
        PipelineRunner runner(*ctx->manifest);
        runner.run_stage(stage);
    } catch (const std::exception& e) {
        ctx->fail(e);
    }
    return ctx->status;
}

SS_API ss_status ss_context_run_pipeline(ss_context* ctx, const char* only) {
    if (!ctx) return SS_ERR_CONFIG;
    if (!ctx->manifest) return ctx->status;
    ctx->clear();
    ctx->failed_stage = -1;
    try {
        std::vector<std::string> filter;
        if (only && *only) {
            std::stringstream ss(only);
            std::string item;
            while (std::getline(ss, item, ','))
                if (!item.empty()) filter.push_back(item);
        }
        PipelineRunner runner(*ctx->manifest);
        PipelineOutcome outcome = runner.run(filter);
        std::ostringstream log;
        log << "stage,status,duration_ms,rows_in,rows_out,warnings\n";
        for (const auto& r : outcome.log)
            log << r.stage << "," << r.status << "," << r.duration_ms << "," << r.rows_in << ","
                << r.rows_out << "," << r.warnings << "\n";
        ctx->run_log = log.str();
        if (!outcome.ok()) {
            ctx->status = SS_ERR_STAGE;
            ctx->error = outcome.error;
            ctx->failed_stage = outcome.failed_stage;
        }
    } catch (const std::exception& e) {
        ctx->fail(e);
    }
    return ctx->status;
}

SS_API int ss_context_failed_stage(const ss_context* ctx) {
    return ctx ? ctx->failed_stage : -1;
}

SS_API int ss_context_stage_index(const char* stage) {
    if (!stage) return -1;
    try {
        return PipelineRunner::stage_index(stage);
    } catch (const std::exception&) {
        return -1;
    }
}

SS_API const char* ss_context_run_log(const ss_context* ctx) {
    return ctx ? ctx->run_log.c_str() : "";
}

SS_API ss_status ss_panel_load(const char* csv_path, ss_panel** out) {
    if (!csv_path || !out) return SS_ERR_CONFIG;
    *out = nullptr;
    return guarded([&]() {
        auto p = std::make_unique<ss_panel>();
        p->panel = load_panel(csv_path);
        *out = p.release();
    });
}

SS_API ss_status ss_panel_write(const ss_panel* panel, const char* csv_path) {
    if (!panel || !csv_path) return SS_ERR_CONFIG;
    return guarded([&]() { write_panel(panel->panel, csv_path); });
}

SS_API size_t ss_panel_rows(const ss_panel* panel) { return panel ? panel->panel.size() : 0; }

SS_API void ss_panel_free(ss_panel* panel) { delete panel; }

SS_API const char* ss_last_error(void) { return g_last_error.c_str(); }

SS_API ss_status ss_model_profit(const ss_model_params* params, double lambda, double hspill,
                                 double bspill, double fspill, double* out) {
    if (!params || !out) return SS_ERR_CONFIG;
    return guarded([&]() {
        *out = optimal_profit(lambda, SpillExposure{hspill, bspill, fspill}, to_params(params));
    });
}

SS_API ss_status ss_model_cutoff(const ss_model_params* params, double hspill, double bspill,
                                 double fspill, double* out) {
    if (!params || !out) return SS_ERR_CONFIG;
    return guarded([&]() {
        *out = cutoff_capability(SpillExposure{hspill, bspill, fspill}, to_params(params));
    });
}

SS_API ss_status ss_model_expected_log_productivity(const ss_model_params* params, double hspill,
                                                    double bspill, double fspill, double* out) {
    if (!params || !out) return SS_ERR_CONFIG;
    return guarded([&]() {
        *out = expected_log_productivity(SpillExposure{hspill, bspill, fspill},
                                         to_params(params));
    });
}

SS_API ss_status ss_model_marginal_effect(const ss_model_params* params, double hspill,
                                          double bspill, double fspill, ss_channel channel,
                                          double* direct, double* indirect, double* total) {
    if (!params || !direct || !indirect || !total) return SS_ERR_CONFIG;
    return guarded([&]() {
        SpillChannel ch = channel == SS_CHANNEL_H   ? SpillChannel::H
                          : channel == SS_CHANNEL_B ? SpillChannel::B
                                                    : SpillChannel::F;
        MarginalEffect m = spillover_marginal_effect(SpillExposure{hspill, bspill, fspill},
                                                     to_params(params), ch);
        *direct = m.direct;
        *indirect = m.indirect;
        *total = m.total;
    });
}

}  // extern "C"
