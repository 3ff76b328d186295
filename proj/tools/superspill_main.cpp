// Batch CLI for the superspill pipeline. Links the C API only.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>

#include "superspill.h"

namespace {

struct ContextCloser {
    void operator()(ss_context* ctx) const { ss_context_close(ctx); }
};
using ContextPtr = std::unique_ptr<ss_context, ContextCloser>;

struct CommonOpts {
    std::string manifest;
    std::string out;
    int threads = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--manifest", opts.manifest, "Run manifest (JSON)")->required();
    cmd->add_option("--out", opts.out, "Override the manifest's output directory");
    cmd->add_option("--threads", opts.threads, "Intra-stage worker threads");
    cmd->add_option("--seed", opts.seed, "Override the manifest seed")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
}

ContextPtr open_context(const CommonOpts& opts, int& exit_code) {
    ContextPtr ctx(ss_context_open(opts.manifest.c_str()));
    exit_code = 0;
    if (!ctx) {
        std::fprintf(stderr, "error: out of memory\n");
        exit_code = 1;
        return nullptr;
    }
    if (ss_context_status(ctx.get()) != SS_OK) {
        std::fprintf(stderr, "error: %s\n", ss_context_error(ctx.get()));
        exit_code = 1;
        return nullptr;
    }
    if (!opts.out.empty()) ss_context_set_output_dir(ctx.get(), opts.out.c_str());
    if (opts.threads > 0) ss_context_set_threads(ctx.get(), opts.threads);
    if (opts.seed_set) ss_context_set_seed(ctx.get(), opts.seed);
    return ctx;
}

int stage_exit_code(const ss_context* ctx) {
    int idx = ss_context_failed_stage(ctx);
    return idx >= 0 ? 10 + idx : 1;  // stage-indexed exit codes
}

int run_single_stage(const CommonOpts& opts, const char* stage) {
    int code = 0;
    ContextPtr ctx = open_context(opts, code);
    if (!ctx) return code;
    if (ss_context_validate(ctx.get()) != SS_OK) {
        std::fprintf(stderr, "error: %s\n", ss_context_error(ctx.get()));
        return 1;
    }
    if (ss_context_run_stage(ctx.get(), stage) != SS_OK) {
        std::fprintf(stderr, "error [%s]: %s\n", stage, ss_context_error(ctx.get()));
        int idx = ss_context_stage_index(stage);
        return idx >= 0 ? 10 + idx : 1;
    }
    std::printf("%s: done\n", stage);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"superspill - superstar-spillover firm panel pipeline"};
    app.require_subcommand(1);

    CommonOpts opts;

    auto* validate = app.add_subcommand("validate", "Check the manifest and its inputs");
    add_common(validate, opts);

    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic panel with known truth");
    add_common(simulate, opts);

    const char* stage_names[] = {"deflate",     "impute",  "classify", "tfp",
                                 "spillovers",  "instruments", "regress", "decompose"};
    const char* stage_help[] = {
        "Deflate monetary fields by the WPI table",
        "Fill gaps (neighbor average, capital regression)",
        "Flag superstar firms",
        "Estimate production functions and attach TFP columns",
        "Build horizontal/backward/forward spillover series",
        "Construct shift-share instruments and road density",
        "Run the configured fixed-effects OLS/2SLS regressions",
        "Static and dynamic productivity decompositions",
    };
    for (std::size_t i = 0; i < 8; ++i)
        add_common(app.add_subcommand(stage_names[i], stage_help[i]), opts);

    auto* pipeline = app.add_subcommand("pipeline", "Run every enabled stage in order");
    add_common(pipeline, opts);
    std::string only_stages;
    pipeline->add_option("--only-stages", only_stages,
                         "Comma-separated stage filter (subset of the enabled stages)");

    CLI11_PARSE(app, argc, argv);

    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();

    if (name == "validate") {
        int code = 0;
        ContextPtr ctx = open_context(opts, code);
        if (!ctx) return code;
        if (ss_context_validate(ctx.get()) != SS_OK) {
            std::fprintf(stderr, "invalid manifest: %s\n", ss_context_error(ctx.get()));
            return 1;
        }
        std::printf("manifest ok\n");
        return 0;
    }

    if (name == "pipeline") {
        int code = 0;
        ContextPtr ctx = open_context(opts, code);
        if (!ctx) return code;
        if (ss_context_validate(ctx.get()) != SS_OK) {
            std::fprintf(stderr, "invalid manifest: %s\n", ss_context_error(ctx.get()));
            return 1;
        }
        ss_status st = ss_context_run_pipeline(ctx.get(),
                                               only_stages.empty() ? nullptr
                                                                   : only_stages.c_str());
        std::fputs(ss_context_run_log(ctx.get()), stdout);
        if (st != SS_OK) {
            std::fprintf(stderr, "pipeline failed: %s\n", ss_context_error(ctx.get()));
            return stage_exit_code(ctx.get());
        }
        return 0;
    }

    if (name == "simulate") return run_single_stage(opts, "simulate");
    for (const char* stage : stage_names)
        if (name == stage) return run_single_stage(opts, stage);

    std::fprintf(stderr, "unknown subcommand\n");
    return 1;
}
