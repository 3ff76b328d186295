/*
 * superspill - firm-panel spillover analysis toolkit.
 *
 * C interface to the pipeline: opaque handles, integer status codes, and
 * per-handle error messages. The CLI links against this surface only; any
 * language with a C FFI can drive the full pipeline the same way.
 *
 * Conventions:
 *   - Functions returning ss_status report SS_OK (0) on success.
 *   - Error details are fetched from the handle (ss_context_error) or, for
 *     handle-less calls, from ss_last_error() (thread-local).
 *   - Strings returned by the library stay owned by the library and are
 *     valid until the next call on the same handle.
 */

#ifndef SUPERSPILL_H
#define SUPERSPILL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SS_API __declspec(dllexport)
#else
#define SS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ss_status {
    SS_OK = 0,
    SS_ERR_CONFIG = 1,            /* bad manifest / bad arguments */
    SS_ERR_IO = 2,                /* missing or unwritable file */
    SS_ERR_SCHEMA = 3,            /* CSV missing columns or unparsable cell */
    SS_ERR_INTEGRITY = 4,         /* duplicate keys, inconsistent tables */
    SS_ERR_KEY = 5,               /* keyed lookup missing (deflator, tariff) */
    SS_ERR_INSUFFICIENT_DATA = 6, /* below a sample-size threshold */
    SS_ERR_NUMERIC = 7,           /* non-convergence, rank deficiency, separation */
    SS_ERR_DOMAIN = 8,            /* argument outside the mathematical domain */
    SS_ERR_EMPTY_MARKET = 9,      /* truncation removed all probability mass */
    SS_ERR_STAGE = 10,            /* a pipeline stage failed; see failed_stage */
    SS_ERR_UNKNOWN = 99
} ss_status;

/* ------------------------------------------------------------------ */
/* Manifest-driven runs                                                */
/* ------------------------------------------------------------------ */

typedef struct ss_context ss_context;

/* Parse a manifest file. Returns NULL only on allocation failure; parse
 * errors are stored on the returned handle (check ss_context_status). */
SS_API ss_context* ss_context_open(const char* manifest_path);
SS_API ss_context* ss_context_open_json(const char* manifest_json);
SS_API void ss_context_close(ss_context* ctx);

SS_API ss_status ss_context_status(const ss_context* ctx);
SS_API const char* ss_context_error(const ss_context* ctx);

SS_API ss_status ss_context_set_output_dir(ss_context* ctx, const char* dir);
SS_API ss_status ss_context_set_threads(ss_context* ctx, int threads);
SS_API ss_status ss_context_set_seed(ss_context* ctx, uint64_t seed);

/* Structural + input-existence validation of the manifest. */
SS_API ss_status ss_context_validate(ss_context* ctx);

/* Run one stage by name: simulate, deflate, impute, classify, tfp,
 * spillovers, instruments, regress, decompose. */
SS_API ss_status ss_context_run_stage(ss_context* ctx, const char* stage);

/* Run every enabled stage in order. `only` may list a comma-separated subset.
 * On stage failure returns SS_ERR_STAGE; ss_context_failed_stage() gives the
 * stage index and ss_context_error() the message. */
SS_API ss_status ss_context_run_pipeline(ss_context* ctx, const char* only);

SS_API int ss_context_failed_stage(const ss_context* ctx); /* -1 when clean */
SS_API int ss_context_stage_index(const char* stage);      /* -1 when unknown */

/* CSV text of the executed stage log (stage, status, duration, rows, ...). */
SS_API const char* ss_context_run_log(const ss_context* ctx);

/* ------------------------------------------------------------------ */
/* Panel handles                                                       */
/* ------------------------------------------------------------------ */

typedef struct ss_panel ss_panel;

SS_API ss_status ss_panel_load(const char* csv_path, ss_panel** out);
SS_API ss_status ss_panel_write(const ss_panel* panel, const char* csv_path);
SS_API size_t ss_panel_rows(const ss_panel* panel);
SS_API void ss_panel_free(ss_panel* panel);

/* Thread-local message for the last failing handle-less call. */
SS_API const char* ss_last_error(void);

/* ------------------------------------------------------------------ */
/* Theory-model evaluators                                             */
/* ------------------------------------------------------------------ */

typedef struct ss_model_params {
    double rho;   /* CES substitution parameter, in (0,1) */
    double theta; /* aggregate demand shifter, > 0 */
    double w;     /* input price, > 0 */
    double f;     /* fixed production cost, >= 0 */
    double f_e;   /* entry sunk cost, >= 0 */
    double delta; /* exit-shock probability, in (0,1] */
    double alpha; /* horizontal spillover elasticity */
    double tau;   /* backward spillover elasticity */
    double psi;   /* forward spillover elasticity */
    double c;     /* firm-characteristics scale, > 0 */
    /* capability distribution: 0 = lognormal(a=mu, b=sigma),
     * 1 = pareto(a=xmin, b=shape) */
    int dist_kind;
    double dist_a;
    double dist_b;
} ss_model_params;

/* Channel selector for the marginal-effect evaluator. */
typedef enum ss_channel { SS_CHANNEL_H = 0, SS_CHANNEL_B = 1, SS_CHANNEL_F = 2 } ss_channel;

SS_API ss_status ss_model_profit(const ss_model_params* params, double lambda, double hspill,
                                 double bspill, double fspill, double* out);
SS_API ss_status ss_model_cutoff(const ss_model_params* params, double hspill, double bspill,
                                 double fspill, double* out);
SS_API ss_status ss_model_expected_log_productivity(const ss_model_params* params, double hspill,
                                                    double bspill, double fspill, double* out);
SS_API ss_status ss_model_marginal_effect(const ss_model_params* params, double hspill,
                                          double bspill, double fspill, ss_channel channel,
                                          double* direct, double* indirect, double* total);

#ifdef __cplusplus
}
#endif

#endif /* SUPERSPILL_H */
