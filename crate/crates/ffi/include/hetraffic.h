#ifndef HETRAFFIC_H
#define HETRAFFIC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes.
 */
typedef enum HtStatus {
  HT_OK = 0,
  /**
   * Null pointer, bad UTF-8 or a too-small output buffer.
   */
  HT_INVALID_ARGUMENT = 1,
  HT_INVALID_PARAMETER = 2,
  HT_CONFIG = 3,
  HT_HYPOTHESIS = 4,
  HT_CAPACITY = 5,
  HT_NUMERIC = 6,
  HT_IO = 7,
  /**
   * `ht_run` with `assert` set found a verdict that differs from its prediction.
   */
  HT_ASSERTION_FAILED = 8,
  HT_PANIC = 9,
} HtStatus;

/**
 * Parsed experiment config.
 */
typedef struct HtConfig HtConfig;

/**
 * Simulation source (shot-noise or regenerative).
 */
typedef struct HtSource HtSource;

/**
 * Predicted regime at one γ.
 */
typedef struct HtRegime {
  double gamma;
  double gamma0;
  double alpha;
  double h;
  /**
   * 0 = FBS, 1 = stable sheet, 2 = Telecom.
   */
  int32_t kind;
} HtRegime;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ht_version(void);

/**
 * Message of the last failed call on this thread (empty after a success).
 * Valid until the next library call on the same thread.
 */
const char *ht_last_error(void);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void ht_string_free(char *s);

/**
 * Builds a source from a model JSON object such as
 * `{"class": "shot-noise", "pulse": {...}}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum HtStatus ht_source_from_json(const char *json, struct HtSource **out);

/**
 * # Safety
 * `src` must come from `ht_source_from_json` and not be freed twice. Null is ignored.
 */
void ht_source_free(struct HtSource *src);

/**
 * Stationary mean of one source.
 *
 * # Safety
 * `src` must be a live handle; `out` must be writable.
 */
enum HtStatus ht_source_mean(const struct HtSource *src, double *out);

/**
 * Predicted regime, normalization and critical γ₀ at `gamma`.
 *
 * # Safety
 * `src` must be a live handle; `out` must be writable.
 */
enum HtStatus ht_source_regime(const struct HtSource *src, double gamma, struct HtRegime *out);

/**
 * Full regime description (limit constants, notes) as JSON.
 *
 * # Safety
 * `src` must be a live handle; `out_json` must be writable.
 */
enum HtStatus ht_source_regime_json(const struct HtSource *src, double gamma, char **out_json);

/**
 * Centered, normalized aggregate `A(x, y)` at a single point for `n_rep`
 * replicates, written to `out[0..n_rep]`.
 *
 * # Safety
 * `src` must be a live handle; `out` must hold `n_rep` doubles.
 */
enum HtStatus ht_aggregate_point(const struct HtSource *src,
                                 double lambda,
                                 double gamma,
                                 double h,
                                 double x,
                                 double y,
                                 uintptr_t n_rep,
                                 uint64_t seed,
                                 double *out);

/**
 * Runs the regime classifier. `budget_json` is a budget object, e.g.
 * `{"lambdas": [64, 128, 256, 512], "n_rep": 1000}`; the report is returned as JSON.
 *
 * # Safety
 * `src` must be a live handle, `budget_json` NUL-terminated, `out_json` writable.
 */
enum HtStatus ht_classify_regime(const struct HtSource *src,
                                 double gamma,
                                 const char *budget_json,
                                 uint64_t seed,
                                 char **out_json);

/**
 * Hill tail-index estimate from the `k` largest of `n` positive samples.
 *
 * # Safety
 * `samples` must hold `n` doubles; `out` must be writable.
 */
enum HtStatus ht_hill_estimate(const double *samples, uintptr_t n, uintptr_t k, double *out);

/**
 * Parses and keeps an experiment config.
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be writable.
 */
enum HtStatus ht_config_from_json(const char *json, struct HtConfig **out);

/**
 * # Safety
 * `cfg` must come from `ht_config_from_json` and not be freed twice. Null is ignored.
 */
void ht_config_free(struct HtConfig *cfg);

/**
 * SHA-256 hex digest of the config as embedded in outputs.
 *
 * # Safety
 * `cfg` must be a live handle; `out_hex` writable.
 */
enum HtStatus ht_config_hash(const struct HtConfig *cfg, char **out_hex);

/**
 * Runs a subcommand (`"simulate"`, `"limit-check"`, ...) and writes its files
 * into `out_dir`. `workers == 0` keeps the config value; `seed_override` is used
 * when `has_seed` is nonzero.
 *
 * # Safety
 * `cfg` must be a live handle and the strings NUL-terminated. `out_dir` may be null.
 */
enum HtStatus ht_run(const struct HtConfig *cfg,
                     const char *subcommand,
                     const char *out_dir,
                     uintptr_t workers,
                     int32_t has_seed,
                     uint64_t seed_override,
                     int32_t assert);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HETRAFFIC_H */
