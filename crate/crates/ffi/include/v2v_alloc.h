#ifndef V2V_ALLOC_H
#define V2V_ALLOC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum V2vScheme {
  V2V_SCHEME_PROPOSED = 0,
  V2V_SCHEME_BASELINE = 1,
} V2vScheme;

typedef enum V2vStatus {
  V2V_STATUS_OK = 0,
  V2V_STATUS_NULL_POINTER = 1,
  V2V_STATUS_INVALID_CONFIG = 2,
  V2V_STATUS_INVALID_INPUT = 3,
  V2V_STATUS_IO = 4,
  V2V_STATUS_UTF8 = 5,
  V2V_STATUS_OUT_OF_RANGE = 6,
  V2V_STATUS_PANIC = 7,
} V2vStatus;

/**
 * Opaque simulation configuration.
 */
typedef struct V2vConfig V2vConfig;

/**
 * Opaque result of one simulation run.
 */
typedef struct V2vRun V2vRun;

/**
 * Per-scheme summary of one run.
 */
typedef struct V2vSummary {
  enum V2vScheme scheme;
  size_t vue_pairs;
  size_t rbs;
  uint64_t seed;
  double satisfaction_pct;
  double outage;
  double sinr_p25_db;
  double sinr_p50_db;
  double sinr_p75_db;
  double mean_swaps_per_zone;
  double mean_zones;
  size_t unconverged_zones;
} V2vSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the last error message on this thread, excluding the
 * terminating NUL. Zero when there is none.
 */
size_t v2v_last_error_length(void);

/**
 * Copies the last error message into `buf` (NUL-terminated, truncated to
 * `len - 1` bytes). Returns the number of bytes written without the NUL.
 *
 * # Safety
 * `buf` must be valid for `len` bytes of writes.
 */
size_t v2v_last_error_message(char *buf, size_t len);

/**
 * A configuration holding the defaults.
 */
struct V2vConfig *v2v_config_new(void);

/**
 * # Safety
 * `cfg` must come from [`v2v_config_new`] and not be used afterwards.
 */
void v2v_config_free(struct V2vConfig *cfg);

/**
 * Sets one configuration key (same names as the command-line flags).
 *
 * # Safety
 * `cfg` must be a live config; `key` and `value` NUL-terminated strings.
 */
enum V2vStatus v2v_config_set(struct V2vConfig *cfg, const char *key, const char *value);

/**
 * Merges a flat TOML file into the configuration.
 *
 * # Safety
 * `cfg` must be a live config; `path` a NUL-terminated string.
 */
enum V2vStatus v2v_config_load_file(struct V2vConfig *cfg, const char *path);

/**
 * # Safety
 * `cfg` must be a live config.
 */
enum V2vStatus v2v_config_validate(const struct V2vConfig *cfg);

/**
 * Runs one simulation. On success `*out` owns a new run handle.
 *
 * # Safety
 * `cfg` must be a live config and `out` valid for one pointer write.
 */
enum V2vStatus v2v_run(const struct V2vConfig *cfg, struct V2vRun **out);

/**
 * # Safety
 * `run` must come from [`v2v_run`] and not be used afterwards.
 */
void v2v_run_free(struct V2vRun *run);

/**
 * Number of summaries (one per evaluated scheme), 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live run.
 */
size_t v2v_run_summary_count(const struct V2vRun *run);

/**
 * Number of zone-formation windows, 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live run.
 */
size_t v2v_run_window_count(const struct V2vRun *run);

/**
 * # Safety
 * `run` must be a live run and `out` valid for one write.
 */
enum V2vStatus v2v_run_summary(const struct V2vRun *run, size_t index, struct V2vSummary *out);

/**
 * Serialises the full run log as JSON. Release the string with
 * [`v2v_string_free`].
 *
 * # Safety
 * `run` must be a live run and `out` valid for one pointer write.
 */
enum V2vStatus v2v_run_to_json(const struct V2vRun *run, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void v2v_string_free(char *s);

/**
 * Runs a (K, N, seed) sweep and writes the result files into `out_dir`.
 *
 * # Safety
 * Array pointers must be valid for their lengths; `out_dir` NUL-terminated.
 */
enum V2vStatus v2v_sweep(const struct V2vConfig *cfg,
                         const size_t *vue_pairs,
                         size_t vue_pairs_len,
                         const size_t *rbs,
                         size_t rbs_len,
                         const uint64_t *seeds,
                         size_t seeds_len,
                         const char *out_dir,
                         bool dump_matrices);

/**
 * Largest-remainder split of `rbs` RBs over `zones` loads into `out_seats`.
 *
 * # Safety
 * `loads` and `out_seats` must be valid for `zones` elements.
 */
enum V2vStatus v2v_hare_niemeyer(const double *loads, size_t zones, size_t rbs, size_t *out_seats);

/**
 * Linear path gain between two points under the default model.
 *
 * # Safety
 * `out_gain` must be valid for one write.
 */
enum V2vStatus v2v_pathloss(double tx_x,
                            double tx_y,
                            double rx_x,
                            double rx_y,
                            bool los,
                            double *out_gain);

/**
 * Fraction of a slot needed to carry `influx` bit/s at `rate` bit/s;
 * infinite when the rate is zero.
 */
double v2v_time_load(double influx, double rate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* V2V_ALLOC_H */
