#ifndef VISCOFLOW_H
#define VISCOFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VfStatus {
  VF_STATUS_OK = 0,
  VF_STATUS_NULL_POINTER = 1,
  VF_STATUS_INVALID_UTF8 = 2,
  VF_STATUS_CONFIG = 3,
  VF_STATUS_DIMENSION_MISMATCH = 4,
  VF_STATUS_HYPOTHESIS = 5,
  VF_STATUS_NUMERICAL = 6,
  VF_STATUS_OUT_OF_RANGE = 7,
  VF_STATUS_BUFFER_TOO_SMALL = 8,
  VF_STATUS_INTERNAL = 9,
} VfStatus;

typedef enum VfStopCause {
  VF_STOP_CAUSE_RESIDUAL_MET = 0,
  VF_STOP_CAUSE_MAX_ITERS = 1,
  VF_STOP_CAUSE_DIVERGED = 2,
  VF_STOP_CAUSE_INNER_SOLVER_FAILURE = 3,
} VfStopCause;

/**
 * A validated experiment built from a JSON config.
 */
typedef struct VfExperiment VfExperiment;

/**
 * The record of one run.
 */
typedef struct VfTrace VfTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into this library from the same thread.
 */
const char *vf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vf_version(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void vf_string_free(char *s);

/**
 * Parses and validates an experiment config.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum VfStatus vf_experiment_from_json(const char *json, struct VfExperiment **out);

/**
 * Loads a bundled scenario by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum VfStatus vf_experiment_from_scenario(const char *name, struct VfExperiment **out);

/**
 * # Safety
 * `exp` must come from this library and not have been freed. NULL is ignored.
 */
void vf_experiment_free(struct VfExperiment *exp);

/**
 * Dimension of the experiment's space.
 *
 * # Safety
 * `exp` must be a live handle; `out` must be writable.
 */
enum VfStatus vf_experiment_dim(const struct VfExperiment *exp, size_t *out);

/**
 * Hex SHA-256 of the canonical config, as an owned string.
 *
 * # Safety
 * `exp` must be a live handle; `out` must be writable.
 */
enum VfStatus vf_experiment_config_sha256(const struct VfExperiment *exp, char **out);

/**
 * Runs the iteration with the config's stop rule. Stopping at the iteration
 * cap, divergence or an inner failure still yields a trace; inspect
 * [`vf_trace_stop_cause`].
 *
 * # Safety
 * `exp` must be a live handle; `out` must be writable.
 */
enum VfStatus vf_experiment_run(const struct VfExperiment *exp, struct VfTrace **out);

/**
 * Limit of the viscosity path `x_t = t f(x_t) + (1-t) T x_t` as `t -> 0`.
 *
 * # Safety
 * `exp` must be a live handle; `buf` must hold `len` doubles.
 */
enum VfStatus vf_experiment_q_map(const struct VfExperiment *exp, double *buf, size_t len);

/**
 * VI report at `x` as an owned JSON string.
 *
 * # Safety
 * `exp` must be a live handle; `x` must hold `len` doubles; `out` must be writable.
 */
enum VfStatus vf_experiment_limit_report_json(const struct VfExperiment *exp,
                                              const double *x,
                                              size_t len,
                                              char **out);

/**
 * # Safety
 * `trace` must come from this library and not have been freed. NULL is ignored.
 */
void vf_trace_free(struct VfTrace *trace);

/**
 * Number of steps taken; iterates are indexed `0..=iterations`.
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum VfStatus vf_trace_iterations(const struct VfTrace *trace, size_t *out);

/**
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum VfStatus vf_trace_dim(const struct VfTrace *trace, size_t *out);

/**
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum VfStatus vf_trace_stop_cause(const struct VfTrace *trace, enum VfStopCause *out);

/**
 * Copies iterate `x_n` into `buf`.
 *
 * # Safety
 * `trace` must be a live handle; `buf` must hold `len` doubles.
 */
enum VfStatus vf_trace_iterate(const struct VfTrace *trace, size_t n, double *buf, size_t len);

/**
 * `|x_{n+1} - x_n|`.
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum VfStatus vf_trace_step_residual(const struct VfTrace *trace, size_t n, double *out);

/**
 * Euclidean projection of `x` onto the set described by `set_json`.
 *
 * # Safety
 * `set_json` must be a NUL-terminated string; `x` and `out` must hold `len` doubles.
 */
enum VfStatus vf_project(const char *set_json, const double *x, double *out, size_t len);

/**
 * Checks the step-size conditions for a schedule given as JSON; writes the report JSON and sets
 * `*violated` to 1 when the overall verdict is violated.
 *
 * # Safety
 * `schedule_json` must be a NUL-terminated string; `out_json` and `violated` must be writable.
 */
enum VfStatus vf_validate_schedule_json(const char *schedule_json,
                                        size_t n_shift,
                                        size_t prefix,
                                        char **out_json,
                                        int32_t *violated);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VISCOFLOW_H */
