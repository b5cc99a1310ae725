/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef KAWAHARA_H
#define KAWAHARA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call. `Ok` is zero.
typedef enum KwStatus {
  KW_STATUS_OK = 0,
  KW_STATUS_NULL_POINTER = 1,
  KW_STATUS_INVALID_UTF8 = 2,
  KW_STATUS_PARAMETER_OUT_OF_RANGE = 3,
  KW_STATUS_GRID_TOO_COARSE = 4,
  KW_STATUS_EIG_SOLVE_FAILURE = 5,
  KW_STATUS_DIMENSION_MISMATCH = 6,
  KW_STATUS_TAIL_TOO_FAT = 7,
  KW_STATUS_MODE_MISMATCH = 8,
  KW_STATUS_LINEAR_SOLVE_FAILURE = 9,
  KW_STATUS_BLOWUP_DETECTED = 10,
  KW_STATUS_NONPOSITIVE_D = 11,
  KW_STATUS_DOMAIN_ERROR = 12,
  KW_STATUS_SERIES_TOO_SHORT = 13,
  KW_STATUS_ALL_ZERO_SERIES = 14,
  KW_STATUS_PARSE = 15,
  KW_STATUS_UNKNOWN_KEY = 16,
  KW_STATUS_MISSING_REQUIRED = 17,
  KW_STATUS_IO = 18,
  // The kernel failed a hypothesis check or the small-data condition fails.
  KW_STATUS_VALIDATION_FAILED = 19,
  KW_STATUS_BUFFER_TOO_SMALL = 20,
  KW_STATUS_PANIC = 99,
} KwStatus;

// Parsed run configuration.
typedef struct KwConfig KwConfig;

// Memory kernel g.
typedef struct KwKernel KwKernel;

// A stepping simulation.
typedef struct KwSimulation KwSimulation;

// Small-data condition verdict.
typedef struct KwCondition {
  bool holds;
  double lhs;
  double rhs;
  double margin;
  double state_norm;
} KwCondition;

// One row of the energy series. `f` is NaN when the Lyapunov functional is
// not available (always the case for records read off a simulation handle).
typedef struct KwEnergyRecord {
  double t;
  double e;
  double f;
  double u_norm;
  double eta_norm_lg;
  double boundary_diss;
  double memory_diss;
  double nonlinear_leak;
  double uxx0;
} KwEnergyRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message, NUL-terminated, into
// `buf` (truncating to `len − 1` bytes). Returns the full message length in
// bytes, excluding the terminator; pass `buf = NULL` to query it.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t kw_last_error_message(char *buf, size_t len);

// Static, NUL-terminated name of a status code.
const char *kw_status_name(enum KwStatus status);

// Parses `key = value` configuration text.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be valid for a write.
enum KwStatus kw_config_parse(const char *text, struct KwConfig **out);

// Configuration of a named preset (`expo`, `poly`, `stretched`).
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be valid for a write.
enum KwStatus kw_config_preset(const char *name, struct KwConfig **out);

// Overrides one key, as a `key = value` line would.
//
// # Safety
// `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
enum KwStatus kw_config_set(struct KwConfig *cfg, const char *key, const char *value);

// Writes the fully resolved configuration text into `buf`, NUL-terminated.
// `*written` receives the text length excluding the terminator, also when
// the buffer is too small.
//
// # Safety
// `cfg` must be a live handle; `buf` null or valid for `len` bytes;
// `written` valid for a write.
enum KwStatus kw_config_emit(const struct KwConfig *cfg, char *buf, size_t len, size_t *written);

// Evaluates the small-data condition for the configured initial state.
// Returns [`KwStatus::ValidationFailed`] (with `out` filled) when it fails.
//
// # Safety
// `cfg` must be a live handle; `out` valid for a write.
enum KwStatus kw_config_check_condition(const struct KwConfig *cfg, struct KwCondition *out);

// Runs the configuration to completion and writes `series.csv`,
// `summary.txt` and `config.resolved` into `dir`. A run that stops early
// still writes its partial series and returns the stopping error.
//
// # Safety
// `cfg` must be a live handle; `dir` a NUL-terminated path.
enum KwStatus kw_config_run(const struct KwConfig *cfg, const char *dir);

// # Safety
// `cfg` must be null or a handle not yet freed.
void kw_config_free(struct KwConfig *cfg);

// Builds the memory kernel described by `cfg`.
//
// # Safety
// `cfg` must be a live handle; `out` valid for a write.
enum KwStatus kw_kernel_from_config(const struct KwConfig *cfg, struct KwKernel **out);

// Tabulated kernel from `len` samples (monotone cubic interpolation).
//
// # Safety
// `s` and `g` must be valid for `len` reads; `out` valid for a write.
enum KwStatus kw_kernel_tabulated(const double *s,
                                  const double *g,
                                  size_t len,
                                  struct KwKernel **out);

// g(s), g′(s) and ξ(s); any output pointer may be null.
//
// # Safety
// `kernel` must be a live handle; non-null outputs valid for a write.
enum KwStatus kw_kernel_eval(const struct KwKernel *kernel,
                             double s,
                             double *g,
                             double *dg,
                             double *xi);

// g₀ = ∫₀^∞ g(s) ds.
//
// # Safety
// `kernel` must be a live handle.
double kw_kernel_g0(const struct KwKernel *kernel);

// Samples the kernel hypotheses on `samples` points of [0, s_max]. Returns
// [`KwStatus::ValidationFailed`] naming the first failing check.
//
// # Safety
// `kernel` must be a live handle.
enum KwStatus kw_kernel_validate(const struct KwKernel *kernel, double s_max, size_t samples);

// # Safety
// `kernel` must be null or a handle not yet freed.
void kw_kernel_free(struct KwKernel *kernel);

// Sets up a simulation at t = 0 from `cfg`.
//
// # Safety
// `cfg` must be a live handle; `out` valid for a write.
enum KwStatus kw_simulation_new(const struct KwConfig *cfg, struct KwSimulation **out);

// Advances `steps` time steps. On failure the state stays at the last
// successful step.
//
// # Safety
// `sim` must be a live handle.
enum KwStatus kw_simulation_step(struct KwSimulation *sim, size_t steps);

// Energy record of the current state (`f` and `nonlinear_leak` are NaN).
//
// # Safety
// `sim` must be a live handle; `out` valid for a write.
enum KwStatus kw_simulation_record(const struct KwSimulation *sim, struct KwEnergyRecord *out);

// Number of interior nodes N.
//
// # Safety
// `sim` must be a live handle.
size_t kw_simulation_nodes(const struct KwSimulation *sim);

// Current time t.
//
// # Safety
// `sim` must be a live handle.
double kw_simulation_time(const struct KwSimulation *sim);

// Copies u at the N interior nodes into `buf`.
//
// # Safety
// `sim` must be a live handle; `buf` valid for `len` writes.
enum KwStatus kw_simulation_copy_u(const struct KwSimulation *sim, double *buf, size_t len);

// # Safety
// `sim` must be null or a handle not yet freed.
void kw_simulation_free(struct KwSimulation *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KAWAHARA_H */
