#ifndef POMDP_VOI_H
#define POMDP_VOI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  PV_SOLVER_PERSEUS = 0,
  PV_SOLVER_PBVI = 1,
  PV_SOLVER_GAP = 2,
} PvSolver;

typedef enum {
  PV_STATUS_OK = 0,
  PV_STATUS_NULL_POINTER = 1,
  PV_STATUS_INVALID_MODEL = 2,
  PV_STATUS_PARSE = 3,
  PV_STATUS_CONFIG = 4,
  PV_STATUS_INCOMPATIBLE_SETTINGS = 5,
  PV_STATUS_CONTRACT = 6,
  PV_STATUS_IO = 7,
  PV_STATUS_BUFFER_TOO_SMALL = 8,
  PV_STATUS_PANIC = 9,
  PV_STATUS_OTHER = 10,
} PvStatus;

typedef enum {
  PV_METRIC_VOI = 0,
  PV_METRIC_VOPI = 1,
  PV_METRIC_RVOCI = 2,
} PvMetric;

/**
 * Opaque model handle.
 */
typedef struct PvModel PvModel;

/**
 * Opaque solved-bounds handle.
 */
typedef struct PvSolution PvSolution;

/**
 * Solver settings; start from `pv_solver_options_default`.
 */
typedef struct {
  PvSolver solver;
  double epsilon;
  /**
   * Wall-clock budget in seconds; zero or negative means unlimited.
   */
  double max_seconds;
  uintptr_t max_iterations;
  uint64_t seed;
} PvSolverOptions;

/**
 * A metric value and its error budget.
 */
typedef struct {
  double value;
  double uncertainty;
} PvEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pv_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t pv_last_error(char *buf, uintptr_t len);

PvSolverOptions pv_solver_options_default(void);

/**
 * Parses a TOML model document.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be a valid pointer.
 */
PvStatus pv_model_parse(const char *text, PvModel **out);

/**
 * Loads a TOML model file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
PvStatus pv_model_load(const char *path, PvModel **out);

/**
 * Built-in three-component system; `setting` is 1 (optional inspection) or 2 (permanent monitoring).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
PvStatus pv_model_three_component(double p,
                                  uint8_t setting,
                                  PvModel **out);

/**
 * Derived setting: the observation action `a_o` made permanent and costless.
 *
 * # Safety
 * `model` must be a live handle; `out` must be a valid pointer.
 */
PvStatus pv_model_make_perm(const PvModel *model, uintptr_t a_o, PvModel **out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void pv_model_free(PvModel *model);

/**
 * Number of states, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t pv_model_n_states(const PvModel *model);

/**
 * Number of available joint actions, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t pv_model_n_actions(const PvModel *model);

/**
 * Solves from `belief` (length `len`), or from the model's initial belief when
 * `belief` is null. A budget-exhausted run still succeeds; check `pv_solution_converged`.
 *
 * # Safety
 * `model` must be a live handle, `options` valid, `belief` null or `len` readable doubles.
 */
PvStatus pv_solve(const PvModel *model,
                  const PvSolverOptions *options,
                  const double *belief,
                  uintptr_t len,
                  PvSolution **out);

/**
 * # Safety
 * `solution` must be null or a handle not yet freed.
 */
void pv_solution_free(PvSolution *solution);

/**
 * Lower bound at the solve root (NaN for a null handle).
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
double pv_solution_lower(const PvSolution *solution);

/**
 * Upper bound at the solve root (NaN for a null handle).
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
double pv_solution_upper(const PvSolution *solution);

/**
 * Whether the solver met its tolerance (false for a null handle).
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
bool pv_solution_converged(const PvSolution *solution);

/**
 * Lower-bound value and greedy joint action at an arbitrary belief.
 *
 * # Safety
 * `solution` must be a live handle; `belief` must hold `len` doubles; the
 * output pointers must be valid (any may be null to skip).
 */
PvStatus pv_solution_query(const PvSolution *solution,
                           const double *belief,
                           uintptr_t len,
                           double *value,
                           uintptr_t *maintenance,
                           uintptr_t *observation);

/**
 * Life-cycle metric of one model at its initial belief. `a_o` is used by `Rvoci` only.
 *
 * # Safety
 * `model` must be a live handle; `options` and `out` valid pointers.
 */
PvStatus pv_metric(const PvModel *model,
                   PvMetric metric,
                   uintptr_t a_o,
                   const PvSolverOptions *options,
                   PvEstimate *out);

/**
 * Value of permanent monitoring: `permanent` against `optional` at the optional model's initial belief.
 *
 * # Safety
 * Both models must be live handles; `options` and `out` valid pointers.
 */
PvStatus pv_voshm(const PvModel *optional,
                  const PvModel *permanent,
                  const PvSolverOptions *options,
                  PvEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POMDP_VOI_H */
