/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef TANGENT_MBD_H
#define TANGENT_MBD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TmbdStatus {
  TMBD_STATUS_OK = 0,
  TMBD_STATUS_NULL_POINTER = 1,
  TMBD_STATUS_INVALID_ARGUMENT = 2,
  TMBD_STATUS_CONFIG = 3,
  TMBD_STATUS_MODEL = 4,
  TMBD_STATUS_STEP_FAILED = 5,
  TMBD_STATUS_IO = 6,
  TMBD_STATUS_BUFFER_TOO_SMALL = 7,
  TMBD_STATUS_OUT_OF_RANGE = 8,
  TMBD_STATUS_PANIC = 9,
} TmbdStatus;

typedef enum TmbdMethod {
  TMBD_METHOD_TANGENT_NEWMARK = 0,
  TMBD_METHOD_CLASSICAL_INDEX3 = 1,
  TMBD_METHOD_CENTRAL_DIFFERENCE = 2,
  TMBD_METHOD_NEWMARK_MINIMAL = 3,
} TmbdMethod;

/*
 A built scenario: model, initial state and defaults.
 */
typedef struct TmbdScenario TmbdScenario;

/*
 The records of one integration run.
 */
typedef struct TmbdTrajectory TmbdTrajectory;

/*
 Integration settings. Fill with [`tmbd_run_options_default`] and adjust.
 */
typedef struct TmbdRunOptions {
  /*
   A `TmbdMethod` value.
   */
  uint32_t method;
  double alpha;
  double beta;
  double dt;
  double t_end;
  double tol;
  double tol_c;
  uint32_t max_iters;
  bool record_omega;
} TmbdRunOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. The pointer is
 valid until the next call into this library on the same thread.
 */
const char *tmbd_last_error_message(void);

/*
 Library version as a static string.
 */
const char *tmbd_version(void);

/*
 `(1/ω) √(1/(α/2 − β))`, infinity when unconditionally stable.
 */
double tmbd_newmark_dt_limit(double omega_max, double alpha, double beta);

/*
 Builds a named scenario with `n_overrides` parameter overrides given as
 parallel arrays of keys and values.

 # Safety
 `name` and each of the `n_overrides` keys must be NUL-terminated strings;
 `keys` and `values` must hold `n_overrides` entries; `out` must be writable.
 */
enum TmbdStatus tmbd_scenario_new(const char *name,
                                  const char *const *keys,
                                  const double *values,
                                  size_t n_overrides,
                                  struct TmbdScenario **out);

/*
 # Safety
 `sc` must come from [`tmbd_scenario_new`] and not be freed already; null is ignored.
 */
void tmbd_scenario_free(struct TmbdScenario *sc);

/*
 Coordinate and constraint counts; minimal scenarios report zero constraints.

 # Safety
 `sc` must be a live scenario handle; the outputs may be null.
 */
enum TmbdStatus tmbd_scenario_dims(const struct TmbdScenario *sc,
                                   size_t *n_coords,
                                   size_t *n_constraints);

/*
 Scenario defaults for method, Newmark parameters, step and horizon.

 # Safety
 `sc` must be a live scenario handle and `out` writable.
 */
enum TmbdStatus tmbd_run_options_default(const struct TmbdScenario *sc, struct TmbdRunOptions *out);

/*
 Largest natural frequency at the scenario's initial state.

 # Safety
 `sc` must be a live scenario handle and `out` writable.
 */
enum TmbdStatus tmbd_scenario_omega_max(const struct TmbdScenario *sc, double *out);

/*
 Integrates the scenario. A run that diverges still returns `Ok` with a
 trajectory; query it with [`tmbd_trajectory_diverged`].

 # Safety
 `sc` must be a live scenario handle, `opts` readable and `out` writable.
 */
enum TmbdStatus tmbd_scenario_run(const struct TmbdScenario *sc,
                                  const struct TmbdRunOptions *opts,
                                  struct TmbdTrajectory **out);

/*
 # Safety
 `tr` must come from [`tmbd_scenario_run`] and not be freed already; null is ignored.
 */
void tmbd_trajectory_free(struct TmbdTrajectory *tr);

/*
 Number of records, the initial state included. Zero for null.

 # Safety
 `tr` must be null or a live trajectory handle.
 */
size_t tmbd_trajectory_len(const struct TmbdTrajectory *tr);

/*
 Whether the run stopped early. False for null.

 # Safety
 `tr` must be null or a live trajectory handle.
 */
bool tmbd_trajectory_diverged(const struct TmbdTrajectory *tr);

/*
 Scalars of record `index`: time, energy, the three constraint residual
 norms and the iteration count. Any output may be null.

 # Safety
 `tr` must be a live trajectory handle; non-null outputs must be writable.
 */
enum TmbdStatus tmbd_trajectory_record(const struct TmbdTrajectory *tr,
                                       size_t index,
                                       double *t,
                                       double *energy,
                                       double *norms,
                                       uint32_t *iterations);

/*
 Copies one vector of record `index`: 0 = x, 1 = ẋ, 2 = ẍ, 3 = λ. With a
 null `dst` only the length is reported through `len`.

 # Safety
 `tr` must be a live trajectory handle; `dst` must be null or hold `cap`
 doubles; `len` must be null or writable.
 */
enum TmbdStatus tmbd_trajectory_vector(const struct TmbdTrajectory *tr,
                                       size_t index,
                                       uint32_t which,
                                       double *dst,
                                       size_t cap,
                                       size_t *len);

/*
 Writes the trajectory as CSV to `path`.

 # Safety
 `tr` must be a live trajectory handle and `path` a NUL-terminated string.
 */
enum TmbdStatus tmbd_trajectory_write_csv(const struct TmbdTrajectory *tr, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TANGENT_MBD_H */
