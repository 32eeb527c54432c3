#ifndef NEEDLESTEER_H
#define NEEDLESTEER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define NS_PLANNER_ROS 0

#define NS_PLANNER_RCS 1

#define NS_PLANNER_RRT 2

#define NS_TERMINATED_OPEN_EXHAUSTED 0

#define NS_TERMINATED_TIMEOUT 1

/**
 * Result code of every fallible call.
 */
typedef enum NsStatus {
  NS_STATUS_OK = 0,
  NS_STATUS_NULL_POINTER = 1,
  NS_STATUS_INVALID_ARGUMENT = 2,
  NS_STATUS_IO = 3,
  NS_STATUS_PARSE = 4,
  NS_STATUS_OUT_OF_WORKSPACE = 5,
  NS_STATUS_INVALID_START = 6,
  NS_STATUS_UNSATISFIABLE = 7,
  NS_STATUS_TOO_LARGE = 8,
  NS_STATUS_PANIC = 9,
} NsStatus;

typedef struct NsEnvironment NsEnvironment;

typedef struct NsPlan NsPlan;

typedef struct NsProblem NsProblem;

typedef struct NsPlanSummary {
  bool found;
  /**
   * NaN when no plan was found.
   */
  double cost;
  /**
   * NaN when no plan was found.
   */
  double length;
  size_t primitive_count;
  uint64_t nodes_expanded;
  uint64_t nodes_generated;
  /**
   * One of the `NS_TERMINATED_*` constants.
   */
  uint32_t terminated;
  double elapsed_ms;
} NsPlanSummary;

/**
 * Curvature (1/mm), arc length (mm) and axial pre-rotation (rad).
 */
typedef struct NsPrimitive {
  double kappa;
  double delta_ell;
  double delta_theta;
} NsPrimitive;

/**
 * Tip pose: position in mm and unit quaternion `(w, x, y, z)`.
 */
typedef struct NsPose {
  double p[3];
  double q[4];
} NsPose;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *ns_last_error(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a pointer obtained from this library, freed once.
 */
void ns_string_free(char *s);

/**
 * Loads an environment from its JSON manifest.
 *
 * # Safety
 * `manifest_path` must be a NUL-terminated string and `out` writable.
 */
enum NsStatus ns_env_load(const char *manifest_path, struct NsEnvironment **out);

/**
 * # Safety
 * `env` must be null or a handle from this library, freed once.
 */
void ns_env_free(struct NsEnvironment *env);

/**
 * Whether `p` is outside every inflated obstacle and inside the workspace.
 *
 * # Safety
 * `env` must be a live handle; `p` must point to three doubles; `out` writable.
 */
enum NsStatus ns_env_is_free(const struct NsEnvironment *env, const double *p, bool *out);

/**
 * Interpolated cost at `p`.
 *
 * # Safety
 * `env` must be a live handle; `p` must point to three doubles; `out` writable.
 */
enum NsStatus ns_env_point_cost(const struct NsEnvironment *env, const double *p, double *out);

/**
 * Generates an environment and query from a scenario spec JSON document.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string; both out pointers writable.
 */
enum NsStatus ns_generate_scenario(const char *spec_json,
                                   struct NsEnvironment **env_out,
                                   struct NsProblem **problem_out);

/**
 * Builds a query over `env` from a problem JSON document.
 *
 * # Safety
 * `env` must be a live handle, `json` NUL-terminated, `out` writable.
 */
enum NsStatus ns_problem_from_json(const struct NsEnvironment *env,
                                   const char *json,
                                   struct NsProblem **out);

/**
 * Problem JSON document of a query.
 *
 * # Safety
 * `problem` must be a live handle and `out` writable.
 */
enum NsStatus ns_problem_to_json(const struct NsProblem *problem, char **out);

/**
 * # Safety
 * `problem` must be null or a handle from this library, freed once.
 */
void ns_problem_free(struct NsProblem *problem);

/**
 * Runs a planner. `overrides_json` may be null; otherwise it is a JSON
 * object with any of `budget_ms`, `seed`, `threads`, `n_la`, `d_sim`,
 * `alpha`, `eps`, `dl_min`, `dtheta_min`, `dl_max`, `virtual_clock` and
 * `inevitable_check`. A run that finds no plan still succeeds.
 *
 * # Safety
 * `problem` must be a live handle, `overrides_json` null or NUL-terminated,
 * `out` writable.
 */
enum NsStatus ns_plan(const struct NsProblem *problem,
                      uint32_t planner,
                      const char *overrides_json,
                      struct NsPlan **out);

/**
 * # Safety
 * `plan` must be null or a handle from this library, freed once.
 */
void ns_plan_free(struct NsPlan *plan);

/**
 * # Safety
 * `plan` must be a live handle and `out` writable.
 */
enum NsStatus ns_plan_summary(const struct NsPlan *plan, struct NsPlanSummary *out);

/**
 * Primitive `index` of the best plan.
 *
 * # Safety
 * `plan` must be a live handle and `out` writable.
 */
enum NsStatus ns_plan_primitive(const struct NsPlan *plan, size_t index, struct NsPrimitive *out);

/**
 * Full result report as JSON; release with `ns_string_free`.
 *
 * # Safety
 * `plan` must be a live handle and `out` writable.
 */
enum NsStatus ns_plan_to_json(const struct NsPlan *plan, char **out);

/**
 * Pose reached by executing `m` from `x`.
 *
 * # Safety
 * All pointers must be valid; `out` may alias `x`.
 */
enum NsStatus ns_apply_primitive(const struct NsPose *x,
                                 const struct NsPrimitive *m,
                                 struct NsPose *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEEDLESTEER_H */
