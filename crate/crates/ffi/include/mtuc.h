#ifndef MTUC_H
#define MTUC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MtucStatus {
  MTUC_STATUS_OK = 0,
  MTUC_STATUS_NULL_POINTER = 1,
  MTUC_STATUS_INVALID_ARGUMENT = 2,
  MTUC_STATUS_INVALID_SCENARIO = 3,
  MTUC_STATUS_DOMAIN = 4,
  MTUC_STATUS_INFEASIBLE = 5,
  MTUC_STATUS_TOO_LARGE = 6,
  MTUC_STATUS_IO = 7,
  MTUC_STATUS_INTERNAL = 8,
  MTUC_STATUS_PANIC = 9,
} MtucStatus;

// Opaque scenario handle together with its precomputed system model.
typedef struct MtucScenario MtucScenario;

// Profit terms of one evaluated decision set.
typedef struct MtucBreakdown {
  double profit;
  double revenue;
  double task_cost;
  double movement_cost;
  double fairness_penalty;
  double fairness_gap_s;
} MtucBreakdown;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message on this thread, or null if none. The pointer stays
// valid until the next failing call on the same thread.
const char *mtuc_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *mtuc_version(void);

// Generate a random scenario with `per_group` devices in each of `groups`
// groups spread over a square of side `area_m` metres (`area_m <= 0` keeps
// the default).
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum MtucStatus mtuc_scenario_generate(size_t groups,
                                       size_t auvs,
                                       size_t per_group,
                                       double area_m,
                                       uint64_t seed,
                                       struct MtucScenario **out);

// Parse a scenario from TOML text.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum MtucStatus mtuc_scenario_from_toml(const char *toml, struct MtucScenario **out);

// Load a scenario file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum MtucStatus mtuc_scenario_load(const char *path, struct MtucScenario **out);

// Release a scenario handle. Null is ignored.
//
// # Safety
// `h` must come from this library and must not be used afterwards.
void mtuc_scenario_free(struct MtucScenario *h);

// Number of groups, AUVs and devices of a scenario. Any out pointer may be null.
//
// # Safety
// `h` must be a live handle; non-null out pointers must be writable.
enum MtucStatus mtuc_scenario_size(const struct MtucScenario *h,
                                   size_t *groups,
                                   size_t *auvs,
                                   size_t *devices);

// Serialize a scenario to TOML. Release the string with [`mtuc_string_free`].
//
// # Safety
// `h` must be a live handle and `out` a valid pointer.
enum MtucStatus mtuc_scenario_to_toml(const struct MtucScenario *h, char **out);

// Content hash of a scenario as lowercase hex. Release with [`mtuc_string_free`].
//
// # Safety
// `h` must be a live handle and `out` a valid pointer.
enum MtucStatus mtuc_scenario_hash(const struct MtucScenario *h, char **out);

// Release a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and must not be used afterwards.
void mtuc_string_free(char *s);

// Evaluate a fixed scheme. `offload` and `cache` take `full`, `none`,
// `random[:p]` or `partial[:share]`; `routing` takes `nearest`, `random`,
// `agnostic` or `aware`. Null `cache` or `routing` selects `full` and
// `agnostic`.
//
// # Safety
// String arguments must be NUL-terminated or null where allowed; `h` must
// be a live handle and `out` a valid pointer.
enum MtucStatus mtuc_scheme_profit(const struct MtucScenario *h,
                                   const char *offload,
                                   const char *cache,
                                   const char *routing,
                                   uint64_t seed,
                                   struct MtucBreakdown *out);

// Exhaustive optimum over a resource lattice of step `grid` (a divisor of
// 1 such as 0.25). Small instances only; larger ones return `TOO_LARGE`.
//
// # Safety
// `h` must be a live handle; `profit` must be valid; `nodes` may be null.
enum MtucStatus mtuc_oracle_profit(const struct MtucScenario *h,
                                   double grid,
                                   double *profit,
                                   uint64_t *nodes);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MTUC_H */
