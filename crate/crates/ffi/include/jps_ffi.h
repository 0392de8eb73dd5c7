#ifndef JPS_FFI_H
#define JPS_FFI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum JpsStatus {
  JPS_STATUS_OK = 0,
  JPS_STATUS_NULL_POINTER = 1,
  JPS_STATUS_INVALID_UTF8 = 2,
  JPS_STATUS_CONFIG = 3,
  JPS_STATUS_SELECTION = 4,
  /**
   * A moment the closed form needs does not exist for this selection.
   */
  JPS_STATUS_DIVERGENT_MOMENT = 5,
  JPS_STATUS_NUMERIC = 6,
  JPS_STATUS_IO = 7,
  JPS_STATUS_PANIC = 8,
} JpsStatus;

/**
 * A generated scenario together with the run configuration that made it.
 */
typedef struct JpsScenario JpsScenario;

/**
 * A validated port selection.
 */
typedef struct JpsSelection JpsSelection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *jps_last_error(void);

/**
 * Generate scenario `index` from configuration text (`section.key = value`
 * lines; an empty string selects the defaults) and `seed`.
 *
 * # Safety
 * `config` must be a NUL-terminated string and `out_scenario` a valid pointer.
 */
enum JpsStatus jps_scenario_new(const char *config,
                                uint64_t seed,
                                size_t index,
                                struct JpsScenario **out_scenario);

/**
 * # Safety
 * `scenario` must come from [`jps_scenario_new`] and not be used afterwards.
 */
void jps_scenario_free(struct JpsScenario *scenario);

/**
 * Number of BSs, antennas per BS and users.
 *
 * # Safety
 * All pointers must be valid.
 */
enum JpsStatus jps_scenario_dims(const struct JpsScenario *scenario,
                                 size_t *n_bs,
                                 size_t *n_antennas,
                                 size_t *n_users);

/**
 * Average port power `β̄_{b,u,m}`.
 *
 * # Safety
 * All pointers must be valid.
 */
enum JpsStatus jps_scenario_port_power(const struct JpsScenario *scenario,
                                       size_t bs,
                                       size_t user,
                                       size_t port,
                                       double *value);

/**
 * GS-JPS selection with the configured budget, `N_rand` and sweep count.
 * `sum_rate` may be null.
 *
 * # Safety
 * `scenario` and `out_selection` must be valid.
 */
enum JpsStatus jps_select_gs(const struct JpsScenario *scenario,
                             struct JpsSelection **out_selection,
                             double *sum_rate);

/**
 * MM-S baseline selection with the configured budget.
 *
 * # Safety
 * `scenario` and `out_selection` must be valid.
 */
enum JpsStatus jps_select_mms(const struct JpsScenario *scenario,
                              struct JpsSelection **out_selection);

/**
 * Parse and validate a selection JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out_selection` valid.
 */
enum JpsStatus jps_selection_from_json(const char *json, struct JpsSelection **out_selection);

/**
 * Serialize a selection; release the string with [`jps_string_free`].
 *
 * # Safety
 * `selection` and `out_json` must be valid.
 */
enum JpsStatus jps_selection_to_json(const struct JpsSelection *selection, char **out_json);

/**
 * # Safety
 * `selection` must come from this library and not be used afterwards.
 */
void jps_selection_free(struct JpsSelection *selection);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void jps_string_free(char *s);

/**
 * Closed-form sum rate at the configured error level. Fails with
 * `DivergentMoment` when a required inverse moment does not exist.
 *
 * # Safety
 * All pointers must be valid.
 */
enum JpsStatus jps_analytic_sum_rate(const struct JpsScenario *scenario,
                                     const struct JpsSelection *selection,
                                     double *sum_rate);

/**
 * Monte Carlo sum rate over `n_real` realizations (0 uses the configured
 * count). `stderr` may be null.
 *
 * # Safety
 * All non-optional pointers must be valid.
 */
enum JpsStatus jps_mc_sum_rate(const struct JpsScenario *scenario,
                               const struct JpsSelection *selection,
                               size_t n_real,
                               double *sum_rate,
                               double *stderr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JPS_FFI_H */
