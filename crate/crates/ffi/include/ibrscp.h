#ifndef IBRSCP_H
#define IBRSCP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Guidance law bits for [`ibrscp_verify`].
 */
#define IBRSCP_LAW_PN 1

#define IBRSCP_LAW_APN 2

/**
 * Result codes. `Validation` and `Numerical` match the CLI exit codes.
 */
typedef enum IbrStatus {
  IBR_STATUS_OK = 0,
  IBR_STATUS_NULL_POINTER = 1,
  IBR_STATUS_VALIDATION = 2,
  IBR_STATUS_NUMERICAL = 3,
  IBR_STATUS_INVALID_UTF8 = 4,
  IBR_STATUS_OUT_OF_RANGE = 5,
  IBR_STATUS_PANIC = 6,
} IbrStatus;

/**
 * A run directory with its summary and recorded evaders loaded.
 */
typedef struct IbrRun IbrRun;

/**
 * A parsed, validated scenario.
 */
typedef struct IbrScenario IbrScenario;

typedef struct IbrRecordedInfo {
  /**
   * Round at which the evader was recorded.
   */
  size_t iteration;
  /**
   * Round that produced the trajectory.
   */
  size_t source_iteration;
  double final_time;
  double terminal_speed;
  size_t nodes;
} IbrRecordedInfo;

/**
 * One trajectory node in physical units (ft, ft/s, ft/s^2).
 */
typedef struct IbrNode {
  double t;
  double position[3];
  double velocity[3];
  double input[3];
} IbrNode;

typedef struct IbrVerifyInfo {
  /**
   * Engagements simulated (recorded evaders times modes).
   */
  size_t runs;
  /**
   * Pursuer instances that intercepted, summed over runs.
   */
  size_t intercepts;
  /**
   * True when every run ended with the evader reaching the asset.
   */
  bool all_reach_asset;
} IbrVerifyInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call on this thread.
 */
const char *ibrscp_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ibrscp_version(void);

/**
 * Parses and validates a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IbrStatus ibrscp_scenario_load(const char *path, struct IbrScenario **out_scenario);

/**
 * # Safety
 * `scenario` must come from [`ibrscp_scenario_load`] or be null.
 */
void ibrscp_scenario_free(struct IbrScenario *scenario);

/**
 * # Safety
 * Pointers must be valid.
 */
enum IbrStatus ibrscp_scenario_pursuer_count(const struct IbrScenario *scenario, size_t *count);

/**
 * Overrides the round and SCP iteration counts; zero keeps the current value.
 *
 * # Safety
 * `scenario` must be a valid handle.
 */
enum IbrStatus ibrscp_scenario_set_iterations(struct IbrScenario *scenario,
                                              size_t ibr_iterations,
                                              size_t scp_iterations);

/**
 * Runs the game into `out_dir`, resuming a compatible partial run there.
 *
 * # Safety
 * `scenario` must be a valid handle, `out_dir` a NUL-terminated string and
 * `out_run` a valid pointer.
 */
enum IbrStatus ibrscp_solve(const struct IbrScenario *scenario,
                            const char *out_dir,
                            struct IbrRun **out_run);

/**
 * Opens an existing run directory.
 *
 * # Safety
 * `dir` must be a NUL-terminated string and `out_run` a valid pointer.
 */
enum IbrStatus ibrscp_run_open(const char *dir, struct IbrRun **out_run);

/**
 * # Safety
 * `run` must come from [`ibrscp_solve`] or [`ibrscp_run_open`], or be null.
 */
void ibrscp_run_free(struct IbrRun *run);

/**
 * # Safety
 * Pointers must be valid.
 */
enum IbrStatus ibrscp_run_iterations(const struct IbrRun *run, size_t *count);

/**
 * # Safety
 * Pointers must be valid.
 */
enum IbrStatus ibrscp_run_recorded_count(const struct IbrRun *run, size_t *count);

/**
 * # Safety
 * Pointers must be valid.
 */
enum IbrStatus ibrscp_run_recorded_info(const struct IbrRun *run,
                                        size_t index,
                                        struct IbrRecordedInfo *info);

/**
 * Copies up to `capacity` nodes of a recorded evader into `nodes` and
 * stores the number copied in `written`.
 *
 * # Safety
 * `nodes` must point to at least `capacity` elements; other pointers valid.
 */
enum IbrStatus ibrscp_run_recorded_nodes(const struct IbrRun *run,
                                         size_t index,
                                         struct IbrNode *nodes,
                                         size_t capacity,
                                         size_t *written);

/**
 * Replays every recorded evader against guided pursuers. `laws` is a mask
 * of `IBRSCP_LAW_*` bits and `ratios` a list of navigation ratios; zero or
 * null selects the scenario defaults.
 *
 * # Safety
 * `ratios` must point to `n_ratios` values when non-null; other pointers valid.
 */
enum IbrStatus ibrscp_verify(const struct IbrRun *run,
                             uint32_t laws,
                             const double *ratios,
                             size_t n_ratios,
                             bool closed_loop,
                             struct IbrVerifyInfo *info);

/**
 * Writes SVG figures and CSV data under the run's `report/` directory.
 *
 * # Safety
 * `run` must be a valid handle.
 */
enum IbrStatus ibrscp_report(const struct IbrRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IBRSCP_H */
