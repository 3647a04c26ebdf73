#ifndef ABRSIM_H
#define ABRSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum AbrStatus {
  ABR_STATUS_OK = 0,
  ABR_STATUS_NULL_POINTER = 1,
  ABR_STATUS_INVALID_UTF8 = 2,
  ABR_STATUS_INVALID_ARGUMENT = 3,
  ABR_STATUS_SCENARIO = 4,
  ABR_STATUS_SIMULATION = 5,
  ABR_STATUS_IO = 6,
  ABR_STATUS_NOT_FOUND = 7,
  ABR_STATUS_CONSOLIDATION = 8,
  ABR_STATUS_PANIC = 99,
} AbrStatus;

/**
 * Consolidation state of one VC at one branch point.
 */
typedef struct AbrBranchPoint AbrBranchPoint;

/**
 * The traces of one finished run.
 */
typedef struct AbrRun AbrRun;

/**
 * A validated scenario.
 */
typedef struct AbrScenario AbrScenario;

typedef struct AbrRmCounts {
  uint64_t frm_sent_by_source;
  uint64_t brm_received_by_source;
  uint64_t brm_in_network;
  uint64_t rm_in_flight_root;
} AbrRmCounts;

/**
 * A resource-management cell. `forward` selects FRM (true) or BRM.
 */
typedef struct AbrRmCell {
  uint32_t vc;
  bool forward;
  double er;
  bool ci;
  bool ni;
  double ccr;
  uint64_t seq;
} AbrRmCell;

/**
 * Result of handing a cell to a branch point. `brm` is meaningful only
 * when `has_brm` is set.
 */
typedef struct AbrActions {
  bool multicast_frm;
  bool discard;
  bool has_brm;
  struct AbrRmCell brm;
} AbrActions;

typedef struct AbrBranchCounters {
  uint32_t skip_increase;
  int64_t frm_minus_brm;
  size_t brms_received;
} AbrBranchCounters;

/**
 * Message for the last failed call on this thread, or an empty string.
 * Valid until the next call into this library on the same thread.
 */
const char *abr_last_error(void);

/**
 * Parses scenario text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a writable pointer.
 */
enum AbrStatus abr_scenario_parse(const char *text, struct AbrScenario **out);

/**
 * Loads a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum AbrStatus abr_scenario_load(const char *path, struct AbrScenario **out);

/**
 * Selects the consolidation algorithm, 1 to 7.
 *
 * # Safety
 * `scenario` must come from this library and not be freed.
 */
enum AbrStatus abr_scenario_set_algorithm(struct AbrScenario *scenario, uint8_t algorithm_number);

/**
 * # Safety
 * `scenario` must come from this library and not be freed.
 */
enum AbrStatus abr_scenario_set_horizon(struct AbrScenario *scenario, double horizon_s);

/**
 * # Safety
 * `scenario` must come from this library and not be freed.
 */
enum AbrStatus abr_scenario_set_alpha(struct AbrScenario *scenario, double alpha);

/**
 * Frees a scenario. Null is ignored.
 *
 * # Safety
 * `scenario` must come from this library and not be freed already.
 */
void abr_scenario_free(struct AbrScenario *scenario);

/**
 * Simulates a scenario up to its horizon.
 *
 * # Safety
 * `scenario` must come from this library and `out` be writable.
 */
enum AbrStatus abr_run(const struct AbrScenario *scenario, struct AbrRun **out);

/**
 * Frees a run. Null is ignored.
 *
 * # Safety
 * `run` must come from this library and not be freed already.
 */
void abr_run_free(struct AbrRun *run);

/**
 * Writes the run's CSV files into `dir`, creating it if needed.
 *
 * # Safety
 * `run` must come from this library and `dir` be a NUL-terminated string.
 */
enum AbrStatus abr_run_write_csv(const struct AbrRun *run, const char *dir);

/**
 * Number of sources, ABR and background, in the run.
 *
 * # Safety
 * `run` must come from this library and `out` be writable.
 */
enum AbrStatus abr_run_source_count(const struct AbrRun *run, size_t *out);

/**
 * Name of source `index`. The string lives as long as the run.
 *
 * # Safety
 * `run` must come from this library and `out` be writable.
 */
enum AbrStatus abr_run_source_name(const struct AbrRun *run, size_t index, const char **out);

/**
 * Copies up to `capacity` ACR samples of a source into `times` and
 * `rates_mbps`. `total` receives the full trace length, so a call with
 * `capacity` 0 and null buffers asks for the size.
 *
 * # Safety
 * The buffers must hold `capacity` doubles each, or be null when
 * `capacity` is 0.
 */
enum AbrStatus abr_run_acr_trace(const struct AbrRun *run,
                                 const char *name,
                                 double *times,
                                 double *rates_mbps,
                                 size_t capacity,
                                 size_t *total);

/**
 * Fraction of BRMs reaching the source in the final 50 ms whose ER
 * exceeds the max-min fair rate by more than 5%.
 *
 * # Safety
 * `run` must come from this library, `name` be a NUL-terminated string
 * and `out` be writable.
 */
enum AbrStatus abr_run_noise_index(const struct AbrRun *run, const char *name, double *out);

/**
 * Time after which the source's ACR stays within `tol` of its fair rate.
 * Returns `NotFound` when it never settles.
 *
 * # Safety
 * `run` must come from this library, `name` be a NUL-terminated string
 * and `out` be writable.
 */
enum AbrStatus abr_run_convergence_time(const struct AbrRun *run,
                                        const char *name,
                                        double tol,
                                        double *out);

/**
 * # Safety
 * `run` must come from this library, `name` be a NUL-terminated string
 * and `out` be writable.
 */
enum AbrStatus abr_run_rm_counts(const struct AbrRun *run,
                                 const char *name,
                                 struct AbrRmCounts *out);

/**
 * Largest queue, in cells, seen at any switch port.
 *
 * # Safety
 * `run` must come from this library and `out` be writable.
 */
enum AbrStatus abr_run_max_queue(const struct AbrRun *run, uint64_t *out);

/**
 * Creates a branch point running algorithm 1 to 7 over `branches`
 * branches. Rates are in Mbps.
 *
 * # Safety
 * `out` must be writable.
 */
enum AbrStatus abr_branch_point_new(uint8_t algorithm_number,
                                    size_t branches,
                                    double pcr_mbps,
                                    double icr_mbps,
                                    double alpha,
                                    struct AbrBranchPoint **out);

/**
 * Frees a branch point. Null is ignored.
 *
 * # Safety
 * `bp` must come from this library and not be freed already.
 */
void abr_branch_point_free(struct AbrBranchPoint *bp);

/**
 * An FRM arrived from the root side.
 *
 * # Safety
 * All pointers must be valid; `bp` must come from this library.
 */
enum AbrStatus abr_branch_point_on_frm(struct AbrBranchPoint *bp,
                                       const struct AbrRmCell *cell,
                                       struct AbrActions *out);

/**
 * A BRM arrived from `branch`. Pass NaN for `local_er_mbps` unless the
 * algorithm is 7, which requires it.
 *
 * # Safety
 * All pointers must be valid; `bp` must come from this library.
 */
enum AbrStatus abr_branch_point_on_brm(struct AbrBranchPoint *bp,
                                       size_t branch,
                                       const struct AbrRmCell *cell,
                                       double local_er_mbps,
                                       struct AbrActions *out);

/**
 * A returned BRM is leaving toward the root through a port offering
 * `erica_er_mbps`. Writes the cell as sent.
 *
 * # Safety
 * All pointers must be valid; `bp` must come from this library.
 */
enum AbrStatus abr_branch_point_on_brm_scheduled(struct AbrBranchPoint *bp,
                                                 const struct AbrRmCell *cell,
                                                 double erica_er_mbps,
                                                 struct AbrRmCell *out);

/**
 * Ends the current round with what has been collected so far, as a
 * round timer would. `has_brm` tells whether a BRM was produced.
 *
 * # Safety
 * All pointers must be valid; `bp` must come from this library.
 */
enum AbrStatus abr_branch_point_force_round(struct AbrBranchPoint *bp, struct AbrActions *out);

/**
 * # Safety
 * All pointers must be valid; `bp` must come from this library.
 */
enum AbrStatus abr_branch_point_counters(const struct AbrBranchPoint *bp,
                                         struct AbrBranchCounters *out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *abr_version(void);

#endif  /* ABRSIM_H */
