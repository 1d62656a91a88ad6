#ifndef MPPFL_H
#define MPPFL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum MppStatus {
  MPP_STATUS_OK = 0,
  MPP_STATUS_NULL_POINTER = 1,
  MPP_STATUS_INVALID_ARGUMENT = 2,
  MPP_STATUS_CONFIG = 3,
  MPP_STATUS_SOLVER = 4,
  MPP_STATUS_IO = 5,
  MPP_STATUS_PANIC = 6,
} MppStatus;

/**
 * Weighted social graph.
 */
typedef struct MppGraph MppGraph;

/**
 * Result of running a scenario.
 */
typedef struct MppOutcome MppOutcome;

/**
 * Scenario configuration.
 */
typedef struct MppScenario MppScenario;

/**
 * Scalar summary of an outcome. Undefined ratios are NaN.
 */
typedef struct MppSummary {
  double welfare_mpp;
  double welfare_sa;
  double welfare_sw;
  double poa_mpp_true;
  double poa_sa_true;
  double poa_mpp_closed_form;
  double server_cost;
  size_t rounds;
  bool converged;
  bool non_contractive;
} MppSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *mpp_last_error(void);

/**
 * Parses and validates config text. An empty string yields the defaults.
 *
 * # Safety
 * `text` must be a nul-terminated string; `out` must be writable.
 */
enum MppStatus mpp_scenario_from_str(const char *text, struct MppScenario **out);

/**
 * Loads and validates a config file.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum MppStatus mpp_scenario_from_file(const char *path, struct MppScenario **out);

/**
 * Overrides the master seed.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
enum MppStatus mpp_scenario_set_seed(struct MppScenario *scenario, uint64_t seed);

/**
 * Number of clients in the scenario, or 0 for NULL.
 *
 * # Safety
 * `scenario` must be NULL or a live handle.
 */
size_t mpp_scenario_clients(const struct MppScenario *scenario);

/**
 * # Safety
 * `scenario` must be NULL or a handle not yet freed.
 */
void mpp_scenario_free(struct MppScenario *scenario);

/**
 * Solves the scenario: equilibrium, baselines and price of anarchy.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum MppStatus mpp_scenario_run(const struct MppScenario *scenario, struct MppOutcome **out);

/**
 * Number of iterations `T`, or 0 for NULL.
 *
 * # Safety
 * `outcome` must be NULL or a live handle.
 */
size_t mpp_outcome_horizon(const struct MppOutcome *outcome);

/**
 * Number of clients, or 0 for NULL.
 *
 * # Safety
 * `outcome` must be NULL or a live handle.
 */
size_t mpp_outcome_clients(const struct MppOutcome *outcome);

/**
 * Copies the per-iteration rewards into `buf` (`len >= horizon`).
 *
 * # Safety
 * `outcome` must be a live handle; `buf` must hold `len` doubles.
 */
enum MppStatus mpp_outcome_rewards(const struct MppOutcome *outcome, double *buf, size_t len);

/**
 * Copies the equilibrium budgets of iteration `t` (1-based) into `buf`
 * (`len >= clients`).
 *
 * # Safety
 * `outcome` must be a live handle; `buf` must hold `len` doubles.
 */
enum MppStatus mpp_outcome_budgets(const struct MppOutcome *outcome,
                                   size_t t,
                                   double *buf,
                                   size_t len);

/**
 * Fills `out` with welfare, price-of-anarchy and convergence figures.
 *
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum MppStatus mpp_outcome_summary(const struct MppOutcome *outcome, struct MppSummary *out);

/**
 * Writes the run directory (`config.echo`, `equilibrium.csv`, `poa.csv`).
 *
 * # Safety
 * `outcome` must be a live handle; `dir` a nul-terminated path.
 */
enum MppStatus mpp_outcome_write(const struct MppOutcome *outcome, const char *dir);

/**
 * # Safety
 * `outcome` must be NULL or a handle not yet freed.
 */
void mpp_outcome_free(struct MppOutcome *outcome);

/**
 * Generates the scenario's social graph for its seed.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum MppStatus mpp_graph_generate(const struct MppScenario *scenario, struct MppGraph **out);

/**
 * Number of nodes, or 0 for NULL.
 *
 * # Safety
 * `graph` must be NULL or a live handle.
 */
size_t mpp_graph_size(const struct MppGraph *graph);

/**
 * Reads the weight of edge `i -> j`.
 *
 * # Safety
 * `graph` must be a live handle; `out` must be writable.
 */
enum MppStatus mpp_graph_weight(const struct MppGraph *graph, size_t i, size_t j, double *out);

/**
 * Edge-list text of the graph; release with [`mpp_string_free`]. NULL on
 * failure.
 *
 * # Safety
 * `graph` must be a live handle.
 */
char *mpp_graph_to_text(const struct MppGraph *graph);

/**
 * # Safety
 * `graph` must be NULL or a handle not yet freed.
 */
void mpp_graph_free(struct MppGraph *graph);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void mpp_string_free(char *s);

/**
 * Gaussian noise variance for budget `rho` with clipping threshold `clip`
 * and `data_size` samples.
 *
 * # Safety
 * `out` must be writable.
 */
enum MppStatus mpp_noise_variance(double clip, uint64_t data_size, double rho, double *out);

/**
 * Unconstrained client best response to `reward` given the mean-field
 * estimate `phi`.
 *
 * # Safety
 * `out` must be writable.
 */
enum MppStatus mpp_best_response(double reward,
                                 double phi,
                                 double a,
                                 double b,
                                 double alpha,
                                 size_t n_clients,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MPPFL_H */
