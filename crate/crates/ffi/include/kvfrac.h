#ifndef KVFRAC_H
#define KVFRAC_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KvfStatus {
  KVF_STATUS_OK = 0,
  KVF_STATUS_NULL_POINTER = 1,
  KVF_STATUS_INVALID_ARGUMENT = 2,
  KVF_STATUS_SCENARIO = 3,
  KVF_STATUS_SOLVER = 4,
  KVF_STATUS_IO = 5,
  KVF_STATUS_OUT_OF_RANGE = 6,
  KVF_STATUS_PANIC = 7,
} KvfStatus;

typedef enum KvfVerdict {
  KVF_VERDICT_PARADOX_CONFIRMED = 0,
  KVF_VERDICT_GRIFFITH_COMPATIBLE = 1,
  KVF_VERDICT_INCONCLUSIVE_RESOLUTION = 2,
} KvfVerdict;

/**
 * Constitutive law `G(ξ) = |ξ|^{p−2}ξ` with optional regularisation.
 */
typedef struct KvfLaw KvfLaw;

/**
 * A finished (or partial) run together with its energy ledger.
 */
typedef struct KvfRun KvfRun;

/**
 * A validated scenario.
 */
typedef struct KvfScenario KvfScenario;

/**
 * Symmetric tensor `[[xx, xy], [xy, yy]]`.
 */
typedef struct KvfTensor {
  double xx;
  double yy;
  double xy;
} KvfTensor;

/**
 * One ledger row, same columns as the CSV export.
 */
typedef struct KvfLedgerRow {
  size_t k;
  double t;
  double kinetic;
  double elastic;
  double viscous_cum;
  double work_cum;
  double crack_cum;
  double residual_kv;
  double residual_general;
} KvfLedgerRow;

typedef struct KvfParadoxSummary {
  enum KvfVerdict verdict;
  double crack_final;
  double max_abs_residual;
  double max_griffith_defect;
  double tolerance;
  double min_crack;
} KvfParadoxSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL.
 * The pointer stays valid until the next kvf call on the same thread.
 */
const char *kvf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *kvf_version(void);

/**
 * # Safety
 * `out` must be a valid pointer to write a handle into.
 */
enum KvfStatus kvf_law_new(double p, double eps_reg, struct KvfLaw **out);

/**
 * # Safety
 * `law` must be NULL or a handle from [`kvf_law_new`] not yet freed.
 */
void kvf_law_free(struct KvfLaw *law);

/**
 * Evaluates `G(xi)`.
 *
 * # Safety
 * `law` must be a live handle and `out` writable.
 */
enum KvfStatus kvf_law_g_apply(const struct KvfLaw *law,
                               struct KvfTensor xi,
                               struct KvfTensor *out);

/**
 * Evaluates the closed-form inverse `G⁻¹(eta)`.
 *
 * # Safety
 * `law` must be a live handle and `out` writable.
 */
enum KvfStatus kvf_law_g_inverse(const struct KvfLaw *law,
                                 struct KvfTensor eta,
                                 struct KvfTensor *out);

/**
 * Potential `φ(xi)`; NaN if `law` is NULL.
 *
 * # Safety
 * `law` must be NULL or a live handle.
 */
double kvf_law_phi(const struct KvfLaw *law, struct KvfTensor xi);

/**
 * Conjugate potential `φ*(eta)`; NaN if `law` is NULL.
 *
 * # Safety
 * `law` must be NULL or a live handle.
 */
double kvf_law_phi_star(const struct KvfLaw *law, struct KvfTensor eta);

/**
 * Reads and validates a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum KvfStatus kvf_scenario_load(const char *path, struct KvfScenario **out);

/**
 * Parses and validates a scenario given as JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum KvfStatus kvf_scenario_from_json(const char *json, struct KvfScenario **out);

/**
 * Largest step count listed in the scenario, 0 if `scenario` is NULL.
 *
 * # Safety
 * `scenario` must be NULL or a live handle.
 */
size_t kvf_scenario_finest_n(const struct KvfScenario *scenario);

/**
 * Number of validation warnings.
 *
 * # Safety
 * `scenario` must be NULL or a live handle.
 */
size_t kvf_scenario_warning_count(const struct KvfScenario *scenario);

/**
 * # Safety
 * `scenario` must be NULL or a handle not yet freed.
 */
void kvf_scenario_free(struct KvfScenario *scenario);

/**
 * Runs `n` time steps; `n = 0` selects the finest listed count.
 *
 * On a solver failure the status is `Solver` and `*out` still receives the
 * partial run up to the last converged step.
 *
 * # Safety
 * `scenario` must be a live handle and `out` writable.
 */
enum KvfStatus kvf_run(const struct KvfScenario *scenario, size_t n, struct KvfRun **out);

/**
 * # Safety
 * `run` must be NULL or a handle not yet freed.
 */
void kvf_run_free(struct KvfRun *run);

/**
 * Number of stored states (`n + 1` for a complete run).
 *
 * # Safety
 * `run` must be NULL or a live handle.
 */
size_t kvf_run_num_states(const struct KvfRun *run);

/**
 * Length of a displacement vector: two entries per node, `x` then `y`.
 *
 * # Safety
 * `run` must be NULL or a live handle.
 */
size_t kvf_run_field_len(const struct KvfRun *run);

/**
 * Copies `u_k` into `buf`, which must hold `len` doubles with
 * `len == kvf_run_field_len(run)`.
 *
 * # Safety
 * `run` must be a live handle and `buf` writable for `len` doubles.
 */
enum KvfStatus kvf_run_displacement(const struct KvfRun *run, size_t k, double *buf, size_t len);

/**
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum KvfStatus kvf_run_ledger_row(const struct KvfRun *run, size_t k, struct KvfLedgerRow *out);

/**
 * Writes the ledger as CSV.
 *
 * # Safety
 * `run` must be a live handle and `path` a NUL-terminated string.
 */
enum KvfStatus kvf_run_write_ledger(const struct KvfRun *run, const char *path);

/**
 * Paradox check on this run. A NaN or non-positive `min_crack` selects the
 * scenario's setting, falling back to the shortest crack segment.
 *
 * # Safety
 * `run` must be a live handle and `out` writable.
 */
enum KvfStatus kvf_run_paradox(const struct KvfRun *run,
                               double min_crack,
                               struct KvfParadoxSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KVFRAC_H */
