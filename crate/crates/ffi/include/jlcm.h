#ifndef JLCM_H
#define JLCM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum JlcmStatus {
  JLCM_STATUS_OK = 0,
  JLCM_STATUS_NULL_POINTER = 1,
  JLCM_STATUS_INVALID_UTF8 = 2,
  JLCM_STATUS_OUT_OF_RANGE = 3,
  JLCM_STATUS_DESIGN = 10,
  JLCM_STATUS_DOMAIN = 11,
  JLCM_STATUS_DATA = 12,
  JLCM_STATUS_STATE = 13,
  JLCM_STATUS_NUMERIC = 14,
  JLCM_STATUS_DIVERGENCE = 15,
  JLCM_STATUS_UNDEFINED_AUC = 16,
  JLCM_STATUS_UNDEFINED_WEIGHT = 17,
  JLCM_STATUS_SCHEMA = 18,
  JLCM_STATUS_PARSE = 19,
  JLCM_STATUS_CONFIG = 20,
  JLCM_STATUS_VERSION = 21,
  JLCM_STATUS_IO = 22,
  JLCM_STATUS_CSV = 23,
  JLCM_STATUS_PANIC = 99,
} JlcmStatus;

/**
 * Opaque fitted chain.
 */
typedef struct JlcmChain JlcmChain;

/**
 * Opaque run configuration (model, sampler, DIC and schema settings).
 */
typedef struct JlcmConfig JlcmConfig;

/**
 * Opaque validated dataset.
 */
typedef struct JlcmDataset JlcmDataset;

/**
 * Posterior mean, sd and 89% equal-tailed interval of one parameter.
 */
typedef struct JlcmParamSummary {
  double mean;
  double sd;
  double lower;
  double upper;
} JlcmParamSummary;

/**
 * DIC of a fitted chain.
 */
typedef struct JlcmDic {
  double dic;
  double p_d;
  double mean_deviance;
} JlcmDic;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *jlcm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *jlcm_version(void);

/**
 * Default configuration: K = 2, time-varying membership, 5000/2000 iterations.
 */
struct JlcmConfig *jlcm_config_new(void);

/**
 * Parses `key = value` configuration text into a new handle.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum JlcmStatus jlcm_config_parse(const char *text, struct JlcmConfig **out);

/**
 * Sets one configuration key, with the same names and syntax as config files.
 *
 * # Safety
 * `config` must come from this library; `key` and `value` must be NUL-terminated.
 */
enum JlcmStatus jlcm_config_set(struct JlcmConfig *config, const char *key, const char *value);

/**
 * # Safety
 * `config` must come from this library and not be used afterwards; null is ignored.
 */
void jlcm_config_free(struct JlcmConfig *config);

/**
 * Loads a long-format CSV using the column schema of `config`.
 *
 * # Safety
 * Pointers must be valid; `path` NUL-terminated.
 */
enum JlcmStatus jlcm_dataset_load(const struct JlcmConfig *config,
                                  const char *path,
                                  struct JlcmDataset **out);

/**
 * Simulates `n_subjects` from the default two-class switching design.
 *
 * # Safety
 * `out` must be writable.
 */
enum JlcmStatus jlcm_dataset_simulate(size_t n_subjects, uint64_t seed, struct JlcmDataset **out);

/**
 * # Safety
 * `data` must be a live dataset handle.
 */
size_t jlcm_dataset_n_subjects(const struct JlcmDataset *data);

/**
 * Total number of longitudinal rows.
 *
 * # Safety
 * `data` must be a live dataset handle.
 */
size_t jlcm_dataset_n_rows(const struct JlcmDataset *data);

/**
 * # Safety
 * `data` must come from this library and not be used afterwards; null is ignored.
 */
void jlcm_dataset_free(struct JlcmDataset *data);

/**
 * Runs the sampler described by `config` on `data`.
 *
 * # Safety
 * Pointers must be valid handles; `out` writable.
 */
enum JlcmStatus jlcm_fit(const struct JlcmDataset *data,
                         const struct JlcmConfig *config,
                         struct JlcmChain **out);

/**
 * Number of stored draws, burn-in included.
 *
 * # Safety
 * `chain` must be a live chain handle.
 */
size_t jlcm_chain_n_draws(const struct JlcmChain *chain);

/**
 * Writes the chain file; the DIC settings of `config` go into its header.
 *
 * # Safety
 * Pointers must be valid; `path` NUL-terminated.
 */
enum JlcmStatus jlcm_chain_save(const struct JlcmChain *chain,
                                const struct JlcmConfig *config,
                                const char *path);

/**
 * # Safety
 * `path` NUL-terminated; `out` writable.
 */
enum JlcmStatus jlcm_chain_load(const char *path, struct JlcmChain **out);

/**
 * # Safety
 * `chain` must come from this library and not be used afterwards; null is ignored.
 */
void jlcm_chain_free(struct JlcmChain *chain);

/**
 * Posterior summary of one named parameter such as `beta_2_1` or `tau_1`.
 *
 * # Safety
 * Pointers must be valid; `name` NUL-terminated.
 */
enum JlcmStatus jlcm_chain_summary(const struct JlcmChain *chain,
                                   const char *name,
                                   struct JlcmParamSummary *out);

/**
 * DIC with the variant and penalty selected in `config`.
 *
 * # Safety
 * Pointers must be valid handles; `out` writable.
 */
enum JlcmStatus jlcm_dic(const struct JlcmDataset *data,
                         const struct JlcmChain *chain,
                         const struct JlcmConfig *config,
                         struct JlcmDic *out);

/**
 * Conditional survival `P(T > t + dt | T > t, history up to t)` of subject `index`.
 *
 * # Safety
 * Pointers must be valid handles; `out` writable.
 */
enum JlcmStatus jlcm_predict(const struct JlcmDataset *data,
                             const struct JlcmChain *chain,
                             size_t index,
                             double t,
                             double dt,
                             double *out);

/**
 * IPCW AUC over `[t, t + dt)` using the chain's predicted risks.
 *
 * # Safety
 * Pointers must be valid handles; `out` writable.
 */
enum JlcmStatus jlcm_auc(const struct JlcmDataset *data,
                         const struct JlcmChain *chain,
                         double t,
                         double dt,
                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JLCM_H */
