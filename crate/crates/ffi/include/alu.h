#ifndef ALU_FFI_H
#define ALU_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AluStatus {
  ALU_STATUS_OK = 0,
  ALU_STATUS_NULL_POINTER = 1,
  ALU_STATUS_INVALID_ARGUMENT = 2,
  ALU_STATUS_DOMAIN = 3,
  ALU_STATUS_DIMENSION = 4,
  ALU_STATUS_NUMERICAL = 5,
  ALU_STATUS_PARSE = 6,
  ALU_STATUS_IO = 7,
  ALU_STATUS_PANIC = 8,
} AluStatus;

typedef enum AluPipeline {
  ALU_PIPELINE_LEARN = 0,
  ALU_PIPELINE_UNLEARN = 1,
  ALU_PIPELINE_RETRAIN = 2,
} AluPipeline;

typedef enum AluObjective {
  ALU_OBJECTIVE_DONSKER_VARADHAN = 0,
  ALU_OBJECTIVE_CONVEX_CONJUGATE = 1,
} AluObjective;

typedef struct AluDataset AluDataset;

typedef struct AluSampleSet AluSampleSet;

/**
 * PNGD settings. `lambda` and `clip` fix the loss profile.
 */
typedef struct AluTrainParams {
  double lambda;
  double clip;
  double eta;
  double sigma;
  size_t t;
  size_t k;
  double radius;
  double alpha;
} AluTrainParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *alu_last_error_message(void);

const char *alu_version(void);

/**
 * Load a dataset written by the workbench (features CSV plus JSON manifest).
 *
 * # Safety
 * Path arguments must be NUL-terminated strings; `out` must be writable.
 */
enum AluStatus alu_dataset_read(const char *csv_path,
                                const char *manifest_path,
                                struct AluDataset **out);

/**
 * Generate a synthetic shifted-mixture dataset from a JSON spec with the
 * same keys as the `data` section of an experiment config.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string; `out` must be writable.
 */
enum AluStatus alu_dataset_synthetic(const char *spec_json, struct AluDataset **out);

/**
 * # Safety
 * `ds` must be a live dataset handle; each out-pointer must be writable.
 */
enum AluStatus alu_dataset_counts(const struct AluDataset *ds,
                                  size_t *n_pub,
                                  size_t *n_priv,
                                  size_t *n_forget,
                                  size_t *dim);

/**
 * # Safety
 * `ds` must be NULL or a handle not yet freed.
 */
void alu_dataset_free(struct AluDataset *ds);

/**
 * Draw `n` models from `pipeline`; run `i` uses seed `seed_base + i`.
 *
 * # Safety
 * `ds` and `params` must be valid; `out` must be writable.
 */
enum AluStatus alu_sample(const struct AluDataset *ds,
                          enum AluPipeline pipeline,
                          size_t n,
                          const struct AluTrainParams *params,
                          uint64_t seed_base,
                          struct AluSampleSet **out);

/**
 * # Safety
 * `file` must be a NUL-terminated string; `out` must be writable.
 */
enum AluStatus alu_samples_read(const char *file, struct AluSampleSet **out);

/**
 * # Safety
 * `set` must be a live handle; `file` a NUL-terminated string.
 */
enum AluStatus alu_samples_write(const struct AluSampleSet *set, const char *file);

/**
 * # Safety
 * `set` must be a live handle; `len` and `dim` must be writable.
 */
enum AluStatus alu_samples_shape(const struct AluSampleSet *set, size_t *len, size_t *dim);

/**
 * Copy the weights of model `index` into `buf`, which holds `buf_len` values.
 *
 * # Safety
 * `set` must be a live handle; `buf` must have room for `buf_len` doubles.
 */
enum AluStatus alu_samples_weights(const struct AluSampleSet *set,
                                   size_t index,
                                   double *buf,
                                   size_t buf_len);

/**
 * # Safety
 * `set` must be NULL or a handle not yet freed.
 */
void alu_samples_free(struct AluSampleSet *set);

/**
 * Strongly convex closed form of the learning/retraining divergence bound.
 *
 * # Safety
 * `out` must be writable.
 */
enum AluStatus alu_bound_learn_retrain(const struct AluTrainParams *params,
                                       size_t n_pub,
                                       size_t n_priv,
                                       size_t n_forget,
                                       double *out);

/**
 * Strongly convex unlearning bound after `params.k` steps from `d_init`,
 * with log-Sobolev constant `c` (requires `c > sigma^2 / lambda`).
 *
 * # Safety
 * `params` must be valid; `out` must be writable.
 */
enum AluStatus alu_bound_unlearn(const struct AluTrainParams *params,
                                 double d_init,
                                 double c,
                                 double *out);

/**
 * Noise level that keeps the strongly convex learning/retraining bound at
 * `epsilon`; `asymmetric` accounts for the public share of the data.
 *
 * # Safety
 * `params` must be valid; `out` must be writable.
 */
enum AluStatus alu_required_sigma(const struct AluTrainParams *params,
                                  size_t n_pub,
                                  size_t n_priv,
                                  size_t n_forget,
                                  double epsilon,
                                  bool asymmetric,
                                  double *out);

/**
 * Private-risk bound under distribution mismatch.
 *
 * # Safety
 * `out` must be writable.
 */
enum AluStatus alu_generalization_bound(double d_infty,
                                        size_t n_pub,
                                        size_t n_retain,
                                        double base_risk,
                                        double lipschitz,
                                        double diameter,
                                        double d_alpha,
                                        double *out);

/**
 * Estimate `D_alpha(P || Q)` with the default discriminator, training for
 * `epochs` epochs under seeds `0..n_seeds`.
 *
 * # Safety
 * `p` and `q` must be live handles; `out` must be writable.
 */
enum AluStatus alu_estimate_renyi(const struct AluSampleSet *p,
                                  const struct AluSampleSet *q,
                                  double alpha,
                                  enum AluObjective objective,
                                  size_t epochs,
                                  uint64_t n_seeds,
                                  double *out);

/**
 * Membership attack on forget example `forget_index` of `ds`. Shadow and
 * test sets must come from disjoint seeds.
 *
 * # Safety
 * Every handle must be live; out-pointers must be writable.
 */
enum AluStatus alu_attack(const struct AluDataset *ds,
                          size_t forget_index,
                          const struct AluSampleSet *shadow_unlearn,
                          const struct AluSampleSet *shadow_retrain,
                          const struct AluSampleSet *test_unlearn,
                          const struct AluSampleSet *test_retrain,
                          double *accuracy,
                          double *median_confidence);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ALU_FFI_H */
