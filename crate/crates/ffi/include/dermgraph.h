#ifndef DERMGRAPH_H
#define DERMGRAPH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of checklist attributes; length of every attribute array.
 */
#define DG_N_ATTRIBUTES 7

typedef enum DgStatus {
  DG_STATUS_OK = 0,
  DG_STATUS_NULL_POINTER = 1,
  DG_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Unreadable, malformed, or incompatible checkpoint.
   */
  DG_STATUS_CHECKPOINT = 3,
  /**
   * Metric undefined for the input, e.g. a single class.
   */
  DG_STATUS_UNDEFINED_METRIC = 4,
  DG_STATUS_IO = 5,
  DG_STATUS_INTERNAL = 6,
} DgStatus;

/**
 * Opaque model handle.
 */
typedef struct DgModel DgModel;

/**
 * Scoring result for one attribute vector.
 */
typedef struct DgScore {
  uint32_t traditional_score;
  bool traditional_referral;
  double weighted_average;
  double melanoma_probability;
  bool referral;
  double threshold_used;
} DgScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *dg_last_error(void);

/**
 * Load a checkpoint file into a new model handle written to `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum DgStatus dg_model_load(const char *path, struct DgModel **out);

/**
 * Release a handle from [`dg_model_load`]. Null is ignored.
 *
 * # Safety
 * `model` must be null or a live handle, not used afterwards.
 */
void dg_model_free(struct DgModel *model);

/**
 * Copy the learned attribute weights into `out[0..7]`.
 *
 * # Safety
 * `model` must be a live handle; `out` must hold 7 doubles.
 */
enum DgStatus dg_model_weights(const struct DgModel *model, double *out);

/**
 * Stored melanoma referral threshold.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum DgStatus dg_model_threshold(const struct DgModel *model, double *out);

/**
 * Score one attribute vector (`len` must be 7, values in [0, 1]) with the
 * model's learned weights.
 *
 * # Safety
 * `model` must be a live handle, `attrs` must point to `len` doubles, and
 * `out` must be writable.
 */
enum DgStatus dg_model_score(const struct DgModel *model,
                             const double *attrs,
                             size_t len,
                             struct DgScore *out);

/**
 * Score one attribute vector with the traditional 2/1 weights.
 *
 * # Safety
 * `attrs` must point to `len` doubles and `out` must be writable.
 */
enum DgStatus dg_score_traditional(const double *attrs, size_t len, struct DgScore *out);

/**
 * Integer checklist score of 7 binary findings.
 *
 * # Safety
 * `attrs` must point to `len` bytes and `out` must be writable.
 */
enum DgStatus dg_traditional_score(const uint8_t *attrs, size_t len, uint32_t *out);

/**
 * Area under the ROC curve of `n` scores against 0/1 labels.
 *
 * # Safety
 * `scores` and `labels` must point to `n` values and `out` must be writable.
 */
enum DgStatus dg_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DERMGRAPH_H */
