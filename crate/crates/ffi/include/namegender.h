#ifndef NAMEGENDER_H
#define NAMEGENDER_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NgStatus {
  NG_STATUS_OK = 0,
  NG_STATUS_NULL_ARGUMENT = 1,
  NG_STATUS_INVALID_UTF8 = 2,
  NG_STATUS_IO = 3,
  NG_STATUS_INVALID_INPUT = 4,
  NG_STATUS_REJECTED_NAME = 5,
  NG_STATUS_PANIC = 99,
} NgStatus;

typedef enum NgLabel {
  NG_LABEL_FEMALE = 0,
  NG_LABEL_MALE = 1,
  NG_LABEL_AMBIGUOUS = 2,
  NG_LABEL_UNKNOWN = 3,
} NgLabel;

/**
 * Opaque trained model.
 */
typedef struct NgModel NgModel;

/**
 * Opaque frequency table.
 */
typedef struct NgTable NgTable;

/**
 * Confusion counts; undecided means Ambiguous or Unknown.
 */
typedef struct NgCounts {
  uint64_t tf;
  uint64_t tm;
  uint64_t ff;
  uint64_t fm;
  uint64_t undecided_female;
  uint64_t undecided_male;
} NgCounts;

/**
 * Percentages; NA is NaN.
 */
typedef struct NgMetrics {
  double accuracy;
  double precision;
  double recall;
  double f1;
  double gbe;
} NgMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *ng_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ng_version(void);

/**
 * Loads a frequency table file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum NgStatus ng_table_load(const char *path, struct NgTable **out);

/**
 * Number of distinct names in the table, or 0 for null.
 *
 * # Safety
 * `table` must be null or a live handle.
 */
size_t ng_table_len(const struct NgTable *table);

/**
 * # Safety
 * `table` must be null or a handle not yet freed.
 */
void ng_table_free(struct NgTable *table);

/**
 * Trains a model from a table; full-name tables are projected to first names.
 * The table stays owned by the caller.
 *
 * # Safety
 * `table` must be a live handle and `out` a writable pointer.
 */
enum NgStatus ng_model_train(const struct NgTable *table, double tau, struct NgModel **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum NgStatus ng_model_load(const char *path, struct NgModel **out);

/**
 * # Safety
 * `model` must be a live handle and `path` a NUL-terminated string.
 */
enum NgStatus ng_model_save(const struct NgModel *model, const char *path);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void ng_model_free(struct NgModel *model);

/**
 * Normalizes and classifies a raw name. `p_female` receives NaN when the
 * name is unknown to the model. A name rejected by the cleaning rules
 * returns `RejectedName`.
 *
 * # Safety
 * `model` must be a live handle, `name` a NUL-terminated string and both
 * outputs writable pointers.
 */
enum NgStatus ng_model_classify(const struct NgModel *model,
                                const char *name,
                                enum NgLabel *label,
                                double *p_female);

/**
 * Female share `female / (female + male)`.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum NgStatus ng_mle_female(uint64_t female, uint64_t male, double *out);

/**
 * Metrics from confusion counts.
 *
 * # Safety
 * `counts` must be readable and `out` writable.
 */
enum NgStatus ng_metrics(const struct NgCounts *counts, struct NgMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NAMEGENDER_H */
