/* C ABI for the tldakit tensor discriminant analysis library. */

#ifndef TLDAKIT_H
#define TLDAKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum TldakitStatus {
  TLDAKIT_STATUS_OK = 0,
  TLDAKIT_STATUS_NULL_POINTER = 1,
  TLDAKIT_STATUS_INVALID_ARGUMENT = 2,
  TLDAKIT_STATUS_DIM_MISMATCH = 3,
  TLDAKIT_STATUS_SINGULAR = 4,
  TLDAKIT_STATUS_NUMERICAL_ERROR = 5,
  TLDAKIT_STATUS_FORMAT_ERROR = 6,
  TLDAKIT_STATUS_IO_ERROR = 7,
  TLDAKIT_STATUS_UTF8_ERROR = 8,
  TLDAKIT_STATUS_PANIC = 9,
} TldakitStatus;

/**
 * Built-in mode-3 transforms selectable over the ABI.
 */
typedef enum TldakitTransform {
  TLDAKIT_TRANSFORM_DFT = 0,
  TLDAKIT_TRANSFORM_DCT = 1,
} TldakitTransform;

/**
 * Distance used by the 1-NN classifier.
 */
typedef enum TldakitMetric {
  TLDAKIT_METRIC_FROBENIUS = 0,
  TLDAKIT_METRIC_MAD = 1,
} TldakitMetric;

/**
 * Opaque trained model.
 */
typedef struct TldakitModel TldakitModel;

/**
 * Opaque dense real third-order tensor.
 */
typedef struct TldakitTensor TldakitTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *tldakit_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tldakit_version(void);

/**
 * Create a tensor from a buffer of `n1*n2*n3` values in the canonical
 * linearization; a null `data` gives a zero tensor.
 *
 * # Safety
 * `data` must be null or point to at least `len` readable doubles, and
 * `out` must point to writable pointer storage.
 */
enum TldakitStatus tldakit_tensor_new(size_t n1,
                                      size_t n2,
                                      size_t n3,
                                      const double *data,
                                      size_t len,
                                      struct TldakitTensor **out);

/**
 * # Safety
 * `t` must be null or a pointer returned by this library and not yet freed.
 */
void tldakit_tensor_free(struct TldakitTensor *t);

/**
 * # Safety
 * `t` must be a live tensor handle; dimension outputs may be null to skip.
 */
enum TldakitStatus tldakit_tensor_dims(const struct TldakitTensor *t,
                                       size_t *n1,
                                       size_t *n2,
                                       size_t *n3);

/**
 * Copy the payload out in the canonical linearization.
 *
 * # Safety
 * `t` must be a live handle and `out` must point to at least `len` writable
 * doubles with `len = n1*n2*n3`.
 */
enum TldakitStatus tldakit_tensor_copy_data(const struct TldakitTensor *t, double *out, size_t len);

/**
 * Read a real TNS3 file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string, `out` writable.
 */
enum TldakitStatus tldakit_tensor_read_tns3(const char *path, struct TldakitTensor **out);

/**
 * Write a tensor as a real TNS3 file.
 *
 * # Safety
 * `t` must be a live handle, `path` a valid NUL-terminated string.
 */
enum TldakitStatus tldakit_tensor_write_tns3(const struct TldakitTensor *t, const char *path);

/**
 * `a *_L b` under the selected built-in transform.
 *
 * # Safety
 * `a` and `b` must be live handles, `out` writable.
 */
enum TldakitStatus tldakit_lproduct(const struct TldakitTensor *a,
                                    const struct TldakitTensor *b,
                                    enum TldakitTransform transform,
                                    struct TldakitTensor **out);

/**
 * Trace-ratio training. `labels` are per-sample class ids in `1..=c`,
 * one per lateral slice of `x`.
 *
 * # Safety
 * `x` must be a live handle, `labels` readable for `n_labels` entries,
 * `out` writable.
 */
enum TldakitStatus tldakit_train_trace_ratio(const struct TldakitTensor *x,
                                             const size_t *labels,
                                             size_t n_labels,
                                             size_t k,
                                             enum TldakitTransform transform,
                                             bool weight_between,
                                             struct TldakitModel **out);

/**
 * Ratio-trace training with ridge `gamma`; the subspace width is inferred
 * from the between-scatter rank.
 *
 * # Safety
 * As for [`tldakit_train_trace_ratio`].
 */
enum TldakitStatus tldakit_train_ratio_trace(const struct TldakitTensor *x,
                                             const size_t *labels,
                                             size_t n_labels,
                                             double gamma,
                                             enum TldakitTransform transform,
                                             bool weight_between,
                                             struct TldakitModel **out);

/**
 * # Safety
 * `m` must be null or a pointer returned by this library and not yet freed.
 */
void tldakit_model_free(struct TldakitModel *m);

/**
 * # Safety
 * `m` must be a live model handle, `k` writable.
 */
enum TldakitStatus tldakit_model_k(const struct TldakitModel *m, size_t *k);

/**
 * # Safety
 * `m` must be a live model handle, `path` a valid NUL-terminated string.
 */
enum TldakitStatus tldakit_model_save(const struct TldakitModel *m, const char *path);

/**
 * # Safety
 * `path` must be a valid NUL-terminated string, `out` writable.
 */
enum TldakitStatus tldakit_model_load(const char *path, struct TldakitModel **out);

/**
 * Project samples (`n1 x m x n3`) to `K x m x n3`.
 *
 * # Safety
 * `m` and `samples` must be live handles, `out` writable.
 */
enum TldakitStatus tldakit_model_project(const struct TldakitModel *m,
                                         const struct TldakitTensor *samples,
                                         struct TldakitTensor **out);

/**
 * Project raw probes through the model and 1-NN classify them against a
 * projected gallery. Writes one predicted label per probe.
 *
 * # Safety
 * All handles must be live; `gallery_labels` must hold `n_gallery` entries
 * and `predictions` must have room for one label per probe lateral slice.
 */
enum TldakitStatus tldakit_classify(const struct TldakitModel *m,
                                    const struct TldakitTensor *gallery_projected,
                                    const size_t *gallery_labels,
                                    size_t n_gallery,
                                    const struct TldakitTensor *probes,
                                    enum TldakitMetric metric,
                                    size_t *predictions,
                                    size_t n_predictions);

/**
 * Load a dataset (TNS3 + labels sidecar). Labels are written to
 * `labels_out` when non-null (must hold one entry per sample).
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` writable;
 * `labels_out` null or writable for `labels_len` entries.
 */
enum TldakitStatus tldakit_dataset_read(const char *path,
                                        struct TldakitTensor **out,
                                        size_t *labels_out,
                                        size_t labels_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TLDAKIT_H */
