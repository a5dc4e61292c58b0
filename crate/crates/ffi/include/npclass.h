#ifndef NPCLASS_H
#define NPCLASS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum NpStatus {
  NP_STATUS_OK = 0,
  NP_STATUS_NULL_POINTER = 1,
  NP_STATUS_INVALID_ARGUMENT = 2,
  NP_STATUS_DIMENSION_MISMATCH = 3,
  NP_STATUS_DEGENERATE = 4,
  NP_STATUS_NON_CONVERGENCE = 5,
  NP_STATUS_DATA = 6,
  NP_STATUS_PANIC = 7,
} NpStatus;

typedef enum NpKernel {
  NP_KERNEL_EPANECHNIKOV = 0,
} NpKernel;

/**
 * Kernel posterior classifier with per-class adaptive bandwidths.
 */
typedef struct NpOfflineClassifier NpOfflineClassifier;

/**
 * Posterior estimates at fixed query points, updated one observation at a time.
 */
typedef struct NpOnlineState NpOnlineState;

/**
 * Incremental PCA over a stream of observations.
 */
typedef struct NpStreamingPca NpStreamingPca;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a
 * successful one. Valid until the next call on the same thread.
 */
const char *np_last_error_message(void);

/**
 * Releases a string returned by this library.
 */
void np_string_free(char *s);

/**
 * Starts an incremental PCA from batch PCA on the first `n0` rows.
 */
enum NpStatus np_pca_new(const double *head,
                         size_t n0,
                         size_t d,
                         size_t q,
                         struct NpStreamingPca **out);

enum NpStatus np_pca_update(struct NpStreamingPca *pca, const double *x, size_t d);

/**
 * Writes the `q` component scores of `x` under the current basis.
 */
enum NpStatus np_pca_project(const struct NpStreamingPca *pca,
                             const double *x,
                             size_t d,
                             double *out,
                             size_t q);

/**
 * Number of observations absorbed so far.
 */
enum NpStatus np_pca_count(const struct NpStreamingPca *pca, size_t *out);

void np_pca_free(struct NpStreamingPca *pca);

/**
 * Fits the offline classifier on `n` labelled rows, choosing each class
 * bandwidth by leave-one-out cross-validation on the default grid.
 * Labels are class numbers `1..=n_classes`.
 */
enum NpStatus np_offline_fit(const double *x,
                             const uint32_t *labels,
                             size_t n,
                             size_t d,
                             size_t n_classes,
                             enum NpKernel kernel,
                             struct NpOfflineClassifier **out);

/**
 * Writes the `n_classes` posterior estimates at `x`.
 */
enum NpStatus np_offline_posterior(const struct NpOfflineClassifier *clf,
                                   const double *x,
                                   size_t d,
                                   double *out,
                                   size_t n_classes);

enum NpStatus np_offline_classify(const struct NpOfflineClassifier *clf,
                                  const double *x,
                                  size_t d,
                                  uint32_t *out);

void np_offline_free(struct NpOfflineClassifier *clf);

/**
 * Starts the online recursion at `m` query points from the offline estimate
 * on the `n0` head rows, with one bandwidth shared by all classes.
 * A `c_gamma` of zero or less is tuned on the head over the default grid.
 */
enum NpStatus np_online_new(const double *head,
                            const uint32_t *labels,
                            size_t n0,
                            size_t d,
                            size_t n_classes,
                            const double *queries,
                            size_t m,
                            double c_gamma,
                            enum NpKernel kernel,
                            struct NpOnlineState **out);

/**
 * Absorbs one labelled observation.
 */
enum NpStatus np_online_update(struct NpOnlineState *online,
                               const double *x,
                               size_t d,
                               uint32_t label);

/**
 * Writes the current estimates at query `query`.
 */
enum NpStatus np_online_posterior(const struct NpOnlineState *online,
                                  size_t query,
                                  double *out,
                                  size_t n_classes);

enum NpStatus np_online_classify(const struct NpOnlineState *online, size_t query, uint32_t *out);

/**
 * Observations absorbed so far, head included.
 */
enum NpStatus np_online_count(const struct NpOnlineState *online, size_t *out);

/**
 * JSON checkpoint of the state. Release it with `np_string_free`.
 */
enum NpStatus np_online_snapshot(const struct NpOnlineState *online, char **out);

/**
 * Rebuilds a state from a checkpoint written by `np_online_snapshot`.
 */
enum NpStatus np_online_restore(const char *json, struct NpOnlineState **out);

void np_online_free(struct NpOnlineState *online);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NPCLASS_H */
