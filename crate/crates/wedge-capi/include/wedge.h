/* C interface to the wedge tensor-completion toolkit. */

#ifndef WEDGE_H
#define WEDGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every API function.
typedef enum WedgeStatus {
  WEDGE_STATUS_OK = 0,
  WEDGE_STATUS_NULL_ARGUMENT = 1,
  WEDGE_STATUS_INVALID_ARGUMENT = 2,
  WEDGE_STATUS_INVALID_UTF8 = 3,
  WEDGE_STATUS_IO = 4,
  WEDGE_STATUS_NUMERIC = 5,
  WEDGE_STATUS_RETRIEVAL_FAILED = 6,
  WEDGE_STATUS_DIVERGED = 7,
  WEDGE_STATUS_PANIC = 8,
} WedgeStatus;

// Opaque completion-result handle.
typedef struct WedgeCompletion WedgeCompletion;

// Opaque CP model handle.
typedef struct WedgeCpModel WedgeCpModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Thread-local message describing the most recent failure on this thread.
// Never NULL; empty when no failure has occurred. Valid until the next
// failing call on the same thread.
const char *wedge_last_error_message(void);

// Library version as a static NUL-terminated string (do not free).
const char *wedge_version(void);

// Free a string returned by this library.
//
// # Safety
// `s` must be a pointer previously returned by a `*_to_json` function of
// this library (or NULL), not yet freed.
void wedge_string_free(char *s);

// Create a symmetric CP model with i.i.d. Gaussian, column-normalized
// factors.
//
// # Safety
// `out` must be a valid pointer to a `WedgeCpModel*` slot.
enum WedgeStatus wedge_cp_model_random_symmetric(size_t n,
                                                 size_t rank,
                                                 size_t order,
                                                 uint64_t seed,
                                                 struct WedgeCpModel **out);

// Create an asymmetric CP model with independent Gaussian factors per mode.
//
// # Safety
// `dims` must point to `order` readable `usize` values; `out` must be valid.
enum WedgeStatus wedge_cp_model_random(const size_t *dims,
                                       size_t order,
                                       size_t rank,
                                       uint64_t seed,
                                       struct WedgeCpModel **out);

// Parse a CP model from its JSON encoding.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid.
enum WedgeStatus wedge_cp_model_from_json(const char *json, struct WedgeCpModel **out);

// Serialize a CP model to JSON; the returned string is freed with
// [`wedge_string_free`].
//
// # Safety
// `model` must be a live handle; `out_json` must be valid.
enum WedgeStatus wedge_cp_model_to_json(const struct WedgeCpModel *model, char **out_json);

// Tensor order of the model.
//
// # Safety
// `model` must be a live handle; `out` must be valid.
enum WedgeStatus wedge_cp_model_order(const struct WedgeCpModel *model, size_t *out);

// Dimension of one mode.
//
// # Safety
// `model` must be a live handle; `out` must be valid.
enum WedgeStatus wedge_cp_model_dim(const struct WedgeCpModel *model, size_t mode, size_t *out);

// Lazy tensor entry `T[index]`.
//
// # Safety
// `model` must be a live handle; `index` must point to `len` readable
// values; `out` must be valid.
enum WedgeStatus wedge_cp_model_entry(const struct WedgeCpModel *model,
                                      const size_t *index,
                                      size_t len,
                                      double *out);

// Free a model handle (NULL is a no-op).
//
// # Safety
// `model` must be a handle from this library, not yet freed.
void wedge_cp_model_free(struct WedgeCpModel *model);

// Run spectral completion (symmetric pipeline when `symmetric` is nonzero,
// mode-wise otherwise) at wedge rate `p` and uniform rate `q`.
//
// # Safety
// `model` must be a live handle; `out` must be valid.
enum WedgeStatus wedge_spectral_complete(const struct WedgeCpModel *model,
                                         size_t rank,
                                         double p,
                                         double q,
                                         uint64_t seed,
                                         int32_t symmetric,
                                         struct WedgeCompletion **out);

// Relative Frobenius error of a completion run.
//
// # Safety
// `result` must be a live handle; `out` must be valid.
enum WedgeStatus wedge_completion_rel_error(const struct WedgeCompletion *result, double *out);

// Total entry observations consumed (wedge + uniform).
//
// # Safety
// `result` must be a live handle; `out` must be valid.
enum WedgeStatus wedge_completion_samples(const struct WedgeCompletion *result, uint64_t *out);

// Whether any eigen-cut hit a degenerate spectral gap (1) or not (0).
//
// # Safety
// `result` must be a live handle; `out` must be valid.
enum WedgeStatus wedge_completion_degenerate_gap(const struct WedgeCompletion *result,
                                                 int32_t *out);

// Free a completion handle (NULL is a no-op).
//
// # Safety
// `result` must be a handle from this library, not yet freed.
void wedge_completion_free(struct WedgeCompletion *result);

// Wedge-initialized gradient-descent completion of an order-3 symmetric
// model; writes the final relative Frobenius error.
//
// # Safety
// `model` must be a live handle; `out_rel_error` must be valid.
enum WedgeStatus wedge_gd_complete(const struct WedgeCpModel *model,
                                   double p,
                                   double q,
                                   uint64_t seed,
                                   size_t t_max,
                                   double *out_rel_error);

// Wedge-initialized subspace estimation of the mode-0 unfolding; writes
// `||Û R - U||` against the model's exact left subspace.
//
// # Safety
// `model` must be a live handle; `out_error` must be valid.
enum WedgeStatus wedge_subspace_error(const struct WedgeCpModel *model,
                                      double p,
                                      uint64_t seed,
                                      double *out_error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEDGE_H */
