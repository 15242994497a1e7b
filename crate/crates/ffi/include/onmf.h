/* Generated by cbindgen; do not edit. */

#ifndef ONMF_H
#define ONMF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; values 1–4 match the command-line exit codes.
 */
typedef enum OnmfStatus {
  ONMF_STATUS_OK = 0,
  ONMF_STATUS_IO = 1,
  ONMF_STATUS_INVALID_ARGUMENT = 2,
  ONMF_STATUS_INSUFFICIENT_DATA = 3,
  ONMF_STATUS_FORMAT = 4,
  ONMF_STATUS_NULL_POINTER = 5,
  ONMF_STATUS_INTERNAL = 6,
} OnmfStatus;

/**
 * Opaque online learner: dictionary, aggregates, sample count and λ.
 */
typedef struct OnmfState OnmfState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *onmf_last_error(void);

/**
 * Creates a learner with a seeded random `d × r` dictionary.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle to be
 * released with [`onmf_state_free`].
 */
enum OnmfStatus onmf_state_new(size_t d,
                               size_t r,
                               double lambda,
                               uint64_t seed,
                               struct OnmfState **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `state` must come from this library and not be used afterwards.
 */
void onmf_state_free(struct OnmfState *state);

/**
 * Reports the dictionary shape and the number of steps taken.
 *
 * # Safety
 * All pointers must be valid; any output pointer may be null to skip it.
 */
enum OnmfStatus onmf_state_info(const struct OnmfState *state,
                                size_t *d,
                                size_t *r,
                                uint64_t *steps,
                                double *lambda);

/**
 * One online step on the `d × n` mini-batch `x`. When `codes` is non-null it
 * receives the `r × n` code matrix.
 *
 * # Safety
 * `x` must hold `d * n` values and `codes`, if non-null, room for `r * n`.
 */
enum OnmfStatus onmf_state_step(struct OnmfState *state,
                                const double *x,
                                size_t d,
                                size_t n,
                                double *codes);

/**
 * Writes the `d × n` approximation `W · code(x)` into `out`.
 *
 * # Safety
 * `x` must hold `d * n` values and `out` room for as many.
 */
enum OnmfStatus onmf_state_reconstruct(const struct OnmfState *state,
                                       const double *x,
                                       size_t d,
                                       size_t n,
                                       double *out);

/**
 * Copies the `d × r` dictionary into `out`.
 *
 * # Safety
 * `out` must have room for `d * r` values.
 */
enum OnmfStatus onmf_state_dictionary(const struct OnmfState *state, double *out);

/**
 * Writes the learner to a dictionary file.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum OnmfStatus onmf_state_save(const struct OnmfState *state, const char *path);

/**
 * Reads a learner from a dictionary file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum OnmfStatus onmf_state_load(const char *path, struct OnmfState **out);

/**
 * Nonnegative L1-penalized codes of the `d × n` matrix `x` against the
 * `d × r` dictionary `w`, written to the `r × n` buffer `h`.
 *
 * # Safety
 * Buffers must match the stated shapes.
 */
enum OnmfStatus onmf_sparse_code(const double *x,
                                 size_t d,
                                 size_t n,
                                 const double *w,
                                 size_t r,
                                 double lambda,
                                 double *h);

/**
 * Offline factorization `x ≈ W H` by multiplicative updates. Writes `d × r`
 * into `w`, `r × n` into `h` and, if non-null, the final squared residual.
 *
 * # Safety
 * Buffers must match the stated shapes.
 */
enum OnmfStatus onmf_fit_nmf(const double *x,
                             size_t d,
                             size_t n,
                             size_t r,
                             size_t iters,
                             uint64_t seed,
                             double *w,
                             double *h,
                             double *residual);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ONMF_H */
