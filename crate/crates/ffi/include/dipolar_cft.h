#ifndef DIPOLAR_CFT_H
#define DIPOLAR_CFT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. `DCFT_STATUS_OK` is zero.
 */
typedef enum DcftStatus {
  DCFT_STATUS_OK = 0,
  DCFT_STATUS_NULL_POINTER = 1,
  DCFT_STATUS_INVALID_ARGUMENT = 2,
  DCFT_STATUS_OUTSIDE_DOMAIN = 3,
  DCFT_STATUS_SINGULAR = 4,
  DCFT_STATUS_STOPPED = 5,
  DCFT_STATUS_NUMERICAL_FAILURE = 6,
  DCFT_STATUS_PANIC = 99,
} DcftStatus;

/**
 * Field selector for [`dcft_hat_expectation`].
 */
typedef enum DcftField {
  DCFT_FIELD_PHI = 0,
  DCFT_FIELD_CURRENT = 1,
  DCFT_FIELD_VIRASORO = 2,
  DCFT_FIELD_VERTEX = 3,
} DcftField;

/**
 * State of a tracked point.
 */
typedef enum DcftPointState {
  DCFT_POINT_STATE_ALIVE = 0,
  DCFT_POINT_STATE_SWALLOWED_LEFT = 1,
  DCFT_POINT_STATE_SWALLOWED_RIGHT = 2,
} DcftPointState;

/**
 * Opaque Loewner flow.
 */
typedef struct DcftLoewner DcftLoewner;

/**
 * Complex number, layout compatible with C99 `double _Complex`.
 */
typedef struct DcftComplex {
  double re;
  double im;
} DcftComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL terminated string.
 */
const char *dcft_version(void);

/**
 * Message of the last failed call on this thread, empty after success.
 * Valid until the next call into the library on the same thread.
 */
const char *dcft_last_error(void);

/**
 * Mixed Dirichlet/Neumann Green's function of the strip.
 *
 * # Safety
 * Pointer arguments must be null or valid for the accesses described.
 */
enum DcftStatus dcft_green_strip(struct DcftComplex zeta, struct DcftComplex z, double *out);

/**
 * `(1/π) arg tanh(z/4)`.
 *
 * # Safety
 * Pointer arguments must be null or valid for the accesses described.
 */
enum DcftStatus dcft_schramm_formula(struct DcftComplex z, double *out);

/**
 * Expectation of `field` at `z` in the strip chart with the
 * boundary-condition-changing insertion at real position `p`. `alpha` is
 * read only for the vertex field.
 *
 * # Safety
 * Pointer arguments must be null or valid for the accesses described.
 */
enum DcftStatus dcft_hat_expectation(enum DcftField field,
                                     double alpha,
                                     double p,
                                     struct DcftComplex z,
                                     struct DcftComplex *out);

/**
 * Runs the kernel and OPE checks; `pass` is set to 1 if all pass.
 *
 * # Safety
 * Pointer arguments must be null or valid for the accesses described.
 */
enum DcftStatus dcft_kernel_checks(int32_t *pass);

/**
 * New flow tracking `n` points of the closed strip. On success `*out`
 * owns the handle.
 *
 * # Safety
 * `points` must be valid for `n` reads.
 */
enum DcftStatus dcft_loewner_new(const struct DcftComplex *points,
                                 size_t n,
                                 struct DcftLoewner **out);

/**
 * One step of length `dt` after moving the driving by `dxi`.
 *
 * # Safety
 * Pointer arguments must be null or valid for the accesses described.
 */
enum DcftStatus dcft_loewner_step(struct DcftLoewner *h, double dxi, double dt);

/**
 * Advances by `n_steps` Brownian steps of `sqrt(kappa) B`, drawn from
 * stream `path` of `seed`.
 *
 * # Safety
 * Pointer arguments must be null or valid for the accesses described.
 */
enum DcftStatus dcft_loewner_run_brownian(struct DcftLoewner *h,
                                          double kappa,
                                          double dt,
                                          size_t n_steps,
                                          uint64_t seed,
                                          uint64_t path);

/**
 * Current Loewner time.
 *
 * # Safety
 * Pointer arguments must be null or valid for the accesses described.
 */
enum DcftStatus dcft_loewner_time(const struct DcftLoewner *h, double *out);

/**
 * Number of tracked points.
 *
 * # Safety
 * Pointer arguments must be null or valid for the accesses described.
 */
enum DcftStatus dcft_loewner_len(const struct DcftLoewner *h, size_t *out);

/**
 * Image `w_t(z_i)`, its derivative and state of point `i`. Any out
 * pointer may be null to skip it.
 *
 * # Safety
 * Pointer arguments must be null or valid for the accesses described.
 */
enum DcftStatus dcft_loewner_point(const struct DcftLoewner *h,
                                   size_t i,
                                   struct DcftComplex *w,
                                   struct DcftComplex *dw,
                                   enum DcftPointState *state);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `h` must come from [`dcft_loewner_new`] and not be used afterwards.
 */
void dcft_loewner_free(struct DcftLoewner *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIPOLAR_CFT_H */
