#ifndef ELLIPTOPE_H
#define ELLIPTOPE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  EL_METHOD_CHOL = 0,
  EL_METHOD_VINE = 1,
  EL_METHOD_ONION = 2,
  EL_METHOD_POLAR = 3,
} ElMethod;

typedef enum {
  EL_CHAIN_MODE_CHAIN_REUSE = 0,
  EL_CHAIN_MODE_RESTART_PER_MATRIX = 1,
} ElChainMode;

typedef enum {
  EL_STATUS_OK = 0,
  EL_STATUS_NULL_POINTER = 1,
  EL_STATUS_INVALID_ARGUMENT = 2,
  EL_STATUS_NOT_POSITIVE_DEFINITE = 3,
  /**
   * The sampler has produced all requested matrices.
   */
  EL_STATUS_EXHAUSTED = 4,
  EL_STATUS_NUMERICAL = 5,
  EL_STATUS_BUFFER_TOO_SMALL = 6,
  EL_STATUS_IO = 7,
  EL_STATUS_PANIC = 8,
} ElStatus;

/**
 * Opaque sampler handle.
 */
typedef struct ElSampler ElSampler;

/**
 * Sampler parameters. Chain fields are ignored by the baseline methods,
 * except `seed`.
 */
typedef struct {
  ElMethod method;
  ElChainMode mode;
  size_t dim;
  size_t count;
  double sigma_eps;
  uint64_t burn_in;
  uint64_t thin;
  uint64_t seed;
} ElSamplerConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *el_last_error(void);

/**
 * Defaults: chol, chain reuse, σ = 0.01, burn-in 1000, thin 1, seed 0.
 */
ElSamplerConfig el_sampler_config_default(size_t dim, size_t count);

/**
 * Creates a sampler. On success `*out` owns a handle to release with
 * [`el_sampler_free`].
 *
 * # Safety
 * `config` must point to a valid config and `out` to writable storage.
 */
ElStatus el_sampler_new(const ElSamplerConfig *config, ElSampler **out);

/**
 * Writes the next matrix into `buf` (`len >= dim * dim`). Returns
 * `Exhausted` once `count` matrices have been produced.
 *
 * # Safety
 * `sampler` must come from [`el_sampler_new`]; `buf` must hold `len` doubles.
 */
ElStatus el_sampler_next(ElSampler *sampler, double *buf, size_t len);

/**
 * Matrix size of a sampler, or 0 for a null handle.
 *
 * # Safety
 * `sampler` must be null or come from [`el_sampler_new`].
 */
size_t el_sampler_dim(const ElSampler *sampler);

/**
 * # Safety
 * `sampler` must be null or come from [`el_sampler_new`], and not be used afterwards.
 */
void el_sampler_free(ElSampler *sampler);

/**
 * Upper-triangular factor `U` with `R = U Uᵀ`, written densely to `u_out`.
 *
 * # Safety
 * `r` must hold `dim * dim` doubles and `u_out` must have room for as many.
 */
ElStatus el_factor_correlation(const double *r, size_t dim, double *u_out);

/**
 * `R = U Uᵀ` for a dense upper-triangular `u` with unit rows; entries
 * below the diagonal are ignored.
 *
 * # Safety
 * `u` must hold `dim * dim` doubles and `r_out` must have room for as many.
 */
ElStatus el_build_correlation(const double *u, size_t dim, double *r_out);

/**
 * Log-Jacobian of the map from factor rows to a correlation matrix,
 * evaluated at a dense correlation matrix `r`.
 *
 * # Safety
 * `r` must hold `dim * dim` doubles; `out` must be writable.
 */
ElStatus el_log_jacobian(const double *r, size_t dim, double *out);

/**
 * Metropolis acceptance probability for a proposed first coordinate.
 */
double el_acceptance_probability(double v1, double v1_tilde, size_t exponent);

/**
 * Library version as a static NUL-terminated string.
 */
const char *el_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ELLIPTOPE_H */
