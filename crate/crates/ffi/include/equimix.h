#ifndef EQUIMIX_H
#define EQUIMIX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  EQX_STATUS_OK = 0,
  EQX_STATUS_NULL_POINTER = 1,
  EQX_STATUS_INVALID_ARGUMENT = 2,
  EQX_STATUS_TOO_LARGE = 3,
  EQX_STATUS_NUMERICAL = 4,
  EQX_STATUS_BUFFER_TOO_SMALL = 5,
  EQX_STATUS_PANIC = 6,
} EqxStatus;

typedef enum {
  EQX_CHAIN_NAIVE = 0,
  EQX_CHAIN_EQUI_ENERGY = 1,
  EQX_CHAIN_SMALL_WORLD = 2,
} EqxChain;

/**
 * State space of a built kernel. Warm-up kernels are always full.
 */
typedef enum {
  /**
   * Signed energy classes.
   */
  EQX_SPACE_LUMPED = 0,
  /**
   * Unsigned levels.
   */
  EQX_SPACE_PROJECTED = 1,
  /**
   * Individual configurations.
   */
  EQX_SPACE_FULL = 2,
} EqxSpace;

typedef enum {
  EQX_OBSERVABLE_ONE = 0,
  EQX_OBSERVABLE_MAGNETIZATION = 1,
  EQX_OBSERVABLE_ABS_MAGNETIZATION = 2,
  EQX_OBSERVABLE_QUADRUPOLE = 3,
  EQX_OBSERVABLE_POSITIVE = 4,
} EqxObservable;

/**
 * Opaque kernel handle.
 */
typedef struct EqxKernel EqxKernel;

/**
 * Opaque model handle.
 */
typedef struct EqxModel EqxModel;

typedef struct {
  /**
   * `1 - max(lambda_1, |lambda_min|)`.
   */
  double gap;
  double one_minus_lambda1;
  double lambda1;
  double lambda_min;
  /**
   * 1 when `one_minus_lambda1` came from the odd-sector refinement.
   */
  int32_t refined;
  /**
   * 1 when `one_minus_lambda1` is below the eigensolver resolution.
   */
  int32_t below_resolution;
} EqxGap;

typedef struct {
  double estimate;
  double avar;
  double avar_se;
  double standard_error;
  uint64_t samples;
} EqxEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *eqx_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t eqx_last_error(char *buf, size_t len);

/**
 * Mean-field Ising model on `n` sites (`n` even).
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
EqxStatus eqx_model_ising(size_t n, double beta, EqxModel **out);

/**
 * Mean-field Blume-Emery-Griffiths model on `n` sites (`n` even).
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
EqxStatus eqx_model_beg(size_t n, double beta, double k, EqxModel **out);

/**
 * Warming-up target on `{-n, ..., n}`.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
EqxStatus eqx_model_warmup(size_t n, double theta, double epsilon, EqxModel **out);

/**
 * Sets the local and global-flip weights of the equi-energy mixture.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
EqxStatus eqx_model_set_mixture(EqxModel *model, double p1, double p2);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void eqx_model_free(EqxModel *model);

/**
 * Builds the transition kernel of `chain` for `model` on `space`.
 *
 * # Safety
 * `model` must be a live handle; `out` valid for a pointer write.
 */
EqxStatus eqx_kernel_build(const EqxModel *model, EqxChain chain, EqxSpace space, EqxKernel **out);

/**
 * # Safety
 * `kernel` must be null or a handle not yet freed.
 */
void eqx_kernel_free(EqxKernel *kernel);

/**
 * Number of states of `kernel`, or 0 for a null handle.
 *
 * # Safety
 * `kernel` must be null or a live handle.
 */
size_t eqx_kernel_size(const EqxKernel *kernel);

/**
 * Writes the dense row-major matrix (`size * size` entries) into `buf`.
 *
 * # Safety
 * `kernel` must be a live handle and `buf` valid for `len` doubles.
 */
EqxStatus eqx_kernel_dense(const EqxKernel *kernel, double *buf, size_t len);

/**
 * Writes the stationary distribution (`size` entries) into `buf`.
 *
 * # Safety
 * `kernel` must be a live handle and `buf` valid for `len` doubles.
 */
EqxStatus eqx_kernel_stationary(const EqxKernel *kernel, double *buf, size_t len);

/**
 * Spectral gap of `kernel`.
 *
 * # Safety
 * `kernel` must be a live handle; `out` valid for a write.
 */
EqxStatus eqx_kernel_gap(const EqxKernel *kernel, EqxGap *out);

/**
 * Runs one trajectory of `steps` steps (10% burn-in) from a random start.
 *
 * # Safety
 * `model` must be a live handle; `out` valid for a write.
 */
EqxStatus eqx_simulate(const EqxModel *model,
                       EqxChain chain,
                       EqxObservable observable,
                       uint64_t steps,
                       uint64_t seed,
                       uint64_t stream,
                       EqxEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EQUIMIX_H */
