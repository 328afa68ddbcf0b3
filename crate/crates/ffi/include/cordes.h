/* C ABI for the cordes operator-calculus library. */

#ifndef CORDES_H
#define CORDES_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum CordesStatus {
  CORDES_STATUS_OK = 0,
  CORDES_STATUS_NULL_POINTER = 1,
  CORDES_STATUS_INVALID_ARGUMENT = 2,
  CORDES_STATUS_UTF8 = 3,
  CORDES_STATUS_NUMERICAL = 4,
  CORDES_STATUS_IO = 5,
} CordesStatus;

/**
 * Opaque module-operator handle.
 */
typedef struct CordesOp CordesOp;

/**
 * Opaque phase-space symbol handle.
 */
typedef struct CordesSymbol CordesSymbol;

/**
 * Quadrature and finite-difference parameters for symbol recovery;
 * mirrors the library's RecoveryParams.
 */
typedef struct CordesRecoveryParams {
  double t;
  double w;
  uint32_t qx;
  uint32_t qxi;
  uint32_t qeta;
  double delta;
} CordesRecoveryParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the most recent error message for this thread into `buf`
 * (NUL-terminated, truncated to `len` bytes); returns the full message
 * length in bytes, excluding the terminator.
 */
size_t cordes_last_error_message(char *buf, size_t len);

/**
 * Build a symbol by sampling a JSON-described family (the same tagged
 * format the CLI config uses) on an n-dimensional grid with `per_axis`
 * nodes per axis on [-half_width, half_width) and `fibers` numbered
 * fibers.
 */
enum CordesStatus cordes_symbol_create(const char *family_json,
                                       size_t n,
                                       size_t per_axis,
                                       double half_width,
                                       size_t fibers,
                                       struct CordesSymbol **out);

/**
 * Release a symbol handle.
 */
void cordes_symbol_free(struct CordesSymbol *symbol);

/**
 * Kohn-Nirenberg quantization of a symbol.
 */
enum CordesStatus cordes_quantize(const struct CordesSymbol *symbol, struct CordesOp **out);

/**
 * Release an operator handle.
 */
void cordes_op_free(struct CordesOp *op);

/**
 * Module operator norm (supremum of the fiberwise spectral norms).
 */
enum CordesStatus cordes_op_norm(const struct CordesOp *op, double *out);

/**
 * Number of fibers of an operator.
 */
enum CordesStatus cordes_op_fibers(const struct CordesOp *op, size_t *out);

/**
 * Recover the symbol of `op` at one phase-space point (z, zeta), each of
 * length n; writes one complex value per fiber into out_re / out_im
 * (arrays of length `fibers`).
 */
enum CordesStatus cordes_recover_symbol(const struct CordesOp *op,
                                        const double *z,
                                        const double *zeta,
                                        size_t n,
                                        const struct CordesRecoveryParams *params,
                                        double *out_re,
                                        double *out_im);

/**
 * Save a symbol as a JSON manifest plus raw sidecar next to it.
 */
enum CordesStatus cordes_symbol_save(const struct CordesSymbol *symbol, const char *manifest_path);

/**
 * Load a symbol from its JSON manifest.
 */
enum CordesStatus cordes_symbol_load(const char *manifest_path, struct CordesSymbol **out);

/**
 * Save an operator as a JSON manifest plus raw sidecar next to it.
 */
enum CordesStatus cordes_op_save(const struct CordesOp *op, const char *manifest_path);

/**
 * Load an operator from its JSON manifest.
 */
enum CordesStatus cordes_op_load(const char *manifest_path, struct CordesOp **out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CORDES_H */
