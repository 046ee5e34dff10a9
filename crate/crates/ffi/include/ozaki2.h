/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef OZAKI2_H
#define OZAKI2_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum Oz2Status {
  OZ2_STATUS_OK = 0,
  OZ2_STATUS_NULL_POINTER = 1,
  OZ2_STATUS_CONFIG = 2,
  OZ2_STATUS_DIMENSION = 3,
  OZ2_STATUS_DOMAIN = 4,
  OZ2_STATUS_PANIC = 5,
  OZ2_STATUS_OTHER = 6,
} Oz2Status;

typedef enum Oz2Mode {
  OZ2_MODE_FAST = 0,
  OZ2_MODE_ACCURATE = 1,
} Oz2Mode;

typedef enum Oz2Strategy {
  OZ2_STRATEGY_KARATSUBA = 0,
  OZ2_STRATEGY_EXPAND_ROWS = 1,
  OZ2_STRATEGY_EXPAND_COLS = 2,
} Oz2Strategy;

typedef enum Oz2Precision {
  OZ2_PRECISION_SINGLE = 0,
  OZ2_PRECISION_DOUBLE = 1,
} Oz2Precision;

// Opaque emulation settings.
typedef struct Oz2Config Oz2Config;

// Single-precision complex value, layout-compatible with `float _Complex`.
typedef struct Oz2Complex32 {
  float re;
  float im;
} Oz2Complex32;

// Double-precision complex value, layout-compatible with `double _Complex`.
typedef struct Oz2Complex64 {
  double re;
  double im;
} Oz2Complex64;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// New configuration: accurate mode, default moduli count, Karatsuba
// complex kernel, all cores. Release with `oz2_config_free`.
struct Oz2Config *oz2_config_new(void);

// # Safety
// `cfg` must come from `oz2_config_new` and not be used afterwards. Null is
// ignored.
void oz2_config_free(struct Oz2Config *cfg);

// # Safety
// `cfg` must be a live handle or null.
enum Oz2Status oz2_config_set_mode(struct Oz2Config *cfg, enum Oz2Mode mode);

// Number of moduli; 0 restores the default for each routine.
//
// # Safety
// `cfg` must be a live handle or null.
enum Oz2Status oz2_config_set_num_moduli(struct Oz2Config *cfg, size_t num_moduli);

// # Safety
// `cfg` must be a live handle or null.
enum Oz2Status oz2_config_set_n_block(struct Oz2Config *cfg, size_t n_block);

// # Safety
// `cfg` must be a live handle or null.
enum Oz2Status oz2_config_set_strategy(struct Oz2Config *cfg, enum Oz2Strategy strategy);

// Worker threads; 0 uses the global pool.
//
// # Safety
// `cfg` must be a live handle or null.
enum Oz2Status oz2_config_set_threads(struct Oz2Config *cfg, size_t threads);

// `C = A B`, single-precision real.
//
// # Safety
// `cfg` must be a live handle. `a`, `b` and `c` must be valid for the
// column-major views `m x k`, `k x n` and `m x n` with the given leading
// dimensions; they may be null only when the view is empty. `c` must not
// alias `a` or `b`.
enum Oz2Status oz2_sgemm(const struct Oz2Config *cfg,
                         size_t m,
                         size_t n,
                         size_t k,
                         const float *a,
                         size_t lda,
                         const float *b,
                         size_t ldb,
                         float *c,
                         size_t ldc);

// `C = A B`, double-precision real.
//
// # Safety
// As for `oz2_sgemm`.
enum Oz2Status oz2_dgemm(const struct Oz2Config *cfg,
                         size_t m,
                         size_t n,
                         size_t k,
                         const double *a,
                         size_t lda,
                         const double *b,
                         size_t ldb,
                         double *c,
                         size_t ldc);

// `C = A B`, single-precision complex.
//
// # Safety
// As for `oz2_sgemm`.
enum Oz2Status oz2_cgemm(const struct Oz2Config *cfg,
                         size_t m,
                         size_t n,
                         size_t k,
                         const struct Oz2Complex32 *a,
                         size_t lda,
                         const struct Oz2Complex32 *b,
                         size_t ldb,
                         struct Oz2Complex32 *c,
                         size_t ldc);

// `C = A B`, double-precision complex.
//
// # Safety
// As for `oz2_sgemm`.
enum Oz2Status oz2_zgemm(const struct Oz2Config *cfg,
                         size_t m,
                         size_t n,
                         size_t k,
                         const struct Oz2Complex64 *a,
                         size_t lda,
                         const struct Oz2Complex64 *b,
                         size_t ldb,
                         struct Oz2Complex64 *c,
                         size_t ldc);

// Predicted complex-GEMM throughput in TFLOPS. `num_moduli` 0 selects the
// default for the precision and mode; `c` below zero means `c = num_moduli`.
//
// # Safety
// `out` must be valid for one write, or null.
enum Oz2Status oz2_predict_tflops(enum Oz2Precision precision,
                                  enum Oz2Mode mode,
                                  size_t m,
                                  size_t n,
                                  size_t k,
                                  size_t num_moduli,
                                  double c,
                                  double bandwidth,
                                  double int8_ops,
                                  double *out);

// Static description of a status code.
const char *oz2_status_message(enum Oz2Status status);

// Detail for the most recent failed call on this thread ("" after a
// success). Valid until the next call on the same thread.
const char *oz2_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OZAKI2_H */
