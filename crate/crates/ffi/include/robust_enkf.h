#ifndef ROBUST_ENKF_H
#define ROBUST_ENKF_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum ReStatus {
  RE_STATUS_OK = 0,
  RE_STATUS_NULL_POINTER = 1,
  RE_STATUS_INVALID_ARGUMENT = 2,
  RE_STATUS_DIMENSION_MISMATCH = 3,
  RE_STATUS_NUMERICAL_FAILURE = 4,
  RE_STATUS_DIVERGENCE = 5,
  RE_STATUS_IO = 6,
  RE_STATUS_PARSE = 7,
  RE_STATUS_PANIC = 8,
} ReStatus;

typedef enum RePde {
  RE_PDE_HEAT = 0,
  RE_PDE_BURGERS = 1,
} RePde;

typedef enum ReBoundary {
  RE_BOUNDARY_PERIODIC = 0,
  RE_BOUNDARY_DIRICHLET = 1,
} ReBoundary;

/**
 * Opaque handle to a learned (or exact) value matrix.
 */
typedef struct ReGain ReGain;

/**
 * Opaque handle to a robust control law.
 */
typedef struct ReLaw ReLaw;

/**
 * Opaque simulator handle.
 */
typedef struct ReSimulator ReSimulator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len - 1` bytes). Returns the full message
 * length in bytes, so a caller can size a buffer with `len = 0`.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or null when `len` is 0.
 */
size_t re_last_error_message(char *buf, size_t len);

/**
 * Static description of a status code.
 */
const char *re_status_str(enum ReStatus status);

/**
 * Finite-difference heat or Burgers simulator on `p` points of `[0, length)`
 * with `m` piecewise-constant actuators.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum ReStatus re_simulator_new_pde(enum RePde pde,
                                   double nu,
                                   size_t p,
                                   double length,
                                   size_t m,
                                   enum ReBoundary boundary,
                                   struct ReSimulator **out);

/**
 * `dx/dt = A x + B u` with `A` n×n and `B` n×m.
 *
 * # Safety
 * `a` and `b` must hold `n*n` and `n*m` doubles; `out` must be valid.
 */
enum ReStatus re_simulator_new_linear(size_t n,
                                      size_t m,
                                      const double *a,
                                      const double *b,
                                      struct ReSimulator **out);

/**
 * # Safety
 * `sim` must be a live handle; `n` and `m` valid or null.
 */
enum ReStatus re_simulator_dims(const struct ReSimulator *sim, size_t *n, size_t *m);

/**
 * Writes `S(x, u)` into `out` (length n).
 *
 * # Safety
 * `x` and `out` must hold n doubles, `u` m doubles.
 */
enum ReStatus re_simulator_eval(const struct ReSimulator *sim,
                                const double *x,
                                const double *u,
                                double *out);

/**
 * # Safety
 * `sim` must come from a `re_simulator_new_*` call and not be used again.
 */
void re_simulator_free(struct ReSimulator *sim);

/**
 * Exact stabilizing ARE solution for `(A, B)` with cost weights `C` (n×n),
 * `R` (m×m) and `G` (n×n).
 *
 * # Safety
 * Matrix pointers must hold the stated number of doubles; `out` valid.
 */
enum ReStatus re_gain_solve_are(size_t n,
                                size_t m,
                                const double *a,
                                const double *b,
                                const double *c,
                                const double *r,
                                const double *g,
                                struct ReGain **out);

/**
 * Dual EnKF on a linear model; the terminal covariance is `G⁻¹`.
 *
 * # Safety
 * Matrix pointers must hold the stated number of doubles; `out` valid.
 */
enum ReStatus re_gain_train_linear(size_t n,
                                   size_t m,
                                   const double *a,
                                   const double *b,
                                   const double *c,
                                   const double *r,
                                   const double *g,
                                   size_t particles,
                                   double horizon,
                                   double dt,
                                   uint64_t seed,
                                   struct ReGain **out);

/**
 * Dual EnKF driven only by calls to `sim`.
 *
 * # Safety
 * `sim` must be live; `c`, `g` hold n×n and `r` m×m doubles; `out` valid.
 */
enum ReStatus re_gain_train_nonlinear(const struct ReSimulator *sim,
                                      const double *c,
                                      const double *r,
                                      const double *g,
                                      size_t particles,
                                      double horizon,
                                      double dt,
                                      uint64_t seed,
                                      struct ReGain **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` valid.
 */
enum ReStatus re_gain_load(const char *path_, struct ReGain **out);

/**
 * # Safety
 * `gain` must be live; `path` a NUL-terminated string.
 */
enum ReStatus re_gain_save(const struct ReGain *gain, const char *path_);

/**
 * State dimension of the gain, or 0 for a null handle.
 *
 * # Safety
 * `gain` must be live or null.
 */
size_t re_gain_dim(const struct ReGain *gain);

/**
 * Copies the value matrix `P̄` (n×n, column-major) into `out`.
 *
 * # Safety
 * `out` must hold n*n doubles.
 */
enum ReStatus re_gain_value_matrix(const struct ReGain *gain, double *out);

/**
 * # Safety
 * `gain` must come from a `re_gain_*` constructor and not be used again.
 */
void re_gain_free(struct ReGain *gain);

/**
 * Robust control law `u = ū + u_d` with constant `lambda` and
 * regularization `r_reg`. `use_input_map = 0` estimates `B` from simulator
 * calls instead of reading it from the simulator. The gain is copied.
 *
 * # Safety
 * `gain` must be live; `c`, `g` hold n×n and `r` m×m doubles; `out` valid.
 */
enum ReStatus re_law_new(const struct ReGain *gain,
                         size_t m,
                         const double *c,
                         const double *r,
                         const double *g,
                         double lambda,
                         double r_reg,
                         int32_t use_input_map,
                         struct ReLaw **out);

/**
 * Writes the control at `(t, x)` into `u` (length m).
 *
 * # Safety
 * `law` and `sim` must be live; `x` holds n and `u` m doubles.
 */
enum ReStatus re_law_control(const struct ReLaw *law,
                             const struct ReSimulator *sim,
                             double t,
                             const double *x,
                             double *u);

/**
 * # Safety
 * `law` must come from [`re_law_new`] and not be used again.
 */
void re_law_free(struct ReLaw *law);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBUST_ENKF_H */
