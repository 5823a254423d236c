#ifndef NHL_H
#define NHL_H

/* Generated by cbindgen from src/lib.rs; edits are overwritten. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NhlStatus {
  NHL_STATUS_OK = 0,
  NHL_STATUS_NULL_POINTER = 1,
  NHL_STATUS_INVALID_ARGUMENT = 2,
  NHL_STATUS_UNSUPPORTED = 3,
  NHL_STATUS_NUMERICAL = 4,
  NHL_STATUS_TOO_LARGE = 5,
  NHL_STATUS_PANIC = 6,
} NhlStatus;

typedef enum NhlKernelFamily {
  NHL_KERNEL_FAMILY_INDICATOR = 0,
  NHL_KERNEL_FAMILY_GAUSSIAN = 1,
} NhlKernelFamily;

typedef enum NhlOperatorMode {
  NHL_OPERATOR_MODE_FULL_SPACE = 0,
  NHL_OPERATOR_MODE_REGIONAL = 1,
} NhlOperatorMode;

/**
 * Opaque kernel handle.
 */
typedef struct NhlKernel NhlKernel;

/**
 * Opaque operator handle.
 */
typedef struct NhlOperator NhlOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *nhl_last_error(void);

/**
 * Unit-mass indicator (`width` = radius) or gaussian (`width` = sigma) kernel.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum NhlStatus nhl_kernel_new(enum NhlKernelFamily family,
                              uint32_t dim,
                              double width,
                              struct NhlKernel **out);

/**
 * Truncated fractional kernel of order `s`; a cutoff `<= 0` is left unset.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum NhlStatus nhl_kernel_new_fractional(uint32_t dim,
                                         double s,
                                         double rmin,
                                         double rmax,
                                         struct NhlKernel **out);

/**
 * `ρ(r)` for a vector `r` of length `len` (the kernel dimension).
 *
 * # Safety
 * `r` must point to `len` doubles, `out` must be valid for writes.
 */
enum NhlStatus nhl_kernel_eval(const struct NhlKernel *kernel,
                               const double *r,
                               size_t len,
                               double *out);

/**
 * Total mass `∫ρ`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum NhlStatus nhl_kernel_mass(const struct NhlKernel *kernel, double *out);

/**
 * # Safety
 * `kernel` must come from `nhl_kernel_new*` and not be used afterwards.
 */
void nhl_kernel_free(struct NhlKernel *kernel);

/**
 * Assembles the operator on the node grid `[lower, upper]` (arrays of length
 * `dim`) with spacing `h`.
 *
 * # Safety
 * `lower`/`upper` must point to `dim` doubles, `out` must be valid for writes.
 */
enum NhlStatus nhl_operator_assemble(const struct NhlKernel *kernel,
                                     uint32_t dim,
                                     const double *lower,
                                     const double *upper,
                                     double h,
                                     enum NhlOperatorMode mode,
                                     struct NhlOperator **out);

/**
 * Number of grid nodes.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum NhlStatus nhl_operator_len(const struct NhlOperator *op, size_t *out);

/**
 * `out = L values`. Full-space operators use the far field
 * `(far_minus, far_plus)`; regional operators ignore it.
 *
 * # Safety
 * `values` and `out` must each hold `len` doubles.
 */
enum NhlStatus nhl_operator_apply(const struct NhlOperator *op,
                                  const double *values,
                                  size_t len,
                                  double far_minus,
                                  double far_plus,
                                  double *out);

/**
 * `safety / max row mass`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum NhlStatus nhl_operator_stable_dt(const struct NhlOperator *op, double safety, double *out);

/**
 * # Safety
 * `op` must come from `nhl_operator_assemble` and not be used afterwards.
 */
void nhl_operator_free(struct NhlOperator *op);

/**
 * Regional form `c_n/2 ∬ (u(x)-u(y))²/|x-y|^{1+2s}` of cell values on `[a, b]`
 * split into `cells` cells.
 *
 * # Safety
 * `values` must hold `cells` doubles, `out` must be valid for writes.
 */
enum NhlStatus nhl_energy_form(const double *values,
                               size_t cells,
                               double a,
                               double b,
                               double s,
                               double cn,
                               double *out);

/**
 * Smallest nonzero eigenvalue of the regional form on `[a, b]`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum NhlStatus nhl_lambda2(double a, double b, size_t cells, double s, double cn, double *out);

/**
 * `max_{x,y} u(y) - u(x) - 2φ(|y-x|/2) - ε e^{ct}(1 + x² + y²)` for 1D node
 * values `u` on `lower + k h` and profile values `phi` on `k * phi_spacing`.
 * `pair` receives the maximizing node indices `(x, y)` when non-null.
 *
 * # Safety
 * `u` must hold `len` doubles, `phi` `phi_len` doubles; `out` must be valid
 * for writes and `pair`, if non-null, for two `usize`.
 */
enum NhlStatus nhl_z_epsilon_max(const double *u,
                                 size_t len,
                                 double lower,
                                 double h,
                                 double time,
                                 const double *phi,
                                 size_t phi_len,
                                 double phi_spacing,
                                 double eps,
                                 double c,
                                 double *out,
                                 size_t *pair);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NHL_H */
