#ifndef CK_LAB_H
#define CK_LAB_H

/* Generated by cbindgen from the ck-lab-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CkStatus {
  CK_STATUS_OK = 0,
  CK_STATUS_NULL_POINTER = 1,
  CK_STATUS_INVALID_ARGUMENT = 2,
  CK_STATUS_DOMAIN = 3,
  CK_STATUS_DEGENERATE = 4,
  CK_STATUS_NUMERICAL = 5,
  CK_STATUS_NOT_STRAIGHTENABLE = 6,
  CK_STATUS_GEOMETRY = 7,
  CK_STATUS_PANIC = 99,
} CkStatus;

// A family of shaded `δ`-tubes.
typedef struct CkFamily CkFamily;

// A phase function.
typedef struct CkPhase CkPhase;

typedef struct CkConditionReport {
  double h1_sigma_min;
  double h2_det;
  double lambda_hat;
  double residual;
  bool holds;
} CkConditionReport;

typedef struct CkConiness {
  double det;
  double leading;
  double rel_err;
  double noise_floor;
} CkConiness;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
uintptr_t ck_last_error(char *buf, uintptr_t len);

// Built-in phase `name` (`rest`, `bochner_riesz`, `tan`, `worst`) in
// dimension `n`.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum CkStatus ck_phase_builtin(const char *name, uintptr_t n, struct CkPhase **out_phase);

// # Safety
// `phase` must come from [`ck_phase_builtin`] and not be used afterwards.
void ck_phase_free(struct CkPhase *phase);

// The dimension `n`, or 0 for a null handle.
//
// # Safety
// `phase` must be null or a live handle.
uintptr_t ck_phase_dim(const struct CkPhase *phase);

// Pointwise rank, curvature and proportionality check. `x` and `xi` have
// `n − 1` entries.
//
// # Safety
// Pointers must be valid for the stated lengths.
enum CkStatus ck_check_bourgain(const struct CkPhase *phase,
                                const double *x,
                                double t,
                                const double *xi,
                                double tol,
                                struct CkConditionReport *report);

// Residual of the `(A, B, c)` identity of a built-in phase.
//
// # Safety
// Pointers must be valid for the stated lengths.
enum CkStatus ck_check_abc(const struct CkPhase *phase,
                           const double *x,
                           double t,
                           const double *xi,
                           double *residual);

// Traces `∇_ξφ = v` at `count` heights; writes `count × (n − 1)` values
// row by row into `points`.
//
// # Safety
// Pointers must be valid for the stated lengths.
enum CkStatus ck_trace_curve(const struct CkPhase *phase,
                             const double *xi,
                             const double *v,
                             const double *t_grid,
                             uintptr_t count,
                             double *points);

// Fitted error order of the straightening anchored at `(ξ₀, v₀)`.
// `exact` is set when every error is below the exact threshold, in which
// case `slope` is NaN.
//
// # Safety
// Pointers must be valid for the stated lengths.
enum CkStatus ck_straightening_order(const struct CkPhase *phase,
                                     const double *xi0,
                                     const double *v0,
                                     const double *radii,
                                     uintptr_t radii_count,
                                     uintptr_t samples,
                                     uint64_t seed,
                                     double *slope,
                                     bool *exact);

// Tangent-frame determinant of the tan pencil through `𝐩 = (p, t₀)`;
// `p` has `n − 1` entries.
//
// # Safety
// Pointers must be valid for the stated lengths.
enum CkStatus ck_tan_coniness(uintptr_t n, double t0, const double *p, struct CkConiness *report);

// Empty family over `phase`.
//
// # Safety
// `phase` must be live; `out` writable.
enum CkStatus ck_family_new(const struct CkPhase *phase,
                            double delta,
                            struct CkFamily **out_family);

// Generated test family: `mode` 0 is the grid family, 1 the Cantor family.
//
// # Safety
// `phase` must be live; `out` writable.
enum CkStatus ck_family_sticky(const struct CkPhase *phase,
                               double delta,
                               uint32_t mode,
                               uint64_t seed,
                               struct CkFamily **out_family);

// Appends the tube at `(ξ, v)` shaded on `[t_lo, t_hi]`.
//
// # Safety
// `family` must be live; `xi` and `v` have `n − 1` entries.
enum CkStatus ck_family_push(struct CkFamily *family,
                             const double *xi,
                             const double *v,
                             double t_lo,
                             double t_hi);

// # Safety
// `family` must be null or live.
uintptr_t ck_family_len(const struct CkFamily *family);

// Voxel volume of the union of the shaded tubes on a `grid_resⁿ` grid.
//
// # Safety
// `family` must be live; `volume` writable.
enum CkStatus ck_family_union_volume(const struct CkFamily *family,
                                     uintptr_t grid_res,
                                     double *volume);

// # Safety
// `family` must come from this library and not be used afterwards.
void ck_family_free(struct CkFamily *family);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CK_LAB_H */
