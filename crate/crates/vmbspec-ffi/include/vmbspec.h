#ifndef VMBSPEC_H
#define VMBSPEC_H

/* Generated by cbindgen from crates/vmbspec-ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VmbStatus {
  VMB_STATUS_OK = 0,
  VMB_STATUS_NULL_POINTER = 1,
  VMB_STATUS_INVALID_ARGUMENT = 2,
  VMB_STATUS_BUFFER_TOO_SMALL = 3,
  /**
   * Grid too coarse or a discretization check failed.
   */
  VMB_STATUS_DISCRETIZATION = 4,
  /**
   * Solver failure, ill-conditioning or nonconvergence.
   */
  VMB_STATUS_NUMERICAL = 5,
  VMB_STATUS_PANIC = 6,
} VmbStatus;

typedef enum VmbSpecies {
  /**
   * operator `L` (five-dimensional null space)
   */
  VMB_SPECIES_ONE = 0,
  /**
   * operator `L1` (one-dimensional null space)
   */
  VMB_SPECIES_TWO = 1,
} VmbSpecies;

typedef enum VmbModeKind {
  VMB_MODE_KIND_BOLTZMANN = 0,
  VMB_MODE_KIND_TWO_SPECIES = 1,
  VMB_MODE_KIND_ONE_SPECIES = 2,
} VmbModeKind;

typedef struct VmbCollision VmbCollision;

typedef struct VmbGrid VmbGrid;

typedef struct VmbMode VmbMode;

/**
 * Expansion and transport coefficients.
 */
typedef struct VmbCoefficients {
  double a1_two;
  double a0;
  double a1;
  double a2;
  double a3;
  double b1;
  double b2;
  double kappa1;
  double kappa2;
  double kappa3;
} VmbCoefficients;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t vmb_last_error(char *buf, size_t len);

/**
 * Builds a tensor Gauss-Hermite velocity grid with `n_per_axis` points per axis.
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum VmbStatus vmb_grid_new(size_t n_per_axis, double scale, struct VmbGrid **out);

/**
 * # Safety
 * `grid` must be null or a handle from `vmb_grid_new` not yet freed.
 */
void vmb_grid_free(struct VmbGrid *grid);

/**
 * Number of velocity nodes, or 0 for a null handle.
 *
 * # Safety
 * `grid` must be null or a live handle.
 */
size_t vmb_grid_len(const struct VmbGrid *grid);

/**
 * Assembles the collision operators on `grid`.
 *
 * # Safety
 * `grid` must be a live handle and `out` valid for writing one pointer.
 */
enum VmbStatus vmb_collision_new(const struct VmbGrid *grid, struct VmbCollision **out);

/**
 * # Safety
 * `c` must be null or a handle from `vmb_collision_new` not yet freed.
 */
void vmb_collision_free(struct VmbCollision *c);

/**
 * Spectral gap `mu_h` of `L` or `L1` on the complement of its null space.
 *
 * # Safety
 * `c` must be a live handle and `out` valid for writing.
 */
enum VmbStatus vmb_collision_gap(const struct VmbCollision *c,
                                 enum VmbSpecies species,
                                 double *out);

/**
 * Low-frequency expansion and transport coefficients.
 *
 * # Safety
 * Handles must be live, `c` assembled on `grid`, and `out` valid for writing.
 */
enum VmbStatus vmb_coefficients(const struct VmbGrid *grid,
                                const struct VmbCollision *c,
                                struct VmbCoefficients *out);

/**
 * Generator of the Fourier mode with `|xi| = s` along the first axis.
 *
 * # Safety
 * Handles must be live, `c` assembled on `grid`, and `out` valid for writing one pointer.
 */
enum VmbStatus vmb_mode_new(const struct VmbGrid *grid,
                            const struct VmbCollision *c,
                            enum VmbModeKind kind,
                            double s,
                            struct VmbMode **out);

/**
 * # Safety
 * `m` must be null or a handle from `vmb_mode_new` not yet freed.
 */
void vmb_mode_free(struct VmbMode *m);

/**
 * State dimension: velocity nodes plus four field components when coupled.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t vmb_mode_dim(const struct VmbMode *m);

/**
 * All eigenvalues. `re` and `im` must hold `vmb_mode_dim` entries; `len`
 * is their capacity.
 *
 * # Safety
 * `m` must be live; `re` and `im` valid for `len` writes.
 */
enum VmbStatus vmb_mode_eigenvalues(const struct VmbMode *m, double *re, double *im, size_t len);

/**
 * `e^{tA} y0` in symmetric coordinates (`sqrt(w_a) f(v_a)` followed by the
 * tangent field components). All four arrays have length `len = vmb_mode_dim`.
 *
 * # Safety
 * `m` must be live; the input arrays valid for `len` reads and the output
 * arrays for `len` writes.
 */
enum VmbStatus vmb_mode_propagate(const struct VmbMode *m,
                                  double t,
                                  const double *re_in,
                                  const double *im_in,
                                  double *re_out,
                                  double *im_out,
                                  size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VMBSPEC_H */
