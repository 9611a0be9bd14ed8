#ifndef GAINLOSS_H
#define GAINLOSS_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GlStatus {
  GL_STATUS_OK = 0,
  GL_STATUS_NULL_POINTER = 1,
  GL_STATUS_INVALID_ARGUMENT = 2,
  GL_STATUS_DOMAIN = 3,
  GL_STATUS_INTEGRATION = 4,
  GL_STATUS_BLOW_UP = 5,
  GL_STATUS_PANIC = 6,
  GL_STATUS_BUFFER_TOO_SMALL = 7,
} GlStatus;

typedef enum GlCoords {
  GL_COORDS_X = 0,
  GL_COORDS_Z = 1,
  GL_COORDS_POLAR = 2,
} GlCoords;

/**
 * Opaque model handle.
 */
typedef struct GlSystem GlSystem;

/**
 * Opaque trajectory handle.
 */
typedef struct GlTrajectory GlTrajectory;

typedef struct GlJacobi {
  double sn;
  double cn;
  double dn;
  double am;
} GlJacobi;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t gl_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gl_version(void);

/**
 * Builds a catalog model from a TOML model table, e.g.
 * `name = "quartic_translational"` plus an optional `[params]` table.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum GlStatus gl_system_from_toml(const char *toml, struct GlSystem **out);

/**
 * # Safety
 * `sys` must be null or a handle from [`gl_system_from_toml`], freed once.
 */
void gl_system_free(struct GlSystem *sys);

/**
 * Number of coordinates `2m`.
 *
 * # Safety
 * `sys` must be a live handle; `out` must be writable.
 */
enum GlStatus gl_system_dim(const struct GlSystem *sys, size_t *out);

/**
 * Energy `H` of a state with `n` coordinates and velocities.
 *
 * # Safety
 * `q` and `v` must point to `n` doubles; `out` must be writable.
 */
enum GlStatus gl_system_energy(const struct GlSystem *sys,
                               enum GlCoords coords,
                               const double *q,
                               const double *v,
                               size_t n,
                               double *out);

/**
 * Accelerations in the chart of the state, written to `accel` (`n` doubles).
 *
 * # Safety
 * `q`, `v` and `accel` must point to `n` doubles.
 */
enum GlStatus gl_system_eom(const struct GlSystem *sys,
                            enum GlCoords coords,
                            double t,
                            const double *q,
                            const double *v,
                            size_t n,
                            double *accel);

/**
 * Integrates from `(t0, q, v)` to `t_end` with the adaptive default method,
 * sampling every `output_dt`. Non-positive `rtol`, `atol` or `output_dt`
 * select the defaults. On blow-up the status is [`GlStatus::BlowUp`] and
 * `*out` still receives the samples recorded before the failure.
 *
 * # Safety
 * `q` and `v` must point to `n` doubles; `out` must be writable.
 */
enum GlStatus gl_integrate(const struct GlSystem *sys,
                           enum GlCoords coords,
                           double t0,
                           const double *q,
                           const double *v,
                           size_t n,
                           double t_end,
                           double rtol,
                           double atol,
                           double output_dt,
                           struct GlTrajectory **out);

/**
 * # Safety
 * `traj` must be null or a handle from [`gl_integrate`], freed once.
 */
void gl_trajectory_free(struct GlTrajectory *traj);

/**
 * Number of samples and coordinates per sample.
 *
 * # Safety
 * `traj` must be live; `len` and `dim` must be writable.
 */
enum GlStatus gl_trajectory_shape(const struct GlTrajectory *traj, size_t *len, size_t *dim);

/**
 * Sample `index`: time, coordinates and velocities (`n` doubles each).
 *
 * # Safety
 * `t` must be writable; `q` and `v` must point to `n` writable doubles.
 */
enum GlStatus gl_trajectory_sample(const struct GlTrajectory *traj,
                                   size_t index,
                                   double *t,
                                   double *q,
                                   double *v,
                                   size_t n);

/**
 * Invariants (`H` then the symmetry charges) at sample `index`; `count`
 * receives how many there are even when `cap` is too small.
 *
 * # Safety
 * `out` must point to `cap` writable doubles; `count` must be writable.
 */
enum GlStatus gl_trajectory_invariants(const struct GlTrajectory *traj,
                                       size_t index,
                                       double *out,
                                       size_t cap,
                                       size_t *count);

/**
 * Jacobi elliptic functions of `u` with parameter `m = k²`.
 *
 * # Safety
 * `out` must be writable.
 */
enum GlStatus gl_jacobi(double u, double m, struct GlJacobi *out);

/**
 * The `n + 1` energies of the sextic problem, ascending; real and imaginary
 * parts go to `re` and `im` (`cap` entries each).
 *
 * # Safety
 * `re` and `im` must point to `cap` writable doubles; `count` must be writable.
 */
enum GlStatus gl_qes_spectrum(double atilde,
                              double btilde,
                              size_t n,
                              uint8_t p,
                              double *re,
                              double *im,
                              size_t cap,
                              size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAINLOSS_H */
