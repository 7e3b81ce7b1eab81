#ifndef KROPINA_H
#define KROPINA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Integration gauge selector for [`kr_trace`].
 */
typedef enum {
  KR_GAUGE_OMEGA_CONSTANT = 0,
  KR_GAUGE_F_ARCLENGTH = 1,
} KrGauge;

/**
 * Result codes. `KR_STATUS_OK` is zero; everything else is a failure.
 */
typedef enum {
  KR_STATUS_OK = 0,
  KR_STATUS_NULL_POINTER = 1,
  KR_STATUS_INVALID_INPUT = 2,
  KR_STATUS_SYNTAX = 3,
  KR_STATUS_DIMENSION_MISMATCH = 4,
  KR_STATUS_DEGENERATE = 5,
  KR_STATUS_KERNEL_DIRECTION = 6,
  KR_STATUS_KERNEL_APPROACH = 7,
  KR_STATUS_NOT_CLOSED = 8,
  KR_STATUS_NOT_FOUND = 9,
  KR_STATUS_NUMERICAL = 10,
  KR_STATUS_IO = 11,
  KR_STATUS_PANIC = 12,
} KrStatus;

/**
 * Opaque Kropina structure.
 */
typedef struct KrStructure KrStructure;

/**
 * Opaque sampled trajectory.
 */
typedef struct KrTrajectory KrTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *kr_version(void);

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next `kr_*` call on the same thread.
 */
const char *kr_last_error_message(void);

/**
 * Loads a catalog model (`heisenberg:1`, `burns-shnider:2`, ...) or a
 * configuration file path.
 *
 * # Safety
 * `spec` must be a valid NUL-terminated string and `out` a valid pointer.
 */
KrStatus kr_structure_load(const char *spec, KrStructure **out);

/**
 * Builds a structure from configuration text.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string and `out` a valid pointer.
 */
KrStatus kr_structure_from_config(const char *text, KrStructure **out);

/**
 * # Safety
 * `s` must be null or a handle returned by this library, not yet freed.
 */
void kr_structure_free(KrStructure *s);

/**
 * Manifold dimension, or 0 for a null handle.
 *
 * # Safety
 * `s` must be null or a live handle.
 */
size_t kr_structure_dim(const KrStructure *s);

/**
 * `F(x, v) = g(v,v)/ω(v)`.
 *
 * # Safety
 * `x` and `v` must point to `n` doubles; `out` must be valid.
 */
KrStatus kr_eval_f(const KrStructure *s, const double *x, const double *v, size_t n, double *out);

/**
 * Integrates the geodesic through `(x, xi)` up to `t_max`.
 *
 * # Safety
 * `x` and `xi` must point to `n` doubles; `out` must be valid.
 */
KrStatus kr_trace(const KrStructure *s,
                  const double *x,
                  const double *xi,
                  size_t n,
                  KrGauge gauge,
                  double t_max,
                  double rtol,
                  double atol,
                  KrTrajectory **out);

/**
 * Integrates the null geodesic of the lifted metric and returns its
 * projection.
 *
 * # Safety
 * `x` and `xi` must point to `n` doubles; `out` must be valid.
 */
KrStatus kr_lift_trace(const KrStructure *s,
                       const double *x,
                       const double *xi,
                       size_t n,
                       double t_max,
                       double rtol,
                       double atol,
                       KrTrajectory **out);

/**
 * Finds a forward geodesic from `p` to `q`; writes its length to `length`.
 *
 * # Safety
 * `p` and `q` must point to `n` doubles; `out` and `length` must be valid.
 */
KrStatus kr_connect(const KrStructure *s,
                    const double *p,
                    const double *q,
                    size_t n,
                    KrTrajectory **out,
                    double *length);

/**
 * Reads a trajectory CSV file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
KrStatus kr_trajectory_read_csv(const char *path, KrTrajectory **out);

/**
 * # Safety
 * `t` must be a live handle and `path` a valid NUL-terminated string.
 */
KrStatus kr_trajectory_write_csv(const KrTrajectory *t, const char *path);

/**
 * # Safety
 * `t` must be null or a handle returned by this library, not yet freed.
 */
void kr_trajectory_free(KrTrajectory *t);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t kr_trajectory_len(const KrTrajectory *t);

/**
 * Dimension of the samples, or 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t kr_trajectory_dim(const KrTrajectory *t);

/**
 * Copies sample `index`. `x` and `xi` receive `dim` doubles each; any
 * output pointer may be null to skip it.
 *
 * # Safety
 * Non-null outputs must be valid for the stated number of writes.
 */
KrStatus kr_trajectory_sample(const KrTrajectory *t,
                              size_t index,
                              double *time,
                              double *x,
                              double *xi,
                              double *f,
                              double *omega_xi);

/**
 * Parameter-wise sup distance over the common time span.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be valid.
 */
KrStatus kr_sup_distance(const KrTrajectory *a, const KrTrajectory *b, double *out);

/**
 * Discrete Fréchet distance after arc-length resampling with `points`
 * intervals; `reverse_second` traverses `b` from its end.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be valid.
 */
KrStatus kr_frechet_distance(const KrTrajectory *a,
                             const KrTrajectory *b,
                             size_t points,
                             bool reverse_second,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KROPINA_H */
