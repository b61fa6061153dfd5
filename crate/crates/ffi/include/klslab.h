#ifndef KLSLAB_H
#define KLSLAB_H

/* Generated with cbindgen:0.27.0 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Scalar property of a body.
 */
typedef enum KlsBodyScalar {
  KLS_BODY_SCALAR_VOLUME = 0,
  KLS_BODY_SCALAR_SURFACE_AREA = 1,
  KLS_BODY_SCALAR_IN_RADIUS = 2,
  KLS_BODY_SCALAR_OUTER_RADIUS = 3,
} KlsBodyScalar;

/**
 * Result of every fallible call.
 */
typedef enum KlsStatus {
  KLS_STATUS_OK = 0,
  KLS_STATUS_NULL_POINTER = 1,
  KLS_STATUS_INVALID_UTF8 = 2,
  KLS_STATUS_INVALID_INPUT = 3,
  KLS_STATUS_INVALID_PARAMETER = 4,
  KLS_STATUS_NON_SMOOTH_POINT = 5,
  KLS_STATUS_UNSUPPORTED_CURVATURE = 6,
  KLS_STATUS_UNSUPPORTED = 7,
  KLS_STATUS_DEGENERATE_CLOUD = 8,
  KLS_STATUS_METHOD_SWITCH = 9,
  KLS_STATUS_DEGENERATE_NORMAL = 10,
  KLS_STATUS_INSUFFICIENT_SAMPLES = 11,
  KLS_STATUS_INVALID_MEASURE = 12,
  KLS_STATUS_PRECONDITION = 13,
  KLS_STATUS_INTERNAL_CONSISTENCY = 14,
  KLS_STATUS_RESOLUTION = 15,
  KLS_STATUS_DOMAIN = 16,
  KLS_STATUS_CONFIG = 17,
  KLS_STATUS_IO = 18,
  /**
   * A command started but failed part way; see [`kls_last_error`].
   */
  KLS_STATUS_RUN_FAILED = 19,
  KLS_STATUS_PANIC = 20,
} KlsStatus;

/**
 * Opaque convex body.
 */
typedef struct KlsBody KlsBody;

/**
 * Opaque log-concave measure.
 */
typedef struct KlsMeasure KlsMeasure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *kls_version(void);

/**
 * Message of the last failed call on this thread; empty if none. Valid
 * until the next failing call on the same thread.
 */
const char *kls_last_error(void);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void kls_string_free(char *s);

/**
 * Builds a body from a JSON descriptor `{"kind", "dim", "params"}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` a valid pointer.
 */
enum KlsStatus kls_body_from_json(const char *json, struct KlsBody **out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum KlsStatus kls_body_ball(size_t dim, double radius, struct KlsBody **out);

/**
 * `[-half_side, half_side]^dim`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum KlsStatus kls_body_cube(size_t dim, double half_side, struct KlsBody **out);

/**
 * `scale · B_p^dim`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum KlsStatus kls_body_lp_ball(size_t dim, double p, double scale, struct KlsBody **out);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum KlsStatus kls_body_simplex(size_t dim, double scale, struct KlsBody **out);

/**
 * # Safety
 * `semi_axes` must point to `dim` doubles; `out` must be a valid pointer.
 */
enum KlsStatus kls_body_ellipsoid(const double *semi_axes, size_t dim, struct KlsBody **out);

/**
 * Null is ignored.
 *
 * # Safety
 * `body` must come from a constructor and not have been freed.
 */
void kls_body_free(struct KlsBody *body);

/**
 * Dimension, or 0 for a null handle.
 *
 * # Safety
 * `body` must be null or a live handle.
 */
size_t kls_body_dim(const struct KlsBody *body);

/**
 * Human-readable label; release with [`kls_string_free`].
 *
 * # Safety
 * `body` must be a live handle; `out` a valid pointer.
 */
enum KlsStatus kls_body_label(const struct KlsBody *body, char **out);

/**
 * JSON descriptor that rebuilds the body; release with [`kls_string_free`].
 *
 * # Safety
 * `body` must be a live handle; `out` a valid pointer.
 */
enum KlsStatus kls_body_descriptor_json(const struct KlsBody *body, char **out);

/**
 * # Safety
 * `body` must be a live handle; `out` a valid pointer.
 */
enum KlsStatus kls_body_scalar(const struct KlsBody *body, enum KlsBodyScalar which, double *out);

/**
 * Gauge `‖x‖_K`.
 *
 * # Safety
 * `x` must point to `n` doubles; `body` a live handle; `out` a valid pointer.
 */
enum KlsStatus kls_body_gauge(const struct KlsBody *body, const double *x, size_t n, double *out);

/**
 * Gradient of the gauge at `x`, written to `grad[0..n]`.
 *
 * # Safety
 * `x` and `grad` must point to `n` doubles; `body` must be a live handle.
 */
enum KlsStatus kls_body_gauge_gradient(const struct KlsBody *body,
                                       const double *x,
                                       size_t n,
                                       double *grad);

/**
 * Support function `h_K(θ)`.
 *
 * # Safety
 * `theta` must point to `n` doubles; `body` a live handle; `out` a valid pointer.
 */
enum KlsStatus kls_body_support(const struct KlsBody *body,
                                const double *theta,
                                size_t n,
                                double *out);

/**
 * Mean curvature at the boundary point along `y`.
 *
 * # Safety
 * `y` must point to `n` doubles; `body` a live handle; `out` a valid pointer.
 */
enum KlsStatus kls_body_mean_curvature(const struct KlsBody *body,
                                       const double *y,
                                       size_t n,
                                       double *out);

/**
 * Operator norm of the differential of `x ↦ x/‖x‖_K`'s adjoint at `x`.
 *
 * # Safety
 * `x` must point to `n` doubles; `body` a live handle; `out` a valid pointer.
 */
enum KlsStatus kls_radial_op_norm(const struct KlsBody *body,
                                  const double *x,
                                  size_t n,
                                  double *out);

/**
 * Neumann Poincaré constant of a planar body at grid spacing `h`, with its
 * error estimate. `error_bound` may be null.
 *
 * # Safety
 * `body` must be a live handle; `value` a valid pointer.
 */
enum KlsStatus kls_p_neumann_2d(const struct KlsBody *body,
                                double h,
                                double *value,
                                double *error_bound);

/**
 * Dirichlet Poincaré constant of the unit ball in `R^n`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum KlsStatus kls_p_dirichlet_ball(size_t n, double *out);

/**
 * Builds a measure from a JSON descriptor such as
 * `{"type": "mu_p", "p": 1.5, "n": 4}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` a valid pointer.
 */
enum KlsStatus kls_measure_from_json(const char *json, struct KlsMeasure **out);

/**
 * Null is ignored.
 *
 * # Safety
 * `measure` must come from [`kls_measure_from_json`] and not have been freed.
 */
void kls_measure_free(struct KlsMeasure *measure);

/**
 * Dimension, or 0 for a null handle.
 *
 * # Safety
 * `measure` must be null or a live handle.
 */
size_t kls_measure_dim(const struct KlsMeasure *measure);

/**
 * Gauge of the K. Ball body `K_μ` at `x`.
 *
 * # Safety
 * `x` must point to `n` doubles; `measure` a live handle; `out` a valid pointer.
 */
enum KlsStatus kls_kmu_gauge(const struct KlsMeasure *measure,
                             const double *x,
                             size_t n,
                             double *out);

/**
 * Volume of `K_μ` by sphere quadrature with `m` nodes per coordinate
 * (`n <= 3`), or in closed form when `m == 0`.
 *
 * # Safety
 * `measure` must be a live handle; `out` a valid pointer.
 */
enum KlsStatus kls_kmu_volume(const struct KlsMeasure *measure, size_t m, double *out);

/**
 * `sup f / (e^n f(0))` for a barycentred measure.
 *
 * # Safety
 * `measure` must be a live handle; `out` a valid pointer.
 */
enum KlsStatus kls_fradelizi_ratio(const struct KlsMeasure *measure, double *out);

/**
 * Runs a command (`verify`, `poincare2d`, `ballbody`, `lp-scaling`, `fvr`,
 * `report`) on a TOML config, exactly as the `klslab` binary would. When
 * the config names no `out` file, the report is returned in `out_text`
 * (release with [`kls_string_free`]); otherwise `out_text` is set to null.
 * `exit_code` receives the code the binary would exit with. A config error
 * returns `KLS_STATUS_CONFIG`, a failure during the run
 * `KLS_STATUS_RUN_FAILED`; failing verdicts return `KLS_STATUS_OK` with
 * exit code 1.
 *
 * # Safety
 * `command` and `config_toml` must be NUL-terminated strings; `out_text`
 * and `exit_code` valid pointers.
 */
enum KlsStatus kls_run(const char *command,
                       const char *config_toml,
                       char **out_text,
                       int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KLSLAB_H */
