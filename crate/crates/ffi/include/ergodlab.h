#ifndef ERGODLAB_H
#define ERGODLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of the C API.
 */
typedef enum ErgodStatus {
  ERGOD_STATUS_OK = 0,
  ERGOD_STATUS_NULL_POINTER = 1,
  ERGOD_STATUS_INVALID_UTF8 = 2,
  ERGOD_STATUS_PARSE = 3,
  ERGOD_STATUS_DIMENSION_MISMATCH = 4,
  ERGOD_STATUS_PRECONDITION = 5,
  ERGOD_STATUS_RESOURCE_LIMIT = 6,
  ERGOD_STATUS_UNSUPPORTED = 7,
  ERGOD_STATUS_OVERFLOW = 8,
  ERGOD_STATUS_BUFFER_TOO_SMALL = 9,
  ERGOD_STATUS_INTERNAL = 10,
} ErgodStatus;

/**
 * A parsed flow specification.
 */
typedef struct ErgodFlow ErgodFlow;

/**
 * Lacunary cocycle parameters.
 */
typedef struct ErgodLacunary ErgodLacunary;

/**
 * An orbit in progress.
 */
typedef struct ErgodOrbit ErgodOrbit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or NULL.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *ergod_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ergod_version(void);

/**
 * Parses a flow spec (`{"variant": …, "params": …}`).
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum ErgodStatus ergod_flow_from_json(const char *json, struct ErgodFlow **out);

/**
 * # Safety
 * `flow` must come from [`ergod_flow_from_json`] and not be freed twice.
 */
void ergod_flow_free(struct ErgodFlow *flow);

/**
 * State dimension of a flow.
 *
 * # Safety
 * `flow` must be a live handle; `out` must be writable.
 */
enum ErgodStatus ergod_flow_dim(const struct ErgodFlow *flow, size_t *out);

/**
 * Starts an orbit. `start_json` is a JSON array of coordinates (decimal
 * strings or rationals) or NULL for the origin (the identity coset for
 * Heisenberg flows).
 *
 * # Safety
 * `flow` must be a live handle, `start_json` NULL or a NUL-terminated string,
 * `out` writable.
 */
enum ErgodStatus ergod_orbit_new(const struct ErgodFlow *flow,
                                 const char *start_json,
                                 struct ErgodOrbit **out);

/**
 * # Safety
 * `orbit` must come from [`ergod_orbit_new`] and not be freed twice.
 */
void ergod_orbit_free(struct ErgodOrbit *orbit);

/**
 * Writes the current point as reals into `coords[0..len]` and advances one step.
 *
 * # Safety
 * `orbit` must be a live handle and `coords` must hold `len` doubles.
 */
enum ErgodStatus ergod_orbit_next(struct ErgodOrbit *orbit, double *coords, size_t len);

/**
 * Number of steps taken so far.
 *
 * # Safety
 * `orbit` must be a live handle; `out` must be writable.
 */
enum ErgodStatus ergod_orbit_step_index(const struct ErgodOrbit *orbit, uint64_t *out);

/**
 * Birkhoff average of an observable (`{"kind": …}`) over `n` orbit points
 * from the origin.
 *
 * # Safety
 * `flow` must be a live handle, `observable_json` NUL-terminated, outputs writable.
 */
enum ErgodStatus ergod_birkhoff(const struct ErgodFlow *flow,
                                const char *observable_json,
                                uint64_t n,
                                double *out_re,
                                double *out_im);

/**
 * Parses lacunary parameters (`{"K", "weights", "t", "beta"}`).
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be writable.
 */
enum ErgodStatus ergod_lacunary_from_json(const char *json, struct ErgodLacunary **out);

/**
 * # Safety
 * `lac` must come from [`ergod_lacunary_from_json`] and not be freed twice.
 */
void ergod_lacunary_free(struct ErgodLacunary *lac);

/**
 * The cocycle core `h(x)`; `x` is read modulo 1.
 *
 * # Safety
 * `lac` must be a live handle; `out` must be writable.
 */
enum ErgodStatus ergod_lacunary_h_eval(const struct ErgodLacunary *lac, double x, double *out);

/**
 * The transfer function `H(x)`; `x` is read modulo 1.
 *
 * # Safety
 * `lac` must be a live handle; `out` must be writable.
 */
enum ErgodStatus ergod_lacunary_transfer_eval(const struct ErgodLacunary *lac,
                                              double x,
                                              double *out);

/**
 * `F(x, y, z)` with tail tolerance `tol ∈ (0, 1e-3]`.
 *
 * # Safety
 * `out_re` and `out_im` must be writable.
 */
enum ErgodStatus ergod_theta_eval(double x,
                                  double y,
                                  double z,
                                  double tol,
                                  double *out_re,
                                  double *out_im);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* ERGODLAB_H */
