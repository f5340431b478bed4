#ifndef WILLMORE_H
#define WILLMORE_H

/* generated by cbindgen from willmore-ffi; do not edit */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes shared with the CLI exit codes.
 */
typedef enum WmStatus {
  WM_STATUS_OK = 0,
  WM_STATUS_IO = 2,
  WM_STATUS_CHECK_FAILED = 3,
  WM_STATUS_CONVERGENCE = 4,
  WM_STATUS_PARAMETER = 5,
  WM_STATUS_GEOMETRY = 6,
  WM_STATUS_GAUGE = 7,
  WM_STATUS_NULL_POINTER = 8,
  WM_STATUS_PANIC = 9,
} WmStatus;

/**
 * Opaque immersion handle.
 */
typedef struct WmImmersion WmImmersion;

/**
 * Relaxed-energy breakdown at one viscosity value.
 */
typedef struct WmEnergyBreakdown {
  double willmore;
  double smoother;
  double onofri;
  double total;
  double area;
  double sigma_derivative;
} WmEnergyBreakdown;

/**
 * Bending-energy concentration ball.
 */
typedef struct WmBubble {
  uint32_t center_vertex;
  double radius;
  double energy;
} WmBubble;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message into `buf` (NUL-terminated, truncated to
 * `cap`); returns the full message length.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes, or be null (query mode).
 */
uintptr_t wm_last_error_message(char *buf, uintptr_t cap);

/**
 * Unit sphere immersion at the given icosphere subdivision level, scaled by
 * `radius`.
 *
 * # Safety
 * `out` must be a valid pointer; the returned handle is owned by the caller
 * and released with `wm_immersion_free`.
 */
enum WmStatus wm_immersion_sphere(uint32_t level, double radius, struct WmImmersion **out);

/**
 * Builds an analytic fixture: "sphere", "ellipsoid:a:b:c",
 * "inverted-catenoid", "bump-sphere:amplitude[:width]".
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` a valid pointer.
 */
enum WmStatus wm_immersion_fixture(const char *spec, uint32_t level, struct WmImmersion **out);

/**
 * Loads an immersion from an OFF or OBJ file (reference points are the
 * normalized positions).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum WmStatus wm_immersion_from_file(const char *path, struct WmImmersion **out);

/**
 * Writes the immersion to an OFF or OBJ file chosen by extension.
 *
 * # Safety
 * `im` must be a live handle from this library; `path` NUL-terminated.
 */
enum WmStatus wm_immersion_write_file(const struct WmImmersion *im, const char *path);

/**
 * # Safety
 * `im` must come from this library and not be freed twice.
 */
void wm_immersion_free(struct WmImmersion *im);

/**
 * # Safety
 * `im` must be a live handle.
 */
uintptr_t wm_immersion_vertex_count(const struct WmImmersion *im);

/**
 * # Safety
 * `im` must be a live handle.
 */
uintptr_t wm_immersion_face_count(const struct WmImmersion *im);

/**
 * Copies vertex positions (xyz triples) into `buf`; returns the number of
 * doubles required. Copies nothing when `cap` is too small.
 *
 * # Safety
 * `buf` must point to `cap` writable doubles, or be null (query mode).
 */
uintptr_t wm_immersion_positions(const struct WmImmersion *im, double *buf, uintptr_t cap);

/**
 * Relaxed energy breakdown in the Aubin gauge (identity gauge when the
 * balance solver cannot converge).
 *
 * # Safety
 * `im` must be a live handle; `out` a valid pointer.
 */
enum WmStatus wm_energy(const struct WmImmersion *im, double sigma, struct WmEnergyBreakdown *out);

/**
 * Aubin balance: writes the gauge ball parameter into `a_out[3]` and the
 * final normalized barycenter norm into `barycenter_norm`.
 *
 * # Safety
 * `im` must be a live handle; `a_out` must point to 3 writable doubles and
 * `barycenter_norm` to one.
 */
enum WmStatus wm_aubin_balance(const struct WmImmersion *im,
                               double *a_out,
                               double *barycenter_norm);

/**
 * Analytic-vs-finite-difference gradient check; writes the max relative
 * deviation. A step of 0 selects the default 1e-5 x diameter.
 *
 * # Safety
 * `im` live handle, `max_rel_deviation` one writable double.
 */
enum WmStatus wm_grad_check(const struct WmImmersion *im,
                            double sigma,
                            double h,
                            double *max_rel_deviation);

/**
 * Willmore flux residue around a vertex loop; writes the residue vector
 * into `out[3]`.
 *
 * # Safety
 * `im` live handle; `vertices` points to `len` vertex indices; `out` to 3
 * writable doubles.
 */
enum WmStatus wm_willmore_residue(const struct WmImmersion *im,
                                  const uint32_t *vertices,
                                  uintptr_t len,
                                  double *out);

/**
 * First residue around a vertex loop; `triple_coefficient` selects the
 * literal-3 weight on the normal projection.
 *
 * # Safety
 * Same contracts as `wm_willmore_residue`.
 */
enum WmStatus wm_first_residue(const struct WmImmersion *im,
                               const uint32_t *vertices,
                               uintptr_t len,
                               bool triple_coefficient,
                               double *out);

/**
 * Bending-energy concentration balls (greedy geodesic covering of the
 * reference sphere). Writes up to `cap` balls and the total found count.
 *
 * # Safety
 * `im` live handle; `out_buf` points to `cap` writable `WmBubble`s (may be
 * null when `cap` is 0); `out_count` one writable usize.
 */
enum WmStatus wm_detect_bubbles(const struct WmImmersion *im,
                                double epsilon,
                                double radius,
                                struct WmBubble *out_buf,
                                uintptr_t cap,
                                uintptr_t *out_count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WILLMORE_H */
