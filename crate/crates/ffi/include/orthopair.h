#ifndef ORTHOPAIR_H
#define ORTHOPAIR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call. Values 2 to 5 match the CLI exit codes.
typedef enum OrthopairStatus {
  ORTHOPAIR_STATUS_OK = 0,
  // A required pointer was null or a buffer was too small.
  ORTHOPAIR_STATUS_INVALID_ARGUMENT = 1,
  // Malformed input: bad JSON, inconsistent dimensions.
  ORTHOPAIR_STATUS_INPUT = 2,
  // The input is outside the operation's domain (unstable, not in form, degenerate, not strict).
  ORTHOPAIR_STATUS_DOMAIN = 3,
  // An iteration failed to converge or a matrix was singular.
  ORTHOPAIR_STATUS_NUMERICAL = 4,
  // An internal consistency check failed.
  ORTHOPAIR_STATUS_INVARIANT = 5,
  // The library panicked; no output was written.
  ORTHOPAIR_STATUS_PANIC = 6,
} OrthopairStatus;

// Target of [`orthopair_reduce`].
typedef enum OrthopairForm {
  // Observer-triangular (lower triangular stack).
  ORTHOPAIR_FORM_OTS = 0,
  // Hessenberg-observer.
  ORTHOPAIR_FORM_HESSENBERG = 1,
  // Ordered real Schur, ascending eigenvalue modulus.
  ORTHOPAIR_FORM_SCHUR_ASCENDING = 2,
  // Ordered real Schur, descending eigenvalue modulus.
  ORTHOPAIR_FORM_SCHUR_DESCENDING = 3,
} OrthopairForm;

// Parameterization produced by [`orthopair_factor`].
typedef enum OrthopairKind {
  ORTHOPAIR_KIND_OTSON = 0,
  ORTHOPAIR_KIND_HOON = 1,
} OrthopairKind;

// Opaque output pair `(A, C)`.
typedef struct OrthopairPair OrthopairPair;

// Opaque OTSON or HOON parameter set.
typedef struct OrthopairParams OrthopairParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none failed.
//
// The pointer stays valid until the next failing call on this thread.
const char *orthopair_last_error(void);

// Library version as a static NUL-terminated string.
const char *orthopair_version(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void orthopair_string_free(char *s);

// Builds a pair from row-major `A` (`n×n`) and `C` (`d×n`).
//
// # Safety
// `a` must point to `n*n` doubles, `c` to `d*n` doubles, and `out` must be writable.
enum OrthopairStatus orthopair_pair_new(const double *a,
                                        const double *c,
                                        size_t n,
                                        size_t d,
                                        struct OrthopairPair **out);

// Reads the pair from model-file JSON. `B` and `D`, if present, are ignored.
//
// # Safety
// `json` must be a NUL-terminated string and `out` must be writable.
enum OrthopairStatus orthopair_pair_from_json(const char *json, struct OrthopairPair **out);

// Serializes the pair as model-file JSON. Free the result with [`orthopair_string_free`].
//
// # Safety
// `pair` must be a live handle and `out` must be writable.
enum OrthopairStatus orthopair_pair_to_json(const struct OrthopairPair *pair, char **out);

// State dimension `n` and output dimension `d`.
//
// # Safety
// `pair` must be a live handle; `n` and `d` must be writable.
enum OrthopairStatus orthopair_pair_dims(const struct OrthopairPair *pair, size_t *n, size_t *d);

// Copies `A` row-major into `buf`, which holds `len ≥ n*n` doubles.
//
// # Safety
// `pair` must be a live handle and `buf` must hold `len` doubles.
enum OrthopairStatus orthopair_pair_get_a(const struct OrthopairPair *pair,
                                          double *buf,
                                          size_t len);

// Copies `C` row-major into `buf`, which holds `len ≥ d*n` doubles.
//
// # Safety
// `pair` must be a live handle and `buf` must hold `len` doubles.
enum OrthopairStatus orthopair_pair_get_c(const struct OrthopairPair *pair,
                                          double *buf,
                                          size_t len);

// `‖I − AᵀA − CᵀC‖_F`.
//
// # Safety
// `pair` must be a live handle and `out` must be writable.
enum OrthopairStatus orthopair_pair_on_residual(const struct OrthopairPair *pair, double *out);

// Releases a pair handle. Null is ignored.
//
// # Safety
// `pair` must be null or a handle from this library that has not been freed.
void orthopair_pair_free(struct OrthopairPair *pair);

// Output-normal pair similar to a stable observable `pair`.
//
// # Safety
// `pair` must be a live handle and `out` must be writable.
enum OrthopairStatus orthopair_normalize(const struct OrthopairPair *pair,
                                         struct OrthopairPair **out);

// Orthogonally equivalent pair in `form`. The input must be output normal.
//
// # Safety
// `pair` must be a live handle and `out` must be writable.
enum OrthopairStatus orthopair_reduce(const struct OrthopairPair *pair,
                                      enum OrthopairForm form,
                                      struct OrthopairPair **out);

// Rotation angles of a strict pair already in OTS (`Otson`) or
// Hessenberg-observer (`Hoon`) form, using the default Givens family.
//
// Pairs on or outside the boundary of the strict domain are refused with
// [`OrthopairStatus::Domain`] since their parameters are not unique.
//
// # Safety
// `pair` must be a live handle and `out` must be writable.
enum OrthopairStatus orthopair_factor(const struct OrthopairPair *pair,
                                      enum OrthopairKind kind,
                                      struct OrthopairParams **out);

// Pair represented by `params`.
//
// # Safety
// `params` must be a live handle and `out` must be writable.
enum OrthopairStatus orthopair_reconstruct(const struct OrthopairParams *params,
                                           struct OrthopairPair **out);

// Kind, `n`, `d` and the number of angles of a parameter set.
//
// # Safety
// `params` must be a live handle; every output pointer must be writable.
enum OrthopairStatus orthopair_params_info(const struct OrthopairParams *params,
                                           enum OrthopairKind *kind,
                                           size_t *n,
                                           size_t *d,
                                           size_t *n_angles);

// Copies the angles, stage by stage, into `buf` (`len` doubles).
//
// # Safety
// `params` must be a live handle and `buf` must hold `len` doubles.
enum OrthopairStatus orthopair_params_angles(const struct OrthopairParams *params,
                                             double *buf,
                                             size_t len);

// `γ` of a HOON parameter set; [`OrthopairStatus::Domain`] for OTSON.
//
// # Safety
// `params` must be a live handle and `out` must be writable.
enum OrthopairStatus orthopair_params_gamma(const struct OrthopairParams *params, double *out);

// Reads a parameter file from JSON.
//
// # Safety
// `json` must be a NUL-terminated string and `out` must be writable.
enum OrthopairStatus orthopair_params_from_json(const char *json, struct OrthopairParams **out);

// Serializes a parameter set as JSON. Free the result with [`orthopair_string_free`].
//
// # Safety
// `params` must be a live handle and `out` must be writable.
enum OrthopairStatus orthopair_params_to_json(const struct OrthopairParams *params, char **out);

// Releases a parameter handle. Null is ignored.
//
// # Safety
// `params` must be null or a handle from this library that has not been freed.
void orthopair_params_free(struct OrthopairParams *params);

// `[C; A] v` applied from the rotations without forming the stack.
//
// `v` holds `n` doubles and `out` holds `n + d`. `mults`, if not null,
// receives the number of multiplications performed.
//
// # Safety
// `params` must be a live handle; `v` and `out` must hold the stated lengths.
enum OrthopairStatus orthopair_stack_matvec(const struct OrthopairParams *params,
                                            const double *v,
                                            size_t v_len,
                                            double *out,
                                            size_t out_len,
                                            uint64_t *mults);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ORTHOPAIR_H */
