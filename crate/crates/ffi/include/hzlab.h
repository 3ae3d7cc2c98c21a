#ifndef HZLAB_H
#define HZLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every `hz_*` call.
 */
typedef enum HzStatus {
  HZ_STATUS_OK = 0,
  HZ_STATUS_NULL_POINTER = 1,
  HZ_STATUS_INVALID_ARGUMENT = 2,
  HZ_STATUS_DIMENSION_MISMATCH = 3,
  HZ_STATUS_NOT_HERMITIAN = 4,
  HZ_STATUS_NUMERIC = 5,
  HZ_STATUS_INVARIANT = 6,
  HZ_STATUS_CONFIG = 7,
  HZ_STATUS_IO = 8,
  HZ_STATUS_OVERFLOW = 9,
  HZ_STATUS_PANIC = 10,
} HzStatus;

/**
 * Dense complex matrix.
 */
typedef struct HzMatrix HzMatrix;

/**
 * Eigen-decomposition of a Hermitian matrix.
 */
typedef struct HzSpectral HzSpectral;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *hz_last_error_message(void);

/**
 * Builds a `rows` x `cols` matrix from row-major parts. `im` may be NULL.
 *
 * # Safety
 * `re` (and `im` when non-null) must point to `rows * cols` doubles;
 * `out` must be writable.
 */
enum HzStatus hz_matrix_new(size_t rows,
                            size_t cols,
                            const double *re,
                            const double *im,
                            struct HzMatrix **out);

/**
 * # Safety
 * `m` must be NULL or a handle from this library that has not been freed.
 */
void hz_matrix_free(struct HzMatrix *m);

/**
 * # Safety
 * `m` must be a live handle; `rows` and `cols` must be writable.
 */
enum HzStatus hz_matrix_shape(const struct HzMatrix *m, size_t *rows, size_t *cols);

/**
 * Copies the entries out in row-major order. `im` may be NULL.
 *
 * # Safety
 * `re` (and `im` when non-null) must have room for rows * cols doubles.
 */
enum HzStatus hz_matrix_get(const struct HzMatrix *m, double *re, double *im);

/**
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum HzStatus hz_spectral_norm(const struct HzMatrix *m, double *out);

/**
 * Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum HzStatus hz_eig_hermitian(const struct HzMatrix *m, struct HzSpectral **out);

/**
 * # Safety
 * `s` must be NULL or a live spectral handle.
 */
void hz_spectral_free(struct HzSpectral *s);

/**
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum HzStatus hz_spectral_dim(const struct HzSpectral *s, size_t *out);

/**
 * # Safety
 * `values` must have room for `hz_spectral_dim` doubles.
 */
enum HzStatus hz_spectral_values(const struct HzSpectral *s, double *values);

/**
 * Eigenvectors as the columns of a new matrix.
 *
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum HzStatus hz_spectral_vectors(const struct HzSpectral *s, struct HzMatrix **out);

/**
 * Divided difference of order `n_nodes - 1` of the real polynomial
 * ∑ coeffs[k] t^k. Repeated nodes are allowed.
 *
 * # Safety
 * `coeffs` and `nodes` must point to the stated number of doubles.
 */
enum HzStatus hz_divided_difference_poly(const double *coeffs,
                                         size_t n_coeffs,
                                         const double *nodes,
                                         size_t n_nodes,
                                         double *out);

/**
 * Double operator integral of the divided difference of a real
 * polynomial: f(A) X - X f(B) when X = A X' - X' B.
 *
 * # Safety
 * `a`, `b`, `x` must be live handles; `coeffs` must hold `n_coeffs` doubles.
 */
enum HzStatus hz_doi_poly(const double *coeffs,
                          size_t n_coeffs,
                          const struct HzMatrix *a,
                          const struct HzMatrix *b,
                          const struct HzMatrix *x,
                          struct HzMatrix **out);

/**
 * Fréchet derivative of A ↦ f(A) at `a` in direction `h`.
 *
 * # Safety
 * `a`, `h` must be live handles; `coeffs` must hold `n_coeffs` doubles.
 */
enum HzStatus hz_frechet_poly(const double *coeffs,
                              size_t n_coeffs,
                              const struct HzMatrix *a,
                              const struct HzMatrix *h,
                              struct HzMatrix **out);

/**
 * κ_J in closed form for J = {elems} with 1 ∈ J and elements at most 16.
 *
 * # Safety
 * `elems` must point to `len` integers.
 */
enum HzStatus hz_kappa_closed(const uint32_t *elems, size_t len, uint64_t *out);

/**
 * ω_{*,m}(x) for ω(t) = t^alpha. Infinite when alpha ≥ m.
 *
 * # Safety
 * `out` must be writable.
 */
enum HzStatus hz_omega_star_power(double alpha, uint32_t m, double x, double *out);

/**
 * Random check of ‖|A|^α − |B|^α‖ ≤ ‖A − B‖^α over `trials` Hermitian
 * pairs of dimension 2..8. Writes the largest ratio; returns `Invariant`
 * on a violation.
 *
 * # Safety
 * `max_ratio` must be writable.
 */
enum HzStatus hz_bks_check(double alpha, size_t trials, uint64_t seed, double *max_ratio);

/**
 * Runs a `key = value` configuration and returns the report bundle as a
 * JSON string, to be released with `hz_string_free`.
 *
 * # Safety
 * `config` must be a NUL-terminated string; `out_json` must be writable.
 */
enum HzStatus hz_run_config(const char *config, char **out_json);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void hz_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HZLAB_H */
