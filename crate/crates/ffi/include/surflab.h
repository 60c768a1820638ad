#ifndef SURFLAB_H
#define SURFLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes. `Ok` is zero; the nonzero library codes match the
// command-line exit codes.
typedef enum SurflabStatus {
  SURFLAB_STATUS_OK = 0,
  SURFLAB_STATUS_INVALID_INPUT = 1,
  SURFLAB_STATUS_NUMERICAL = 2,
  SURFLAB_STATUS_NULL_POINTER = 3,
  SURFLAB_STATUS_BUFFER_TOO_SMALL = 4,
  SURFLAB_STATUS_PANIC = 5,
} SurflabStatus;

// Length function selector for [`surflab_spectrum_entropy`].
typedef enum SurflabLength {
  SURFLAB_LENGTH_HYPERBOLIC = 0,
  SURFLAB_LENGTH_LAST_ROOT = 1,
} SurflabLength;

typedef struct SurflabCocycle SurflabCocycle;

typedef struct SurflabRepresentation SurflabRepresentation;

typedef struct SurflabSpectrum SurflabSpectrum;

// Per-class data.
typedef struct SurflabClass {
  double trace;
  double l_hyp;
  double l_lastroot;
  size_t word_length;
} SurflabClass;

typedef struct SurflabEntropy {
  double estimate;
  double residual;
  double critical_exponent;
  size_t count;
} SurflabEntropy;

typedef struct SurflabAverage {
  double value;
  double weighted;
  size_t count;
} SurflabAverage;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread, NUL-terminated and
// truncated to `len` bytes, and returns the full message length.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t surflab_last_error(char *buf, size_t len);

// The octagon group composed with the principal representation into
// `SO(p, p-1)`.
//
// # Safety
// `out` must be a valid pointer; the handle it receives is released with
// [`surflab_representation_free`].
enum SurflabStatus surflab_representation_fuchsian(size_t p, struct SurflabRepresentation **out);

// # Safety
// `rep` must be null or a handle not yet freed.
void surflab_representation_free(struct SurflabRepresentation *rep);

// Dimension `2p - 1` of `V`, or 0 for a null handle.
//
// # Safety
// `rep` must be null or a live handle.
size_t surflab_representation_dim(const struct SurflabRepresentation *rep);

// Distance of the relator image from `+-identity`.
//
// # Safety
// `rep` must be a live handle and `residual` a valid pointer.
enum SurflabStatus surflab_representation_relator_residual(const struct SurflabRepresentation *rep,
                                                           double *residual);

// Image of a word such as `"abAB"` (capitals are inverses), written
// row-major into `buf`, which must hold `dim * dim` values.
//
// # Safety
// `rep` must be a live handle, `w` a NUL-terminated string and `buf`
// valid for `len` writes.
enum SurflabStatus surflab_representation_evaluate(const struct SurflabRepresentation *rep,
                                                   const char *w,
                                                   double *buf,
                                                   size_t len);

// Random cocycle from a Gaussian combination of a basis of the cocycle
// space, reproducible from `seed`.
//
// # Safety
// `rep` must be a live handle and `out` a valid pointer.
enum SurflabStatus surflab_cocycle_random(const struct SurflabRepresentation *rep,
                                          uint64_t seed,
                                          struct SurflabCocycle **out);

// Coboundary `v - rho(g) v` of a vector of length `dim`.
//
// # Safety
// `rep` must be a live handle, `v` valid for `len` reads and `out` a
// valid pointer.
enum SurflabStatus surflab_cocycle_coboundary(const struct SurflabRepresentation *rep,
                                              const double *v,
                                              size_t len,
                                              struct SurflabCocycle **out);

// # Safety
// `c` must be null or a handle not yet freed.
void surflab_cocycle_free(struct SurflabCocycle *c);

// Margulis invariant of the class of a word.
//
// # Safety
// Handles must be live, `w` NUL-terminated and `alpha` valid.
enum SurflabStatus surflab_margulis_invariant(const struct SurflabRepresentation *rep,
                                              const struct SurflabCocycle *c,
                                              const char *w,
                                              double *alpha);

// Conjugacy classes with hyperbolic length at most `max_length`, with
// the Margulis functionals attached.
//
// # Safety
// `rep` must be a live handle and `out` a valid pointer.
enum SurflabStatus surflab_spectrum_new(const struct SurflabRepresentation *rep,
                                        double max_length,
                                        double slack,
                                        struct SurflabSpectrum **out);

// # Safety
// `s` must be null or a handle not yet freed.
void surflab_spectrum_free(struct SurflabSpectrum *s);

// Number of classes, or 0 for a null handle.
//
// # Safety
// `s` must be null or a live handle.
size_t surflab_spectrum_len(const struct SurflabSpectrum *s);

// Class `i` in order of increasing hyperbolic length.
//
// # Safety
// `s` must be a live handle and `class` a valid pointer.
enum SurflabStatus surflab_spectrum_class(const struct SurflabSpectrum *s,
                                          size_t i,
                                          struct SurflabClass *class_);

// Entropy fitted over `[t0, t1]`.
//
// # Safety
// `s` must be a live handle and `result` a valid pointer.
enum SurflabStatus surflab_spectrum_entropy(const struct SurflabSpectrum *s,
                                            enum SurflabLength length,
                                            double t0,
                                            double t1,
                                            struct SurflabEntropy *result);

// Margulis invariants of every class, in spectrum order.
//
// # Safety
// Handles must be live and `buf` valid for `len` writes.
enum SurflabStatus surflab_spectrum_alphas(const struct SurflabSpectrum *s,
                                           const struct SurflabCocycle *c,
                                           double *buf,
                                           size_t len);

// Closed-orbit average of the Margulis invariant over last-root lengths
// in `[t0, t1]`, with exponential weights at rate `entropy`.
//
// # Safety
// Handles must be live and `result` a valid pointer.
enum SurflabStatus surflab_spectrum_bm_average(const struct SurflabSpectrum *s,
                                               const struct SurflabCocycle *c,
                                               double t0,
                                               double t1,
                                               double entropy,
                                               struct SurflabAverage *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SURFLAB_H */
