#ifndef HERMITE_FP_H
#define HERMITE_FP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

#define HFP_MODEL_OU 0

#define HFP_MODEL_H 1

#define HFP_MODEL_B 2

#define HFP_MODEL_NS 3

#define HFP_SHAPE_TRIANGLE 0

#define HFP_SHAPE_SQUARE 1

#define HFP_SHAPE_RECTANGLE 2

#define HFP_WEIGHT_ZERO 0

#define HFP_WEIGHT_BETA_V 1

#define HFP_WEIGHT_BOLTZMANN 2

// Result of every fallible call.
typedef enum HfpStatus {
  HFP_STATUS_OK = 0,
  HFP_STATUS_INVALID_ARGUMENT = 1,
  HFP_STATUS_DIMENSION_MISMATCH = 2,
  HFP_STATUS_SINGULAR = 3,
  HFP_STATUS_NON_CONVERGENCE = 4,
  HFP_STATUS_NON_FINITE = 5,
  HFP_STATUS_UNSUPPORTED = 6,
  HFP_STATUS_IO = 7,
  HFP_STATUS_NULL_POINTER = 8,
  HFP_STATUS_BUFFER_TOO_SMALL = 9,
  HFP_STATUS_PANIC = 10,
} HfpStatus;

// Spectral discretisation settings for a problem.
typedef struct HfpBasis HfpBasis;

// Density in a Hermite basis.
typedef struct HfpField HfpField;

// Self-consistency map `m -> R(m, beta)`.
typedef struct HfpMap HfpMap;

// Problem definition: potential, coupling, temperature and noise.
typedef struct HfpProblem HfpProblem;

// Message describing the last failure on this thread; empty after success.
// The pointer stays valid until the next call on the same thread.
const char *hfp_last_error(void);

// Library version as a static NUL-terminated string.
const char *hfp_version(void);

// White-noise problem with potential `sum coeffs[k] x^k`.
//
// # Safety
// `coeffs` must point to `n` doubles and `out` must be writable.
enum HfpStatus hfp_problem_white(const double *coeffs,
                                 size_t n,
                                 double theta,
                                 double beta,
                                 struct HfpProblem **out);

// Colored-noise problem; `model` is one of the `HFP_MODEL_*` constants.
//
// # Safety
// As [`hfp_problem_white`].
enum HfpStatus hfp_problem_colored(uint32_t model,
                                   const double *coeffs,
                                   size_t n,
                                   double theta,
                                   double beta,
                                   double epsilon,
                                   struct HfpProblem **out);

// Number of coordinates (1 for white noise, 2 or 3 otherwise).
//
// # Safety
// `problem` must be a live handle or null.
size_t hfp_problem_dims(const struct HfpProblem *problem);

// # Safety
// `problem` must come from this library and not be used afterwards.
void hfp_problem_free(struct HfpProblem *problem);

// Basis for `problem`: one degree and one `sigma` per dimension.
// `shape` is an `HFP_SHAPE_*` constant and `x_weight` an `HFP_WEIGHT_*` one.
//
// # Safety
// `degrees` and `sigma` must point to `dims` values; `out` must be writable.
enum HfpStatus hfp_basis_new(const struct HfpProblem *problem,
                             uint32_t shape,
                             const size_t *degrees,
                             const double *sigma,
                             size_t dims,
                             uint32_t x_weight,
                             struct HfpBasis **out);

// Number of basis functions.
//
// # Safety
// `basis` must be a live handle or null.
size_t hfp_basis_len(const struct HfpBasis *basis);

// # Safety
// `basis` must come from this library and not be used afterwards.
void hfp_basis_free(struct HfpBasis *basis);

// Steady state of the linear operator with the mean frozen at `m`,
// normalised to unit mass.
//
// # Safety
// Handles must be live and `out` writable.
enum HfpStatus hfp_steady_state(const struct HfpProblem *problem,
                                const struct HfpBasis *basis,
                                double m,
                                struct HfpField **out);

// `E[x]` under the field.
//
// # Safety
// `field` must be live and `out` writable.
enum HfpStatus hfp_field_first_moment(const struct HfpField *field, double *out);

// Density at the point `x` of `dims` coordinates.
//
// # Safety
// `x` must point to `dims` doubles and `out` must be writable.
enum HfpStatus hfp_field_evaluate(const struct HfpField *field,
                                  const double *x,
                                  size_t dims,
                                  double *out);

// Copy the coefficients into `buf`. `needed` receives the count; when
// `capacity` is too small nothing is copied and `BufferTooSmall` returned.
//
// # Safety
// `buf` must have room for `capacity` doubles; `needed` must be writable.
enum HfpStatus hfp_field_coeffs(const struct HfpField *field,
                                double *buf,
                                size_t capacity,
                                size_t *needed);

// # Safety
// `field` must come from this library and not be used afterwards.
void hfp_field_free(struct HfpField *field);

// Exact white-noise map by quadrature.
//
// # Safety
// `coeffs` must point to `n` doubles and `out` must be writable.
enum HfpStatus hfp_map_white(const double *coeffs, size_t n, double theta, struct HfpMap **out);

// Small-correlation-time expansion for OU noise.
//
// # Safety
// As [`hfp_map_white`].
enum HfpStatus hfp_map_asymptotic_ou(const double *coeffs,
                                     size_t n,
                                     double theta,
                                     double epsilon,
                                     struct HfpMap **out);

// Spectral map for `problem` discretised as `basis`. The problem's `beta`
// is replaced at each evaluation.
//
// # Safety
// Handles must be live and `out` writable.
enum HfpStatus hfp_map_spectral(const struct HfpProblem *problem,
                                const struct HfpBasis *basis,
                                struct HfpMap **out);

// `R(m, beta)`.
//
// # Safety
// `map` must be live and `out` writable.
enum HfpStatus hfp_map_evaluate(const struct HfpMap *map, double m, double beta, double *out);

// Fixed points of the map at `beta` in `[lo, hi]`, scanned on `n_grid`
// points. `count` receives the number found; at most `capacity` are copied
// and `BufferTooSmall` is returned if some did not fit.
//
// # Safety
// `buf` must have room for `capacity` doubles; `count` must be writable.
enum HfpStatus hfp_map_fixed_points(const struct HfpMap *map,
                                    double beta,
                                    double lo,
                                    double hi,
                                    size_t n_grid,
                                    double *buf,
                                    size_t capacity,
                                    size_t *count);

// # Safety
// `map` must come from this library and not be used afterwards.
void hfp_map_free(struct HfpMap *map);

// Noise scaling constant for `model`.
//
// # Safety
// `out` must be writable.
enum HfpStatus hfp_zeta(uint32_t model, double *out);

// Time-averaged particle mean with its batch-means standard error.
// `dt <= 0` selects the default step.
//
// # Safety
// `problem` must be live; `m_hat` and `std_error` writable.
enum HfpStatus hfp_mc_simulate(const struct HfpProblem *problem,
                               size_t n_particles,
                               double dt,
                               double burn_in,
                               double window,
                               uint64_t seed,
                               double *m_hat,
                               double *std_error);

#endif  /* HERMITE_FP_H */
