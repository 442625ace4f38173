#ifndef PACBAYES_MARKOV_H
#define PACBAYES_MARKOV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum PbmStatus {
  PBM_STATUS_OK = 0,
  PBM_STATUS_NULL_POINTER = 1,
  PBM_STATUS_INVALID_KERNEL = 2,
  PBM_STATUS_NOT_ERGODIC = 3,
  PBM_STATUS_INVALID_ARGUMENT = 4,
  PBM_STATUS_LAMBDA_TOO_LARGE = 5,
  PBM_STATUS_BUFFER_TOO_SMALL = 6,
  PBM_STATUS_NUMERICAL = 7,
  PBM_STATUS_PANIC = 8,
} PbmStatus;

// Opaque transition matrix.
typedef struct PbmKernel PbmKernel;

// Opaque state sequence, 0-based.
typedef struct PbmTrajectory PbmTrajectory;

typedef struct PbmGapResult {
  double gamma;
  size_t argmax_k;
  // Non-zero when the maximum sits at `k = k_max`.
  int32_t boundary_hit;
} PbmGapResult;

// Shared bound inputs. `lambda <= 0` or NaN means "not supplied".
typedef struct PbmBoundParams {
  size_t n;
  double c;
  double delta;
  double lambda;
  double epsilon;
  double a;
} PbmBoundParams;

// `rhs = term_emp + term_var + term_kl`. `lambda` is NaN when the
// formula does not use one. When `valid` is 0 the reason is available
// from `pbm_last_error_message`.
typedef struct PbmBoundResult {
  double rhs;
  double term_emp;
  double term_var;
  double term_kl;
  double lambda;
  int32_t valid;
} PbmBoundResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *pbm_version(void);

// Message of the last failed call on this thread, or an empty string.
// Valid until the next call into the library on the same thread.
const char *pbm_last_error_message(void);

// Builds a kernel from `d * d` row-major entries.
//
// # Safety
// `entries` must point to `d * d` readable doubles and `out` to a
// writable handle slot.
enum PbmStatus pbm_kernel_new(const double *entries, size_t d, struct PbmKernel **out);

// Benchmark family member `t P + (1 - t) Q` on `d >= 4` states.
//
// # Safety
// `out` must point to a writable handle slot.
enum PbmStatus pbm_kernel_benchmark(size_t d, double p, double q, double t, struct PbmKernel **out);

// # Safety
// `kernel` must come from this library and not be freed twice. Null is a no-op.
void pbm_kernel_free(struct PbmKernel *kernel);

// Number of states, or 0 for a null handle.
//
// # Safety
// `kernel` must be null or a live handle.
size_t pbm_kernel_dim(const struct PbmKernel *kernel);

// Writes the stationary distribution into `out[0..len]`; `len` must be at
// least the dimension.
//
// # Safety
// `kernel` must be live and `out` must have room for `len` doubles.
enum PbmStatus pbm_kernel_stationary(const struct PbmKernel *kernel, double *out, size_t len);

// Exact pseudo-spectral gap with truncation `k_max`.
//
// # Safety
// `kernel` must be live and `out` writable.
enum PbmStatus pbm_pseudo_spectral_gap(const struct PbmKernel *kernel,
                                       size_t k_max,
                                       struct PbmGapResult *out);

// Smallest `t <= k_max` with worst-case TV distance to stationarity at
// most `eps`. `*reached` is 0 when the horizon ran out; `*steps` then
// holds `k_max`.
//
// # Safety
// `kernel` must be live; `steps` and `reached` writable.
enum PbmStatus pbm_mixing_time(const struct PbmKernel *kernel,
                               double eps,
                               size_t k_max,
                               size_t *steps,
                               int32_t *reached);

// Samples `n` states started from the stationary distribution.
//
// # Safety
// `kernel` must be live and `out` writable.
enum PbmStatus pbm_trajectory_sample(const struct PbmKernel *kernel,
                                     size_t n,
                                     uint64_t seed,
                                     struct PbmTrajectory **out);

// Wraps `n` 0-based states, each below `d`.
//
// # Safety
// `states` must hold `n` readable values and `out` be writable.
enum PbmStatus pbm_trajectory_new(const size_t *states,
                                  size_t n,
                                  size_t d,
                                  struct PbmTrajectory **out);

// # Safety
// `traj` must be null or a live handle.
size_t pbm_trajectory_len(const struct PbmTrajectory *traj);

// Copies the states into `out[0..len]`.
//
// # Safety
// `traj` must be live and `out` must have room for `len` values.
enum PbmStatus pbm_trajectory_states(const struct PbmTrajectory *traj, size_t *out, size_t len);

// # Safety
// `traj` must come from this library and not be freed twice. Null is a no-op.
void pbm_trajectory_free(struct PbmTrajectory *traj);

// Plug-in pseudo-spectral gap from a trajectory on `d` states with
// additive smoothing `alpha`.
//
// # Safety
// `traj` must be live and `out` writable.
enum PbmStatus pbm_estimate_gap(const struct PbmTrajectory *traj,
                                size_t d,
                                size_t k_max,
                                double alpha,
                                struct PbmGapResult *out);

// Bound with known gap; requires `lambda`.
//
// # Safety
// `params` must be readable and `out` writable.
enum PbmStatus pbm_bound_markov(const struct PbmBoundParams *params,
                                double gamma,
                                double kl,
                                struct PbmBoundResult *out);

// Bound with an estimated gap; requires `lambda`.
//
// # Safety
// `params` must be readable and `out` writable.
enum PbmStatus pbm_bound_markov_empirical(const struct PbmBoundParams *params,
                                          double gamma_hat,
                                          double kl,
                                          struct PbmBoundResult *out);

// ERM over `m` parameters with a uniform prior and optimized `lambda`.
//
// # Safety
// `params` must be readable and `out` writable.
enum PbmStatus pbm_bound_finite_erm(const struct PbmBoundParams *params,
                                    double gamma,
                                    size_t m,
                                    struct PbmBoundResult *out);

// # Safety
// `params` must be readable and `out` writable.
enum PbmStatus pbm_bound_finite_erm_empirical(const struct PbmBoundParams *params,
                                              double gamma_hat,
                                              size_t m,
                                              struct PbmBoundResult *out);

// phi-mixing bound from the gap and the smallest stationary mass;
// requires `lambda`.
//
// # Safety
// `params` must be readable and `out` writable.
enum PbmStatus pbm_bound_phi_mixing(const struct PbmBoundParams *params,
                                    double gamma,
                                    double pi_star,
                                    double kl,
                                    struct PbmBoundResult *out);

// Rio-type bound from per-step diameters (`n_deltas` must equal
// `params->n`) and `phi(1..=n_phi)`; requires `lambda`.
//
// # Safety
// Arrays must hold the stated number of doubles; `params` readable and
// `out` writable.
enum PbmStatus pbm_bound_rio(const struct PbmBoundParams *params,
                             const double *deltas,
                             size_t n_deltas,
                             const double *phi,
                             size_t n_phi,
                             double kl,
                             struct PbmBoundResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PACBAYES_MARKOV_H */
