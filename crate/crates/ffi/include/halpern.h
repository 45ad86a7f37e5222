#ifndef HALPERN_H
#define HALPERN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HalpernStatus {
  HALPERN_STATUS_OK = 0,
  HALPERN_STATUS_NULL_POINTER = 1,
  HALPERN_STATUS_INVALID_ARGUMENT = 2,
  HALPERN_STATUS_DIMENSION_MISMATCH = 3,
  HALPERN_STATUS_DATA_ERROR = 4,
  HALPERN_STATUS_SOLVER_ERROR = 5,
  HALPERN_STATUS_UNSUPPORTED = 6,
  HALPERN_STATUS_PANIC = 7,
} HalpernStatus;

typedef enum HalpernLink {
  HALPERN_LINK_LOGISTIC = 0,
  HALPERN_LINK_QUADRATIC = 1,
} HalpernLink;

typedef enum HalpernSchedule {
  HALPERN_SCHEDULE_ZERO = 0,
  // `param` is `eps`.
  HALPERN_SCHEDULE_SQRT = 1,
  // `param` is `a`.
  HALPERN_SCHEDULE_POWER = 2,
} HalpernSchedule;

typedef enum HalpernInjection {
  HALPERN_INJECTION_NONE = 0,
  HALPERN_INJECTION_OPPOSING = 1,
  HALPERN_INJECTION_ALIGNED = 2,
  HALPERN_INJECTION_RANDOM = 3,
} HalpernInjection;

// Opaque problem handle.
typedef struct HalpernProblem HalpernProblem;

// Opaque trace handle.
typedef struct HalpernTrace HalpernTrace;

// One trace row. Missing values are NaN.
typedef struct HalpernTraceRow {
  uint64_t k;
  double res_norm;
  double step_norm;
  double potential;
  double gamma_k;
  double sigma_k;
  uint64_t samples;
  uint64_t cum_samples;
} HalpernTraceRow;

typedef struct HalpernPageSchedule {
  double p;
  uint64_t n1;
  // 0 when no correction batch is defined (`k = 0`).
  uint64_t n2;
  double sigma_k;
} HalpernPageSchedule;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on this thread.
const char *halpern_last_error(void);

const char *halpern_version(void);

// Synthetic quadratic `G(z) = A(z - z*)` with `|A| = 1`. `z0 = 0`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum HalpernStatus halpern_problem_quadratic_new(uintptr_t dim,
                                                 double cond,
                                                 uint64_t seed,
                                                 struct HalpernProblem **out);

// Robust GLM classification problem. `features` is row-major `n x m`,
// `labels` holds `n` values in `{-1, +1}`. `link_range` is used by the
// quadratic link only; `ridge <= 0` means no regularizer; `alpha <= 0`
// selects `1/L0`. The initial point is `w0 = 0`, `y0 = 0`.
//
// # Safety
// `features` must point to `n*m` doubles, `labels` to `n` doubles, and
// `out` to writable storage for one handle.
enum HalpernStatus halpern_problem_wdrsl_new(const double *features,
                                             const double *labels,
                                             uintptr_t n,
                                             uintptr_t m,
                                             enum HalpernLink link,
                                             double link_range,
                                             double ridge,
                                             double theta,
                                             double kappa,
                                             double alpha,
                                             struct HalpernProblem **out);

// # Safety
// `problem` must be null or a handle from a `halpern_problem_*_new` call
// that has not been freed.
void halpern_problem_free(struct HalpernProblem *problem);

// Dimension of the iterate, or 0 for a null handle.
//
// # Safety
// `problem` must be null or a live handle.
uintptr_t halpern_problem_dim(const struct HalpernProblem *problem);

// Step constant `L` used by the drivers, or NaN for a null handle.
//
// # Safety
// `problem` must be null or a live handle.
double halpern_problem_step_constant(const struct HalpernProblem *problem);

// Copies the known root into `out` (length `dim`); `Unsupported` when the
// problem has none.
//
// # Safety
// `problem` must be a live handle and `out` must hold `dim` doubles.
enum HalpernStatus halpern_problem_root(const struct HalpernProblem *problem,
                                        double *out,
                                        uintptr_t dim);

// Exact residual `G(z)`.
//
// # Safety
// `problem` must be a live handle; `z` and `out` must hold `dim` doubles.
enum HalpernStatus halpern_problem_residual(const struct HalpernProblem *problem,
                                            const double *z,
                                            double *out,
                                            uintptr_t dim);

// Exact Halpern iteration for `budget` steps from the problem's `z0`.
//
// # Safety
// `problem` must be a live handle; `out` must be writable.
enum HalpernStatus halpern_run_exact(const struct HalpernProblem *problem,
                                     uintptr_t budget,
                                     struct HalpernTrace **out);

// Inexact Halpern iteration. With an injection, the residual is the exact
// one plus an error of norm exactly `γ_k`; without one, finite-sum problems
// use their own inexact resolvent.
//
// # Safety
// `problem` must be a live handle; `out` must be writable.
enum HalpernStatus halpern_run_inexact(const struct HalpernProblem *problem,
                                       uintptr_t budget,
                                       enum HalpernSchedule kind,
                                       double param,
                                       enum HalpernInjection injection,
                                       uint64_t seed,
                                       struct HalpernTrace **out);

// Stochastic Halpern iteration with the PAGE estimator. `(eps, a)` follow
// the schedule (`(eps, 1/2)` for `Sqrt`, `(1, a)` for `Power`); `sigma < 0`
// estimates the variance bound from a pilot pass. `full_batch` replaces
// PAGE by exact evaluations.
//
// # Safety
// `problem` must be a live handle; `out` must be writable.
enum HalpernStatus halpern_run_stochastic(const struct HalpernProblem *problem,
                                          uintptr_t budget,
                                          enum HalpernSchedule kind,
                                          double param,
                                          double sigma,
                                          bool full_batch,
                                          uint64_t seed,
                                          struct HalpernTrace **out);

// # Safety
// `trace` must be null or a live trace handle.
void halpern_trace_free(struct HalpernTrace *trace);

// Number of rows, or 0 for a null handle.
//
// # Safety
// `trace` must be null or a live trace handle.
uintptr_t halpern_trace_len(const struct HalpernTrace *trace);

// # Safety
// `trace` must be a live handle and `out` writable.
enum HalpernStatus halpern_trace_row(const struct HalpernTrace *trace,
                                     uintptr_t index,
                                     struct HalpernTraceRow *out);

// Copies the last iterate into `out`.
//
// # Safety
// `trace` must be a live handle and `out` must hold `dim` doubles.
enum HalpernStatus halpern_trace_final_point(const struct HalpernTrace *trace,
                                             double *out,
                                             uintptr_t dim);

// Projection onto `{(w, λ) : |w| <= λ/(ltilde0 + 1)}`; `λ` is the last entry.
//
// # Safety
// `x` and `out` must hold `len` doubles; they may alias.
enum HalpernStatus halpern_project_icecream(const double *x,
                                            uintptr_t len,
                                            double ltilde0,
                                            double *out);

// Projection onto the unit `ℓ∞` ball.
//
// # Safety
// `x` and `out` must hold `len` doubles; they may alias.
enum HalpernStatus halpern_project_linf_ball(const double *x, uintptr_t len, double *out);

// # Safety
// `center`, `x` and `out` must hold `len` doubles; `x` and `out` may alias.
enum HalpernStatus halpern_project_euclidean_ball(const double *center,
                                                  double radius,
                                                  const double *x,
                                                  uintptr_t len,
                                                  double *out);

// # Safety
// `lo`, `hi`, `x` and `out` must hold `len` doubles; `x` and `out` may alias.
enum HalpernStatus halpern_project_box(const double *lo,
                                       const double *hi,
                                       const double *x,
                                       uintptr_t len,
                                       double *out);

// `c = α(4 - αL0)/4`.
//
// # Safety
// `out` must be writable.
enum HalpernStatus halpern_cocoercivity_modulus(double alpha, double l0, double *out);

// PAGE probability and batch sizes at iteration `k`. Pass a NaN
// `z_diff_norm` at `k = 0`.
//
// # Safety
// `out` must be writable.
enum HalpernStatus halpern_page_schedule(double eps,
                                         double a,
                                         double sigma,
                                         double l0,
                                         uintptr_t k,
                                         double z_diff_norm,
                                         struct HalpernPageSchedule *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HALPERN_H */
