#ifndef DALEMBERT_H
#define DALEMBERT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DzStatus {
  DZ_STATUS_OK = 0,
  DZ_STATUS_NULL_POINTER = 1,
  // Malformed input: bad JSON, unknown system, wrong lengths, parse errors.
  DZ_STATUS_INVALID_ARGUMENT = 2,
  // The Lagrangian could not be evaluated or differentiated at the state.
  DZ_STATUS_EVALUATION = 3,
  // `det M` too small to solve for accelerations.
  DZ_STATUS_DEGENERATE = 4,
  // The integrator gave up (step underflow or step limit).
  DZ_STATUS_INTEGRATION = 5,
  // Input well-formed but outside the model's domain of validity.
  DZ_STATUS_DOMAIN = 6,
  DZ_STATUS_IO = 7,
  DZ_STATUS_PANIC = 8,
} DzStatus;

typedef struct DzModel DzModel;

typedef struct DzTrajectory DzTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next failing call on the same thread.
const char *dz_last_error(void);

// Release a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed.
void dz_string_free(char *s);

// Build a catalog system. `params_json` is a JSON object or NULL for defaults.
//
// # Safety
// Strings must be NUL-terminated; `out` must be writable.
enum DzStatus dz_model_builtin(const char *name, const char *params_json, struct DzModel **out);

// Parse a Lagrangian in `q1.., qd1.., t` and the named numeric parameters.
//
// # Safety
// Strings must be NUL-terminated; `out` must be writable.
enum DzStatus dz_model_from_dsl(const char *lagrangian,
                                size_t dim,
                                const char *params_json,
                                struct DzModel **out);

// # Safety
// `m` must come from a `dz_model_*` constructor and not have been freed.
void dz_model_free(struct DzModel *m);

// Configuration dimension `N`, or 0 for NULL.
//
// # Safety
// `m` must be a live model handle or NULL.
size_t dz_model_dim(const struct DzModel *m);

// Accelerations `q̈` from the Euler–Lagrange equations.
//
// # Safety
// Arrays must hold `N` doubles.
enum DzStatus dz_eom_accel(const struct DzModel *m,
                           const double *q,
                           const double *qd,
                           double t,
                           double *qdd_out);

// The prolonged Lagrangian `γ = (∂L/∂q̇)·ε̇ + (∂L/∂q)·ε`.
//
// # Safety
// Arrays must hold `N` doubles.
enum DzStatus dz_gamma(const struct DzModel *m,
                       const double *q,
                       const double *eps,
                       const double *qd,
                       const double *epsd,
                       double t,
                       double *out);

// `M`, `C`, `K` of the variational equations `M ε̈ + C ε̇ + K ε = 0`, row-major.
//
// # Safety
// `q`, `qd` hold `N` doubles; each output holds `N*N`.
enum DzStatus dz_mck(const struct DzModel *m,
                     const double *q,
                     const double *qd,
                     double t,
                     double *m_out,
                     double *c_out,
                     double *k_out);

// `H = (∂L/∂q̇)·q̇ − L`.
//
// # Safety
// Arrays must hold `N` doubles.
enum DzStatus dz_energy(const struct DzModel *m,
                        const double *q,
                        const double *qd,
                        double t,
                        double *out);

// Displaced energy `h`, the variation of `H` along `(ε, ε̇)`.
//
// # Safety
// Arrays must hold `N` doubles.
enum DzStatus dz_displaced_energy(const struct DzModel *m,
                                  const double *q,
                                  const double *eps,
                                  const double *qd,
                                  const double *epsd,
                                  double t,
                                  double *out);

// Integrate motion and displacement together. `integrator_json` holds the
// integrator settings, e.g. `{"method":"dopri5","t_end":10,"output_interval":0.1}`.
//
// # Safety
// Arrays must hold `N` doubles; strings NUL-terminated; `out` writable.
enum DzStatus dz_integrate(const struct DzModel *m,
                           const double *q,
                           const double *eps,
                           const double *qd,
                           const double *epsd,
                           const char *integrator_json,
                           struct DzTrajectory **out);

// Number of samples, or 0 for NULL.
//
// # Safety
// `tr` must be a live trajectory handle or NULL.
size_t dz_trajectory_len(const struct DzTrajectory *tr);

// Sample `k`: its time and the four state blocks. Any output may be NULL to skip it.
//
// # Safety
// Non-NULL outputs must hold `N` doubles.
enum DzStatus dz_trajectory_sample(const struct DzTrajectory *tr,
                                   size_t k,
                                   double *t_out,
                                   double *q_out,
                                   double *eps_out,
                                   double *qd_out,
                                   double *epsd_out);

// # Safety
// `tr` must come from [`dz_integrate`] and not have been freed.
void dz_trajectory_free(struct DzTrajectory *tr);

// Run the identity suite; writes a JSON report and sets `passed` to 0 or 1.
//
// # Safety
// `report_out` and `passed` must be writable.
enum DzStatus dz_verify(const struct DzModel *m,
                        size_t n_samples,
                        uint64_t seed,
                        char **report_out,
                        int32_t *passed);

// Run a scenario given as JSON text (outputs block ignored). Writes the run
// report and the exit code the command line would use (0 or 2).
//
// # Safety
// `scenario_json` NUL-terminated; outputs writable.
enum DzStatus dz_run_scenario(const char *scenario_json, char **report_out, int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DALEMBERT_H */
