#ifndef HYBRID_VOLTERRA_H
#define HYBRID_VOLTERRA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes of every fallible call.
typedef enum HvStatus {
  HV_STATUS_OK = 0,
  // A required pointer argument was null.
  HV_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  HV_STATUS_INVALID_UTF8 = 2,
  // The problem text or an argument was rejected.
  HV_STATUS_INVALID_INPUT = 3,
  // The iteration stopped at its limit; the solution handle is still set.
  HV_STATUS_NOT_CONVERGED = 4,
  // A kernel evaluation failed during the solve.
  HV_STATUS_SOLVE_FAILED = 5,
  // The requested time lies outside `[0, T]`.
  HV_STATUS_OUT_OF_RANGE = 6,
  // An internal error was caught at the boundary.
  HV_STATUS_PANIC = 7,
} HvStatus;

// Which iteration `hv_solve` runs.
typedef enum HvMethod {
  // Global successive approximation on `[0, T]`.
  HV_METHOD_PICARD = 0,
  // Segment-by-segment iteration with jumps applied at breakpoints.
  HV_METHOD_SEGMENT = 1,
} HvMethod;

// An immutable parsed problem with its solver options.
typedef struct HvProblem HvProblem;

// A computed solution and its iteration report.
typedef struct HvSolution HvSolution;

// Summary of a 3x3 matrix: characteristic invariants and stability verdicts.
typedef struct HvMatrixReport {
  double trace;
  double s2;
  double det;
  double spectral_radius;
  // All eigenvalues lie strictly inside the unit disk (criterion test).
  bool criterion_contractive;
  // The same question answered from the computed eigenvalues.
  bool eigen_contractive;
} HvMatrixReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread, or an empty
// string. The pointer stays valid until the next call on the same thread.
const char *hv_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *hv_version(void);

// Parse a problem from TOML text.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum HvStatus hv_problem_from_toml(const char *toml, struct HvProblem **out);

// Release a problem. Null is ignored.
//
// # Safety
// `p` must come from [`hv_problem_from_toml`] and not be freed twice.
void hv_problem_free(struct HvProblem *p);

// Number of segments of the breakpoint partition.
//
// # Safety
// `p` must be a valid problem handle or null (returns 0).
size_t hv_problem_segments(const struct HvProblem *p);

// Solve the problem. On `Ok` and on `NotConverged`, `*out` receives a
// solution handle; otherwise it is set to null.
//
// # Safety
// `p` must be a valid problem handle and `out` a valid pointer.
enum HvStatus hv_solve(const struct HvProblem *p, enum HvMethod method, struct HvSolution **out);

// Left limit `x(t^-)` of the solution (the value itself at `t = 0`).
//
// # Safety
// `s` must be a valid solution handle and `out` a valid pointer.
enum HvStatus hv_solution_eval(const struct HvSolution *s, double t, double *out);

// Right limit `x(t^+)` of the solution (the value itself at `t = T`).
//
// # Safety
// `s` must be a valid solution handle and `out` a valid pointer.
enum HvStatus hv_solution_eval_right(const struct HvSolution *s, double t, double *out);

// Iterations performed, or 0 for a null handle.
//
// # Safety
// `s` must be a valid solution handle or null.
size_t hv_solution_iterations(const struct HvSolution *s);

// Sup-norm residual of the fixed-point equation, or NaN for a null handle.
//
// # Safety
// `s` must be a valid solution handle or null.
double hv_solution_residual(const struct HvSolution *s);

// Whether the iteration met its tolerance; false for a null handle.
//
// # Safety
// `s` must be a valid solution handle or null.
bool hv_solution_converged(const struct HvSolution *s);

// Release a solution. Null is ignored.
//
// # Safety
// `s` must come from [`hv_solve`] and not be freed twice.
void hv_solution_free(struct HvSolution *s);

// Analyse a 3x3 matrix given as nine row-major entries.
//
// # Safety
// `entries` must point to nine doubles and `out` be a valid pointer.
enum HvStatus hv_check_matrix(const double *entries, struct HvMatrixReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYBRID_VOLTERRA_H */
