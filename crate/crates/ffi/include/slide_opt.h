#ifndef SLIDE_OPT_H
#define SLIDE_OPT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SlideStatus {
  SLIDE_STATUS_OK = 0,
  SLIDE_STATUS_NULL_POINTER = 1,
  SLIDE_STATUS_INVALID_ARGUMENT = 2,
  SLIDE_STATUS_INVALID_CONFIG = 3,
  SLIDE_STATUS_UNSUPPORTED = 4,
  SLIDE_STATUS_CERTIFICATION_FAILED = 5,
  SLIDE_STATUS_NO_REFERENCE = 6,
  SLIDE_STATUS_BUFFER_TOO_SMALL = 7,
  SLIDE_STATUS_IO = 8,
  SLIDE_STATUS_PANIC = 9,
} SlideStatus;

// A composite problem with its certified reference, once attached.
typedef struct SlideProblem SlideProblem;

// The result of one run.
typedef struct SlideRun SlideRun;

// Oracle call counts of a run.
typedef struct SlideCounts {
  uint64_t grad_calls;
  uint64_t subgrad_calls;
  uint64_t stoch_calls;
} SlideCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *slide_last_error(void);

// Builds a desk instance by name, e.g. `"quad_l1"`.
//
// # Safety
// `name` must be a valid C string and `out` a valid pointer.
enum SlideStatus slide_problem_desk(const char *name, struct SlideProblem **out);

// Builds a problem from a TOML problem table (the fields of a `[problem]` section).
//
// # Safety
// `toml_text` must be a valid C string and `out` a valid pointer.
enum SlideStatus slide_problem_from_toml(const char *toml_text, struct SlideProblem **out);

// # Safety
// `problem` must come from this library or be null.
void slide_problem_free(struct SlideProblem *problem);

// # Safety
// `problem` must be a valid handle; `out` a valid pointer.
enum SlideStatus slide_problem_dim(const struct SlideProblem *problem, size_t *out);

// Computes and attaches a reference optimum certified to `tol`.
//
// # Safety
// `problem` must be a valid handle.
enum SlideStatus slide_problem_attach_reference(struct SlideProblem *problem, double tol);

// `Ψ*` of the attached reference.
//
// # Safety
// `problem` must be a valid handle; `out` a valid pointer.
enum SlideStatus slide_problem_reference_value(const struct SlideProblem *problem, double *out);

// `Ψ(x)` for `x` of length `len`.
//
// # Safety
// `x` must point to `len` doubles; `out` must be valid.
enum SlideStatus slide_problem_objective(const struct SlideProblem *problem,
                                         const double *x,
                                         size_t len,
                                         double *out);

// Gradient sliding for `n` outer iterations with the fixed-horizon policy and
// the default `D̃` (needs a bounded feasible set).
//
// # Safety
// `problem` must be a valid handle and `out` a valid pointer.
enum SlideStatus slide_run_gs(const struct SlideProblem *problem, size_t n, struct SlideRun **out);

// Stochastic gradient sliding for `n` outer iterations with samples keyed by `seed`.
//
// # Safety
// `problem` must be a valid handle and `out` a valid pointer.
enum SlideStatus slide_run_sgs(const struct SlideProblem *problem,
                               size_t n,
                               uint64_t seed,
                               struct SlideRun **out);

// # Safety
// `run` must come from this library or be null.
void slide_run_free(struct SlideRun *run);

// Copies the output point into `buf` (of capacity `len`). `BufferTooSmall`
// if `len` is less than the dimension.
//
// # Safety
// `run` must be valid and `buf` must point to `len` writable doubles.
enum SlideStatus slide_run_output(const struct SlideRun *run, double *buf, size_t len);

// # Safety
// `run` and `out` must be valid.
enum SlideStatus slide_run_counts(const struct SlideRun *run, struct SlideCounts *out);

// `Ψ(output) − Ψ*`; `NoReference` unless the problem had a reference when the run started.
//
// # Safety
// `run` and `out` must be valid.
enum SlideStatus slide_run_final_gap(const struct SlideRun *run, double *out);

// Runs a TOML experiment config and returns the JSON summary in `out_json`,
// to be released with [`slide_string_free`].
//
// # Safety
// `config_toml` must be a valid C string and `out_json` a valid pointer.
enum SlideStatus slide_experiment_run(const char *config_toml, char **out_json);

// # Safety
// `s` must come from this library or be null.
void slide_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLIDE_OPT_H */
