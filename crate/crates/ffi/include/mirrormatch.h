/* C interface to the mirrormatch library. */

#ifndef MIRRORMATCH_H
#define MIRRORMATCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Result codes.
 */
typedef enum {
  MM_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  MM_STATUS_NULL_POINTER = 1,
  /*
   Bad configuration text, key or value.
   */
  MM_STATUS_INVALID_CONFIG = 2,
  /*
   An argument was outside the domain of the operation.
   */
  MM_STATUS_DOMAIN = 3,
  /*
   A numerical procedure did not converge.
   */
  MM_STATUS_NON_CONVERGENCE = 4,
  /*
   A string argument was not valid UTF-8.
   */
  MM_STATUS_INVALID_UTF8 = 5,
  /*
   Internal failure; the library state is still usable.
   */
  MM_STATUS_PANIC = 6,
} MmStatus;

/*
 How clone noise is drawn across a subject's interactions.
 */
typedef enum {
  /*
   Fresh noise on both clones in every interaction.
   */
  MM_CLONE_MODE_PER_INTERACTION = 0,
  /*
   The subject's clone is drawn once per replication.
   */
  MM_CLONE_MODE_FIXED_SUBJECT_CLONE = 1,
} MmCloneMode;

/*
 Experiment configuration behind an opaque handle.
 */
typedef struct MmExperiment MmExperiment;

/*
 Monte Carlo mean with its standard error.
 */
typedef struct {
  double mean;
  double std_error;
  uint64_t reps;
} MmEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failure on this thread, or null if none. The
 pointer stays valid until the next failing call on this thread.
 */
const char *mm_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *mm_version(void);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and must not be used afterwards.
 */
void mm_string_free(char *s);

/*
 Expected norm of a single uniform draw, `k/(k+1)`.
 */
double mm_benchmark(uint64_t k);

/*
 Expected distance to the best of `m` in-person draws.

 # Safety
 `out` must be null or point to writable memory.
 */
MmStatus mm_d_ip(uint64_t k, uint64_t m, double *out);

/*
 Infinite-pool AI distance for per-clone noise variance `variance`.

 # Safety
 `out` must be null or point to writable memory.
 */
MmStatus mm_d_ai_infinity(uint64_t k, double variance, double *out);

/*
 Smallest in-person sample size that beats the platform at every pool
 size. Fails with `MM_STATUS_NON_CONVERGENCE` beyond 2^53.

 # Safety
 `out` must be null or point to writable memory.
 */
MmStatus mm_ai_equivalent_bound(uint64_t k, double variance, uint64_t *out);

/*
 Large-pool probability that the match is data-rich, for clone
 variances `sigma_r2 < sigma_p2`.

 # Safety
 `out` must be null or point to writable memory.
 */
MmStatus mm_rich_win_probability(uint64_t k, double sigma_r2, double sigma_p2, double *out);

/*
 `E[R | S = s]` for combined noise variance `nu` per coordinate.

 # Safety
 `out` must be null or point to writable memory.
 */
MmStatus mm_conditional_mean(uint64_t k, double nu, double s, double *out);

/*
 Monte Carlo best-of-`m` in-person distance. `workers = 0` uses the
 global thread pool; results do not depend on the worker count.

 # Safety
 `out` must be null or point to writable memory.
 */
MmStatus mm_estimate_d_ip(uint64_t k,
                          uint64_t m,
                          uint64_t reps,
                          uint64_t seed,
                          uint32_t workers,
                          MmEstimate *out);

/*
 Monte Carlo AI distance over `n` candidates.

 # Safety
 `out` must be null or point to writable memory.
 */
MmStatus mm_estimate_d_ai(uint64_t k,
                          uint64_t n,
                          double variance,
                          uint64_t reps,
                          MmCloneMode mode,
                          uint64_t seed,
                          uint32_t workers,
                          MmEstimate *out);

/*
 Creates an experiment from `key = value` config text (null for the
 defaults). The handle is written to `*out`.

 # Safety
 `config_text` must be null or NUL-terminated; `out` must be null or
 writable.
 */
MmStatus mm_experiment_new(const char *config_text, MmExperiment **out);

/*
 Applies one `key`, `value` assignment to an experiment.

 # Safety
 `exp` must be a live handle; strings must be NUL-terminated.
 */
MmStatus mm_experiment_set(MmExperiment *exp, const char *key, const char *value);

/*
 Canonical config text of an experiment, to be freed with
 [`mm_string_free`].

 # Safety
 `exp` must be a live handle; `out` must be null or writable.
 */
MmStatus mm_experiment_config(const MmExperiment *exp, char **out);

/*
 Runs a named command (`table1`, `figure2`, `mstar`, `groups`,
 `seqsearch`, `calibrate`) and writes its CSV text to `*csv_out`, to be
 freed with [`mm_string_free`]. `workers = 0` uses the global pool.

 # Safety
 `exp` must be a live handle; `command` NUL-terminated; `csv_out` null or
 writable.
 */
MmStatus mm_experiment_run(const MmExperiment *exp,
                           const char *command,
                           uint32_t workers,
                           char **csv_out);

/*
 Releases an experiment handle. Null is ignored.

 # Safety
 `exp` must come from [`mm_experiment_new`] and must not be used
 afterwards.
 */
void mm_experiment_free(MmExperiment *exp);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIRRORMATCH_H */
