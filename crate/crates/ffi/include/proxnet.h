#ifndef PROXNET_H
#define PROXNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ProxnetStatus {
  PROXNET_STATUS_OK = 0,
  PROXNET_STATUS_NULL_POINTER = 1,
  PROXNET_STATUS_INVALID_UTF8 = 2,
  PROXNET_STATUS_DIMENSION_MISMATCH = 3,
  PROXNET_STATUS_INVALID_PARAMETER = 4,
  PROXNET_STATUS_CONFIG = 5,
  PROXNET_STATUS_IO = 6,
  PROXNET_STATUS_NUMERICAL = 7,
  PROXNET_STATUS_PANIC = 8,
} ProxnetStatus;

typedef enum ProxnetCondition {
  PROXNET_CONDITION_NONE = 0,
  PROXNET_CONDITION_ZERO_FACTOR = 1,
  PROXNET_CONDITION_NORM_BOUND = 2,
  PROXNET_CONDITION_ETA_CONDITION = 3,
} ProxnetCondition;

typedef enum ProxnetRunStatus {
  PROXNET_RUN_STATUS_CONVERGED = 0,
  PROXNET_RUN_STATUS_MAX_ITERATIONS = 1,
  PROXNET_RUN_STATUS_DIVERGED = 2,
} ProxnetRunStatus;

// A scalar activation parsed from its key.
typedef struct ProxnetActivation ProxnetActivation;

// A parsed experiment file together with its network.
typedef struct ProxnetExperiment ProxnetExperiment;

// Result of certification. `alpha`, `eta` and `mu` are NaN when absent.
typedef struct ProxnetCertificate {
  bool certified;
  double alpha;
  enum ProxnetCondition condition;
  double eta;
  double mu;
} ProxnetCertificate;

typedef struct ProxnetRunSummary {
  enum ProxnetRunStatus status;
  size_t iterations;
  double residual;
} ProxnetRunSummary;

typedef struct ProxnetMonotonicity {
  bool monotone;
  double max_eigenvalue;
  double margin;
} ProxnetMonotonicity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Valid until the
// next failing call on the same thread.
const char *proxnet_last_error(void);

// Static description of a status code.
const char *proxnet_status_str(enum ProxnetStatus status);

// Loads an experiment file. Relative paths inside it resolve against its
// directory.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum ProxnetStatus proxnet_experiment_load(const char *path, struct ProxnetExperiment **out);

// Parses an experiment from TOML text. `base_dir` may be NULL, in which
// case relative paths resolve against the working directory.
//
// # Safety
// `text` and a non-null `base_dir` must be NUL-terminated strings; `out`
// must be a valid pointer.
enum ProxnetStatus proxnet_experiment_parse(const char *text,
                                            const char *base_dir,
                                            struct ProxnetExperiment **out);

// # Safety
// `exp` must come from this library and not have been freed. NULL is a
// no-op.
void proxnet_experiment_free(struct ProxnetExperiment *exp);

// Dimension of the network input and output, 0 for NULL.
//
// # Safety
// `exp` must be NULL or a live handle.
size_t proxnet_experiment_dim(const struct ProxnetExperiment *exp);

// Number of layers, 0 for NULL.
//
// # Safety
// `exp` must be NULL or a live handle.
size_t proxnet_experiment_depth(const struct ProxnetExperiment *exp);

// Total length of a block point (sum of layer output dimensions), 0 for
// NULL.
//
// # Safety
// `exp` must be NULL or a live handle.
size_t proxnet_experiment_block_len(const struct ProxnetExperiment *exp);

// `out = T x`. Both buffers have length `proxnet_experiment_dim`.
//
// # Safety
// Buffers must hold `len` doubles; `exp` must be a live handle.
enum ProxnetStatus proxnet_forward(const struct ProxnetExperiment *exp,
                                   const double *x,
                                   size_t len,
                                   double *out,
                                   size_t out_len);

// Smallest certified averagedness constant on the configured grid.
//
// # Safety
// `exp` must be a live handle and `out` a valid pointer.
enum ProxnetStatus proxnet_certify(const struct ProxnetExperiment *exp,
                                   struct ProxnetCertificate *out);

// Runs the configured iteration. `x0` may be NULL to use the configured
// start; otherwise it has length `len`. The final iterate is written to
// `x_out` (length `len`, or the network dimension when `x0` is NULL).
//
// # Safety
// Non-null buffers must hold `len` doubles; `exp` must be a live handle.
enum ProxnetStatus proxnet_run(const struct ProxnetExperiment *exp,
                               const double *x0,
                               size_t len,
                               double *x_out,
                               struct ProxnetRunSummary *summary);

// Largest per-layer residual of a block point given as the concatenation
// of its components (length `proxnet_experiment_block_len`).
//
// # Safety
// `point` must hold `len` doubles; `exp` must be a live handle and `out`
// a valid pointer.
enum ProxnetStatus proxnet_vi_residual(const struct ProxnetExperiment *exp,
                                       const double *point,
                                       size_t len,
                                       double *out);

// Writes the block point `(T_1 x, T_2 T_1 x, …, x)` for a network input
// `x` into `out` (length `proxnet_experiment_block_len`).
//
// # Safety
// Buffers must hold the stated lengths; `exp` must be a live handle.
enum ProxnetStatus proxnet_lift_point(const struct ProxnetExperiment *exp,
                                      const double *x,
                                      size_t len,
                                      double *out,
                                      size_t out_len);

// # Safety
// `exp` must be a live handle and `out` a valid pointer.
enum ProxnetStatus proxnet_monotonicity(const struct ProxnetExperiment *exp,
                                        struct ProxnetMonotonicity *out);

// Parses an activation key such as `"tanh"` or `"prelu:0.25"`.
//
// # Safety
// `key` must be a NUL-terminated string and `out` a valid pointer.
enum ProxnetStatus proxnet_activation_parse(const char *key, struct ProxnetActivation **out);

// # Safety
// `act` must come from this library and not have been freed. NULL is a
// no-op.
void proxnet_activation_free(struct ProxnetActivation *act);

// Evaluates the activation; NaN for NULL.
//
// # Safety
// `act` must be NULL or a live handle.
double proxnet_activation_eval(const struct ProxnetActivation *act, double x);

// Numerical proximity operator of the activation's potential.
//
// # Safety
// `act` must be a live handle and `out` a valid pointer.
enum ProxnetStatus proxnet_activation_prox(const struct ProxnetActivation *act,
                                           double x,
                                           double tol,
                                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROXNET_H */
