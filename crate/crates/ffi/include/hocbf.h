#ifndef HOCBF_H
#define HOCBF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum HocbfStatus {
  HOCBF_STATUS_OK = 0,
  // A required pointer argument was null.
  HOCBF_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  HOCBF_STATUS_INVALID_UTF8 = 2,
  // Malformed JSON, unknown name, invalid configuration or geometry.
  HOCBF_STATUS_INVALID_ARGUMENT = 3,
  // Solver failure, singular system or degenerate input.
  HOCBF_STATUS_NUMERICAL = 4,
  // An output buffer has the wrong length or an index is out of range.
  HOCBF_STATUS_BAD_LENGTH = 5,
  // A panic was caught; the handle involved should be freed.
  HOCBF_STATUS_INTERNAL = 6,
} HocbfStatus;

// A primitive pair for minimal-scaling queries.
typedef struct HocbfPair HocbfPair;

// A finished closed-loop rollout.
typedef struct HocbfRollout HocbfRollout;

// A validated scenario configuration.
typedef struct HocbfScenario HocbfScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *hocbf_version(void);

// Copies the calling thread's last error message into `buf`.
//
// Returns the number of bytes required including the terminator, or 0 if
// the last call succeeded. Nothing is written when `cap` is too small.
//
// # Safety
// `buf` must be null or valid for `cap` bytes.
size_t hocbf_last_error(char *buf, size_t cap);

// Parses a pair `{"a": body, "b": body}` from JSON.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum HocbfStatus hocbf_pair_from_json(const char *json, struct HocbfPair **out);

// # Safety
// `pair` must be null or a handle from [`hocbf_pair_from_json`] not yet freed.
void hocbf_pair_free(struct HocbfPair *pair);

// Spatial dimension (2 or 3) and length of the stacked parameter vector `θ = [θ_A; θ_B]`.
//
// # Safety
// `pair` must be a live handle; outputs must be null or writable.
enum HocbfStatus hocbf_pair_dims(const struct HocbfPair *pair, size_t *dim, size_t *theta_len);

// Replaces both frames by the stacked parameter vector `theta`.
//
// # Safety
// `pair` must be a live handle; `theta` must be valid for `len` reads.
enum HocbfStatus hocbf_pair_set_theta(struct HocbfPair *pair, const double *theta, size_t len);

// Minimal scaling factor `α*` and, when the buffers are non-null, its
// gradient (`theta_len`) and row-major Hessian (`theta_len²`) in `θ`.
//
// # Safety
// `pair` must be a live handle; `alpha` must be writable; non-null buffers
// must be valid for their stated lengths.
enum HocbfStatus hocbf_pair_alpha(const struct HocbfPair *pair,
                                  double *alpha,
                                  double *grad,
                                  size_t grad_len,
                                  double *hess,
                                  size_t hess_len);

// Looks up a built-in scenario by name.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum HocbfStatus hocbf_scenario_builtin(const char *name, struct HocbfScenario **out);

// Parses and validates a scenario configuration from JSON.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum HocbfStatus hocbf_scenario_from_json(const char *json, struct HocbfScenario **out);

// Overrides the step size and horizon; non-positive values keep the current setting.
//
// # Safety
// `scenario` must be a live handle.
enum HocbfStatus hocbf_scenario_set_timing(struct HocbfScenario *scenario,
                                           double dt,
                                           double horizon);

// Serialises the scenario to JSON (see [`hocbf_last_error`] for the buffer protocol).
//
// # Safety
// `scenario` must be a live handle; `buf` must be null or valid for `cap` bytes.
enum HocbfStatus hocbf_scenario_to_json(const struct HocbfScenario *scenario,
                                        char *buf,
                                        size_t cap,
                                        size_t *needed);

// # Safety
// `scenario` must be null or a live handle.
void hocbf_scenario_free(struct HocbfScenario *scenario);

// Runs the closed loop. A rollout that halts still succeeds; inspect the summary.
//
// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum HocbfStatus hocbf_run(const struct HocbfScenario *scenario, struct HocbfRollout **out);

// # Safety
// `rollout` must be null or a live handle.
void hocbf_rollout_free(struct HocbfRollout *rollout);

// Number of logged steps and the lengths of `q` and `v`.
//
// # Safety
// `rollout` must be a live handle; outputs must be null or writable.
enum HocbfStatus hocbf_rollout_dims(const struct HocbfRollout *rollout,
                                    size_t *steps,
                                    size_t *n_q,
                                    size_t *n_v);

// Time, configuration, velocity and minimum barrier value at step `k`.
//
// # Safety
// `rollout` must be a live handle; `t` and `h_min` must be null or writable;
// `q` and `v` must be valid for `q_len` and `v_len` writes.
enum HocbfStatus hocbf_rollout_step(const struct HocbfRollout *rollout,
                                    size_t k,
                                    double *t,
                                    double *q,
                                    size_t q_len,
                                    double *v,
                                    size_t v_len,
                                    double *h_min);

// Run summary as JSON (see [`hocbf_last_error`] for the buffer protocol).
//
// # Safety
// `rollout` must be a live handle; `buf` must be null or valid for `cap` bytes.
enum HocbfStatus hocbf_rollout_summary_json(const struct HocbfRollout *rollout,
                                            char *buf,
                                            size_t cap,
                                            size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HOCBF_H */
