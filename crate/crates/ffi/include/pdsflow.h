#ifndef PDSFLOW_H
#define PDSFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PdsStatus {
  PDS_STATUS_OK = 0,
  PDS_STATUS_NULL_POINTER = 1,
  PDS_STATUS_INVALID_ARGUMENT = 2,
  PDS_STATUS_INFEASIBLE = 3,
  PDS_STATUS_EMPTY_TANGENT = 4,
  PDS_STATUS_PROJECTION_FAILED = 5,
  PDS_STATUS_SIMULATION_ABORTED = 6,
  PDS_STATUS_PANIC = 7,
} PdsStatus;

typedef enum PdsVerdict {
  PDS_VERDICT_FORWARD_LIPSCHITZ = 0,
  PDS_VERDICT_DIVERGENT = 1,
  PDS_VERDICT_INCONCLUSIVE = 2,
} PdsVerdict;

typedef enum PdsScheme {
  PDS_SCHEME_CATCHING_UP = 0,
  PDS_SCHEME_TANGENT_EULER = 1,
} PdsScheme;

// A time-varying piecewise domain, optionally with the field and start of a scenario.
typedef struct PdsDomain PdsDomain;

typedef struct PdsTrajectory PdsTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. Free with [`pds_string_free`].
char *pds_last_error_message(void);

// # Safety
// `s` must come from this library or be NULL.
void pds_string_free(char *s);

// Built-in scenario by name (`wedge`, `parabola`, `two-bus`, ...), including its field.
//
// # Safety
// `name` must be a NUL-terminated string and `out` writable.
enum PdsStatus pds_domain_from_scenario(const char *name, struct PdsDomain **out);

// Domain from its JSON description.
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum PdsStatus pds_domain_from_json(const char *json, struct PdsDomain **out);

// # Safety
// `d` must come from a `pds_domain_from_*` call or be NULL.
void pds_domain_free(struct PdsDomain *d);

// State dimension, or 0 for NULL.
//
// # Safety
// `d` must be a live handle or NULL.
size_t pds_domain_dim(const struct PdsDomain *d);

// # Safety
// `x` must point to `n` doubles and `out` be writable.
enum PdsStatus pds_domain_contains(const struct PdsDomain *d,
                                   const double *x,
                                   size_t n,
                                   double t,
                                   bool *out);

// Nearest point of `X(t)` to `y`, written to `out_x` (length `n`), with its piece index.
//
// # Safety
// `y` and `out_x` must point to `n` doubles; `out_piece` may be NULL.
enum PdsStatus pds_project_to_set(const struct PdsDomain *d,
                                  const double *y,
                                  size_t n,
                                  double t,
                                  double *out_x,
                                  size_t *out_piece);

// Tangent polyhedra of every piece containing `x`, as a JSON array. Free with
// [`pds_string_free`].
//
// # Safety
// `x` must point to `n` doubles and `out_json` be writable.
enum PdsStatus pds_cone_json(const struct PdsDomain *d,
                             const double *x,
                             size_t n,
                             double t,
                             char **out_json);

// Sampled forward Lipschitz verdict at `t` on the default delta grid.
//
// # Safety
// `center` must point to `n` doubles; `out_verdict` and `out_l_hat` must be writable.
enum PdsStatus pds_certify(const struct PdsDomain *d,
                           double t,
                           const double *center,
                           size_t n,
                           double radius,
                           size_t samples,
                           uint64_t seed,
                           enum PdsVerdict *out_verdict,
                           double *out_l_hat);

// Simulates from `x0`. `field_json` selects the field; NULL uses the scenario's field.
// On an aborted run the status is `SIMULATION_ABORTED` and `out` still receives the
// partial trajectory.
//
// # Safety
// `x0` must point to `n` doubles, `field_json` be NULL or NUL-terminated, `out` writable.
enum PdsStatus pds_simulate(const struct PdsDomain *d,
                            const char *field_json,
                            const double *x0,
                            size_t n,
                            double t0,
                            double t_end,
                            double dt,
                            enum PdsScheme scheme,
                            struct PdsTrajectory **out);

// # Safety
// `tr` must come from [`pds_simulate`] or be NULL.
void pds_trajectory_free(struct PdsTrajectory *tr);

// Number of nodes, or 0 for NULL.
//
// # Safety
// `tr` must be a live handle or NULL.
size_t pds_trajectory_len(const struct PdsTrajectory *tr);

// Copies node `k`: its time, its state (length `n`) and its piece index.
//
// # Safety
// `out_x` must point to `n` writable doubles; `out_t` and `out_piece` may be NULL.
enum PdsStatus pds_trajectory_node(const struct PdsTrajectory *tr,
                                   size_t k,
                                   double *out_t,
                                   double *out_x,
                                   size_t n,
                                   size_t *out_piece);

// Trajectory as CSV (`t, x1..xn, piece, feas_residual, speed`). Free with [`pds_string_free`].
//
// # Safety
// `out_csv` must be writable.
enum PdsStatus pds_trajectory_csv(const struct PdsTrajectory *tr, char **out_csv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PDSFLOW_H */
