#ifndef EULERFEM_H
#define EULERFEM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EulerfemExperiment {
  EULERFEM_EXPERIMENT_TAYLOR_GREEN = 0,
  EULERFEM_EXPERIMENT_SHEAR_LAYER = 1,
} EulerfemExperiment;

typedef enum EulerfemFamily {
  EULERFEM_FAMILY_RT = 0,
  EULERFEM_FAMILY_BDM = 1,
} EulerfemFamily;

typedef enum EulerfemMode {
  EULERFEM_MODE_CENTRED = 0,
  EULERFEM_MODE_UPWIND = 1,
} EulerfemMode;

typedef enum EulerfemStatus {
  EULERFEM_STATUS_OK = 0,
  EULERFEM_STATUS_NULL_POINTER = 1,
  EULERFEM_STATUS_INVALID_ARGUMENT = 2,
  EULERFEM_STATUS_CONFIG = 3,
  EULERFEM_STATUS_SOLVER = 4,
  EULERFEM_STATUS_IO = 5,
  EULERFEM_STATUS_BUFFER_TOO_SMALL = 6,
  EULERFEM_STATUS_PANIC = 7,
} EulerfemStatus;

// Opaque result of an operator invariant check.
typedef struct EulerfemReport EulerfemReport;

// Opaque time-stepping state.
typedef struct EulerfemSimulation EulerfemSimulation;

// Settings for a time-stepping simulation.
typedef struct EulerfemParams {
  enum EulerfemExperiment experiment;
  enum EulerfemFamily family;
  uint32_t order;
  enum EulerfemMode mode;
  // Squares per side of the structured mesh.
  uint32_t n;
  double dt;
  // Taylor-Green decay time scale; infinity disables the forcing.
  double sigma;
  double rho;
  double delta;
} EulerfemParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Default settings of an experiment (shear layer: BDM1 upwind, N=48,
// dt=0.04; Taylor-Green: RT1 upwind, N=12, dt=0.01, sigma=100).
struct EulerfemParams eulerfem_params_default(enum EulerfemExperiment experiment);

// Creates a simulation at t = 0 with the projected initial velocity.
//
// # Safety
// `params` must point to an `EulerfemParams` whose enum fields hold
// declared values, and `out` to writable
// storage for one handle pointer.
enum EulerfemStatus eulerfem_simulation_new(const struct EulerfemParams *params,
                                            struct EulerfemSimulation **out);

// Releases a simulation; null is ignored.
//
// # Safety
// `sim` must be null or a handle from [`eulerfem_simulation_new`] that has
// not been freed.
void eulerfem_simulation_free(struct EulerfemSimulation *sim);

// Advances by `steps` implicit midpoint steps. On failure the state is
// left at the last completed step.
//
// # Safety
// `sim` must be a live handle not used concurrently from another thread.
enum EulerfemStatus eulerfem_simulation_step(struct EulerfemSimulation *sim, uint32_t steps);

// Current time `steps · dt`.
//
// # Safety
// `sim` must be a live handle and `t` writable.
enum EulerfemStatus eulerfem_simulation_time(const struct EulerfemSimulation *sim, double *t);

// Kinetic energy `∫|u|²`, enstrophy `Σ_K ∫(rot u)²` and the elementwise
// divergence norm of the current velocity. Any output pointer may be null.
//
// # Safety
// `sim` must be a live handle; non-null outputs must be writable.
enum EulerfemStatus eulerfem_simulation_diagnostics(const struct EulerfemSimulation *sim,
                                                    double *energy,
                                                    double *enstrophy_out,
                                                    double *div_norm);

// Copies the velocity coefficients into `buf`. `len` is written with the
// number of coefficients; when `buf` is null or `capacity` is too small
// nothing is copied (status `BufferTooSmall` for a short non-null buffer).
//
// # Safety
// `sim` must be a live handle, `len` writable, and `buf` null or valid for
// `capacity` writes.
enum EulerfemStatus eulerfem_simulation_velocity(const struct EulerfemSimulation *sim,
                                                 double *buf,
                                                 size_t capacity,
                                                 size_t *len);

// Runs the operator invariant suite and Kelvin check described by a flat
// TOML configuration (`experiment = "operator_check"` keys; empty text
// selects the defaults).
//
// # Safety
// `config` must be a NUL-terminated string and `out` writable.
enum EulerfemStatus eulerfem_operator_check(const char *config, struct EulerfemReport **out);

// Number of checks in a report (0 for null).
//
// # Safety
// `report` must be null or a live handle.
size_t eulerfem_report_len(const struct EulerfemReport *report);

// Whether every check passed (false for null).
//
// # Safety
// `report` must be null or a live handle.
bool eulerfem_report_all_passed(const struct EulerfemReport *report);

// Name, worst value, tolerance and verdict of check `index`. The name
// stays valid until the report is freed. Outputs may be null.
//
// # Safety
// `report` must be a live handle; non-null outputs must be writable.
enum EulerfemStatus eulerfem_report_get(const struct EulerfemReport *report,
                                        size_t index,
                                        const char **name,
                                        double *worst,
                                        double *tolerance,
                                        bool *passed);

// Releases a report; null is ignored.
//
// # Safety
// `report` must be null or a handle from [`eulerfem_operator_check`] that
// has not been freed.
void eulerfem_report_free(struct EulerfemReport *report);

// Message of the last failed call on this thread (empty if none). Valid
// until the next failing call on the same thread.
const char *eulerfem_last_error(void);

// Static description of a status code.
const char *eulerfem_status_str(enum EulerfemStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EULERFEM_H */
