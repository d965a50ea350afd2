#ifndef VLASOV_DG_H
#define VLASOV_DG_H

#pragma once

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum VdgStatus {
  VDG_STATUS_OK = 0,
  VDG_STATUS_NULL_POINTER = 1,
  VDG_STATUS_INVALID_ARGUMENT = 2,
  VDG_STATUS_CONFIG = 3,
  VDG_STATUS_CHARGE_NEUTRALITY = 4,
  VDG_STATUS_BLOW_UP = 5,
  VDG_STATUS_INSUFFICIENT_EXTREMA = 6,
  VDG_STATUS_LENGTH_MISMATCH = 7,
  VDG_STATUS_IO = 8,
  VDG_STATUS_PANIC = 9,
} VdgStatus;

typedef enum VdgFlux {
  VDG_FLUX_A1 = 0,
  VDG_FLUX_A2 = 1,
  VDG_FLUX_AA00 = 2,
} VdgFlux;

typedef enum VdgPoisson {
  VDG_POISSON_RT = 0,
  VDG_POISSON_LDG = 1,
  VDG_POISSON_LDG_V = 2,
} VdgPoisson;

typedef enum VdgIntegrator {
  VDG_INTEGRATOR_RK4 = 0,
  VDG_INTEGRATOR_TVD_RK2 = 1,
} VdgIntegrator;

/**
 * Opaque simulation handle.
 */
typedef struct VdgSimulation VdgSimulation;

/**
 * Run settings. Fill with [`vdg_config_default`] and adjust.
 */
typedef struct VdgConfig {
  size_t nx;
  size_t nv;
  size_t degree;
  enum VdgFlux flux;
  enum VdgPoisson poisson;
  enum VdgIntegrator integrator;
  double t_final;
  double cfl;
  /**
   * Fixed time step; `0` selects the adaptive rule.
   */
  double fixed_dt;
  /**
   * Diode voltage; NaN keeps the scenario default.
   */
  double lambda0;
  /**
   * Perturbation amplitude; NaN keeps the scenario default.
   */
  double alpha;
  size_t diag_stride;
} VdgConfig;

/**
 * Latest diagnostics record.
 */
typedef struct VdgDiagnostics {
  double t;
  double mass;
  double l1;
  double l2;
  double energy;
  double kinetic;
  double potential;
  double penalty;
  double e_l2norm;
  double mass_dev;
  double energy_dev;
} VdgDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Writes the defaults of scenario `name` into `*out`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VdgStatus vdg_config_default(const char *name, struct VdgConfig *out);

/**
 * Creates a simulation of scenario `name` at `t = 0`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `config` and `out` valid pointers.
 */
enum VdgStatus vdg_simulation_new(const char *name,
                                  const struct VdgConfig *config,
                                  struct VdgSimulation **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `sim` must come from [`vdg_simulation_new`] and not be used afterwards.
 */
void vdg_simulation_free(struct VdgSimulation *sim);

/**
 * Takes one step (truncated at the final time); writes the step size.
 *
 * # Safety
 * `sim` must be a live handle; `dt` may be null.
 */
enum VdgStatus vdg_simulation_step(struct VdgSimulation *sim, double *dt);

/**
 * Marches to `t_end`, landing on it exactly.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum VdgStatus vdg_simulation_advance_to(struct VdgSimulation *sim, double t_end);

/**
 * Current simulation time.
 *
 * # Safety
 * `sim` must be a live handle and `t` a valid pointer.
 */
enum VdgStatus vdg_simulation_time(const struct VdgSimulation *sim, double *t);

/**
 * Diagnostics of the current state.
 *
 * # Safety
 * `sim` must be a live handle and `out` a valid pointer.
 */
enum VdgStatus vdg_simulation_diagnostics(const struct VdgSimulation *sim,
                                          struct VdgDiagnostics *out);

/**
 * Number of nodal coefficients of the distribution.
 *
 * # Safety
 * `sim` must be a live handle and `len` a valid pointer.
 */
enum VdgStatus vdg_simulation_num_coeffs(const struct VdgSimulation *sim, size_t *len);

/**
 * Copies the nodal coefficients into `buf`, which must hold exactly
 * [`vdg_simulation_num_coeffs`] values.
 *
 * # Safety
 * `sim` must be a live handle and `buf` valid for `len` writes.
 */
enum VdgStatus vdg_simulation_copy_coeffs(const struct VdgSimulation *sim, double *buf, size_t len);

/**
 * Evaluates `f_h(x, v)`.
 *
 * # Safety
 * `sim` must be a live handle and `out` a valid pointer.
 */
enum VdgStatus vdg_simulation_evaluate(const struct VdgSimulation *sim,
                                       double x,
                                       double v,
                                       double *out);

/**
 * `‖f - f_h‖_{L²}` for scenarios with an exact solution.
 *
 * # Safety
 * `sim` must be a live handle and `out` a valid pointer.
 */
enum VdgStatus vdg_simulation_l2_error(const struct VdgSimulation *sim, double *out);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be valid for `len` writes, or null to query the length.
 */
size_t vdg_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vdg_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VLASOV_DG_H */
