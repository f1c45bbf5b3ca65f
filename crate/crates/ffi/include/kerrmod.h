#ifndef KERRMOD_H
#define KERRMOD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible call.
typedef enum KmStatus {
  KM_STATUS_OK = 0,
  KM_STATUS_NULL_POINTER = 1,
  KM_STATUS_INVALID_UTF8 = 2,
  KM_STATUS_INVALID_PARAMETER = 3,
  KM_STATUS_CONFIG = 4,
  KM_STATUS_STEP_FAILURE = 5,
  KM_STATUS_TRUNCATION_OVERFLOW = 6,
  KM_STATUS_CORRUPTED_DENSITY = 7,
  KM_STATUS_NO_SUPERPOSITION_TIME = 8,
  KM_STATUS_STIFFNESS = 9,
  KM_STATUS_STROBE_UNDEFINED = 10,
  KM_STATUS_CONVERGENCE = 11,
  KM_STATUS_NUMERICAL = 12,
  KM_STATUS_IO = 13,
  KM_STATUS_OUT_OF_RANGE = 14,
  KM_STATUS_PANIC = 15,
} KmStatus;

// Density matrix in a truncated Fock basis.
typedef struct KmDensity KmDensity;

// Parsed run specification.
typedef struct KmSpec KmSpec;

// Oscillator parameters, field for field the library's `OscillatorParams`.
typedef struct KmParams {
  double delta;
  double chi0;
  double chi1;
  double mod_freq_chi;
  double phase_chi;
  double f0;
  double f1;
  double mod_freq_f;
  double gamma;
  double nbar;
} KmParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *km_version(void);

// Message of the most recent failure on this thread, or an empty string.
// The pointer stays valid until the next call into the library from the
// same thread.
const char *km_last_error_message(void);

// Writes the library defaults (γ = 1, everything else 0) to `out`.
//
// # Safety
// `out` is null or valid for writes.
enum KmStatus km_params_default(struct KmParams *out);

// Checks the parameter invariants.
//
// # Safety
// `p` is null or points to a valid `KmParams`.
enum KmStatus km_params_validate(const struct KmParams *p);

// Parses a TOML run specification or a manifest JSON document.
// `command` may be null to use the document's own `command` key.
//
// # Safety
// `text` and a non-null `command` are NUL-terminated strings; `out` is
// valid for writes.
enum KmStatus km_spec_parse(const char *text, const char *command, struct KmSpec **out);

// Copies the spec's oscillator parameters to `out`.
//
// # Safety
// `spec` is a live handle from [`km_spec_parse`]; `out` is valid for writes.
enum KmStatus km_spec_params(const struct KmSpec *spec, struct KmParams *out);

// Replaces the master seed.
//
// # Safety
// `spec` is a live handle from [`km_spec_parse`].
enum KmStatus km_spec_set_seed(struct KmSpec *spec, uint64_t seed);

// Executes the spec and writes its output files to `out_dir` (null keeps
// the spec's own directory). `passed` receives 1 or 0 for commands with a
// pass/fail verdict and -1 otherwise; it may be null.
//
// # Safety
// `spec` is a live handle; `out_dir` is null or NUL-terminated; `passed` is
// null or valid for writes.
enum KmStatus km_spec_run(const struct KmSpec *spec, const char *out_dir, int32_t *passed);

// # Safety
// `spec` is null or a handle from [`km_spec_parse`] not yet freed.
void km_spec_free(struct KmSpec *spec);

// Ensemble-averaged density matrix at time `t` from `n_traj` stochastic
// trajectories started in the coherent state `alpha`. Deterministic in
// `seed`.
//
// # Safety
// `p` points to valid parameters; `out` is valid for writes.
enum KmStatus km_ensemble_density(const struct KmParams *p,
                                  uintptr_t dim,
                                  uintptr_t n_traj,
                                  uint64_t seed,
                                  double alpha_re,
                                  double alpha_im,
                                  double t,
                                  struct KmDensity **out);

// Closed-form density matrix of the lossless, undriven oscillator with a
// modulated Kerr term, started in the coherent state `alpha`.
//
// # Safety
// `out` is valid for writes.
enum KmStatus km_analytic_density(double alpha_re,
                                  double alpha_im,
                                  double chi0,
                                  double chi1,
                                  double delta_mod,
                                  double phase_chi,
                                  uintptr_t dim,
                                  double t,
                                  struct KmDensity **out);

// First time at which the accumulated Kerr phase reaches π/2.
//
// # Safety
// `out` is valid for writes.
enum KmStatus km_superposition_time(double chi0,
                                    double chi1,
                                    double delta_mod,
                                    double phase_chi,
                                    double *out);

// # Safety
// `rho` is null or a live density handle.
uintptr_t km_density_dim(const struct KmDensity *rho);

// Reads ρ_nm.
//
// # Safety
// `rho` is a live density handle; `re` and `im` are valid for writes.
enum KmStatus km_density_get(const struct KmDensity *rho,
                             uintptr_t n,
                             uintptr_t m,
                             double *re,
                             double *im);

// Mean excitation number and Mandel Q (NaN when ⟨n⟩ = 0).
//
// # Safety
// `rho` is a live density handle; `mean_n` and `q` are valid for writes.
enum KmStatus km_density_moments(const struct KmDensity *rho, double *mean_n, double *q);

// # Safety
// `rho` is null or a density handle not yet freed.
void km_density_free(struct KmDensity *rho);

// Wigner function at the phase-space point x + iy.
//
// # Safety
// `rho` is a live density handle; `out` is valid for writes.
enum KmStatus km_wigner_point(const struct KmDensity *rho, double x, double y, double *out);

// Wigner function on an `nx` × `ny` cell-centred grid over
// [x_min, x_max] × [y_min, y_max]. `out` receives nx·ny values with
// `out[i * ny + j]` at (x_i, y_j).
//
// # Safety
// `rho` is a live density handle; `out` is valid for `nx * ny` writes.
enum KmStatus km_wigner_grid(const struct KmDensity *rho,
                             double x_min,
                             double x_max,
                             double y_min,
                             double y_max,
                             uintptr_t nx,
                             uintptr_t ny,
                             double *out);

// Integrates the mean-field equation from `alpha` and samples the solution
// at the `n` ascending `times`.
//
// # Safety
// `p` points to valid parameters; `times` is valid for `n` reads;
// `out_re` and `out_im` are valid for `n` writes.
enum KmStatus km_mean_field(const struct KmParams *p,
                            double alpha_re,
                            double alpha_im,
                            const double *times,
                            uintptr_t n,
                            double *out_re,
                            double *out_im);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KERRMOD_H */
