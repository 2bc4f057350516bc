/* Copyright 2026 The g2up Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface of libg2up. Every fallible call returns a g2up_status; on
 * failure the message and machine-readable kind of the error are available
 * from g2up_last_error() and g2up_last_error_kind() on the calling thread
 * until the next failing call. Objects are opaque and released with the
 * matching *_free function, which accepts NULL.
 */

#ifndef G2UP_G2UP_H
#define G2UP_G2UP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define G2UP_API __declspec(dllexport)
#else
#define G2UP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Numeric values match the CLI exit codes. */
typedef enum g2up_status {
    G2UP_OK = 0,
    G2UP_ERR_INTERNAL = 1,
    G2UP_ERR_CONFIG = 2,
    G2UP_ERR_NUMERICAL = 3,
    G2UP_ERR_REGIME = 4
} g2up_status;

G2UP_API const char *g2up_version(void);
G2UP_API const char *g2up_last_error(void);
/* Stable tag such as "domain_error", "no_root" or "regime_violation". */
G2UP_API const char *g2up_last_error_kind(void);

/* ---- dispersion ------------------------------------------------------ */

typedef struct g2up_qpm_point {
    double signal_nm;
    double pump_nm;
    double sfg_nm;
    double delta_k_rad_per_mm;
    int multiple_roots;
} g2up_qpm_point;

/* First-order QPM pump for the default crystal with the given poling period
 * and temperature. */
G2UP_API g2up_status g2up_solve_qpm_pump(double signal_nm, double poling_period_um, double temperature_c,
                                         g2up_qpm_point *out);

G2UP_API g2up_status g2up_sfg_wavelength(double signal_nm, double pump_nm, double *sfg_nm);

/* QPM curve over signals from..to (inclusive) in `step` increments, written as
 * CSV. `roots_found` receives the number of signals with a root. */
G2UP_API g2up_status g2up_write_qpm_csv(double from_nm, double to_nm, double step_nm, double poling_period_um,
                                        double temperature_c, const char *path, size_t *roots_found);

/* ---- propagation ----------------------------------------------------- */

typedef struct g2up_setup g2up_setup;

/* Default setup: 12.5 mm crystal, 3.96 um poling, 25 C, 812 nm signal with
 * the QPM-matched pump, 2.5 ps sech^2 pump at 1.5 mW and 76 MHz. */
G2UP_API g2up_status g2up_setup_new(g2up_setup **out);
G2UP_API void g2up_setup_free(g2up_setup *setup);

/* Keys: pump_power_mw, pump_fwhm_ps, pump_nm, rep_rate_mhz, signal_nm,
 * signal_power_mw, coupling, length_mm, poling_period_um, temperature_c,
 * time_window_ps, n_time, n_z. Setting signal_nm, poling_period_um or
 * temperature_c re-solves the pump wavelength. */
G2UP_API g2up_status g2up_setup_set(g2up_setup *setup, const char *key, double value);
G2UP_API g2up_status g2up_setup_get(const g2up_setup *setup, const char *key, double *value);

typedef struct g2up_propagation_summary {
    double sfg_energy_pj;
    double pump_depletion;
    double manley_rowe_drift;
    double gate_fwhm_ps;
    double sfg_wavelength_nm;
} g2up_propagation_summary;

/* Propagates the setup. With a non-NULL prefix, writes <prefix>_meta.json,
 * <prefix>_{pump,signal,sfg}.csv and <prefix>_gate.csv. */
G2UP_API g2up_status g2up_propagate(const g2up_setup *setup, const char *prefix, g2up_propagation_summary *out);

/* Pump power sweep written as CSV (power_mw, sfg_energy_pj, resolution_ps). */
G2UP_API g2up_status g2up_sweep_csv(const g2up_setup *setup, const double *powers_mw, size_t n, const char *path);

typedef struct g2up_saturation_fit {
    double coupling;
    double scale;
    double rms_relative_residual;
    int iterations;
} g2up_saturation_fit;

/* Fits the coupling to a CSV with columns power_mw, output. */
G2UP_API g2up_status g2up_fit_saturation(const g2up_setup *setup, const char *measurement_csv,
                                         double initial_coupling, g2up_saturation_fit *out);

/* Coupling at which the gate FWHM equals the target at the setup's power. */
G2UP_API g2up_status g2up_calibrate_resolution(const g2up_setup *setup, double target_fwhm_ps, double *coupling);

typedef struct g2up_gate g2up_gate;

G2UP_API g2up_status g2up_gate_simulate(const g2up_setup *setup, g2up_gate **out);
G2UP_API g2up_status g2up_gate_gaussian(double fwhm_ps, double dt_ps, g2up_gate **out);
G2UP_API g2up_status g2up_gate_read_csv(const char *path, g2up_gate **out);
G2UP_API g2up_status g2up_gate_write_csv(const g2up_gate *gate, const char *path);
G2UP_API double g2up_gate_fwhm(const g2up_gate *gate);
G2UP_API void g2up_gate_free(g2up_gate *gate);

/* ---- hbt ------------------------------------------------------------- */

typedef struct g2up_experiment g2up_experiment;

G2UP_API g2up_status g2up_experiment_load(const char *path, g2up_experiment **out);
/* Relative gate CSV paths resolve against base_dir. */
G2UP_API g2up_status g2up_experiment_parse(const char *json_text, const char *base_dir, g2up_experiment **out);
G2UP_API void g2up_experiment_free(g2up_experiment *experiment);
/* Resolved experiment as JSON; owned by the experiment. */
G2UP_API const char *g2up_experiment_resolved_json(const g2up_experiment *experiment);
G2UP_API uint64_t g2up_experiment_seed(const g2up_experiment *experiment);
G2UP_API g2up_status g2up_experiment_set_seed(g2up_experiment *experiment, uint64_t seed);
G2UP_API g2up_status g2up_experiment_set_n_periods(g2up_experiment *experiment, uint64_t n_periods);
/* 0 selects the hardware concurrency. Results do not depend on it. */
G2UP_API g2up_status g2up_experiment_set_threads(g2up_experiment *experiment, unsigned threads);

typedef struct g2up_histogram g2up_histogram;

G2UP_API g2up_status g2up_simulate(const g2up_experiment *experiment, g2up_histogram **out);
/* Photon-level reference sampler on an intensity trace of step trace_dt_ps. */
G2UP_API g2up_status g2up_simulate_oracle(const g2up_experiment *experiment, double trace_dt_ps,
                                          g2up_histogram **out);
G2UP_API g2up_status g2up_histogram_write_csv(const g2up_histogram *histogram, const char *path);
G2UP_API void g2up_histogram_free(g2up_histogram *histogram);

typedef struct g2up_g2 g2up_g2;

typedef struct g2up_g2_point {
    double dt_ps;
    double c;
    double c_err;
    double g2;
    double g2_err;
} g2up_g2_point;

G2UP_API g2up_status g2up_estimate(const g2up_histogram *histogram, g2up_g2 **out);
G2UP_API g2up_status g2up_g2_read_csv(const char *path, g2up_g2 **out);
G2UP_API g2up_status g2up_g2_write_csv(const g2up_g2 *estimate, const char *path);
G2UP_API size_t g2up_g2_size(const g2up_g2 *estimate);
G2UP_API g2up_status g2up_g2_point_at(const g2up_g2 *estimate, size_t index, g2up_g2_point *out);
G2UP_API void g2up_g2_free(g2up_g2 *estimate);

/* ---- analysis -------------------------------------------------------- */

typedef struct g2up_peak_fit {
    double center_ps;
    double fwhm_ps;
    double amplitude;
    double baseline;
    double center_err;
    double fwhm_err;
    double amplitude_err;
    double baseline_err;
    double reduced_chi2;
    int iterations;
    int dip;
    int fwhm_unconstrained;
} g2up_peak_fit;

/* Gaussian peak fit over the points with lo_ps <= dt <= hi_ps. */
G2UP_API g2up_status g2up_fit_peak(const g2up_g2 *estimate, double lo_ps, double hi_ps, g2up_peak_fit *out);

typedef struct g2up_visibility_result {
    double visibility;
    double error;
    double offset;
    double amplitude;
    double phase_rad;
} g2up_visibility_result;

/* With response_fwhm_ps > 0 the trace is first smoothed by a Gaussian
 * timing response of that FWHM. */
G2UP_API g2up_status g2up_visibility(const g2up_g2 *estimate, double frequency_ghz, double response_fwhm_ps,
                                     g2up_visibility_result *out);

typedef struct g2up_violation_result {
    double significance_sigma;
    double argmax_dt_ps;
    double difference;
    double sigma;
} g2up_violation_result;

G2UP_API g2up_status g2up_violation(const g2up_g2 *estimate, g2up_violation_result *out);

typedef struct g2up_mean_result {
    double mean;
    double error;
    /* Largest |g2 - 1| / g2_err over the bins. */
    double max_deviation_sigma;
} g2up_mean_result;

G2UP_API g2up_status g2up_mean(const g2up_g2 *estimate, g2up_mean_result *out);

/* Errors may be 0. `error_ps` may be NULL. */
G2UP_API g2up_status g2up_deconvolve(double measured_fwhm_ps, double measured_err_ps, double pulse_fwhm_ps,
                                     double pulse_err_ps, double *resolution_ps, double *error_ps);

G2UP_API g2up_status g2up_gate_duty_cycle(double resolution_fwhm_ps, double rep_rate_mhz, double *duty);

G2UP_API g2up_status g2up_budget(const char *const *names, const double *factors, size_t n, double *product);

/* Documented default factor set, one entry per index. Returns
 * G2UP_ERR_CONFIG past the end. */
G2UP_API size_t g2up_default_budget_size(void);
G2UP_API g2up_status g2up_default_budget_factor(size_t index, const char **name, double *value);

#ifdef __cplusplus
}
#endif

#endif
