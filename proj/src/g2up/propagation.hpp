// Copyright 2026 The g2up Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef G2UP_PROPAGATION_HPP
#define G2UP_PROPAGATION_HPP

#include <complex>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "g2up/dispersion.hpp"
#include "g2up/errors.hpp"

namespace g2up::propagation {

using Envelope = std::vector<std::complex<double>>;

enum class PulseShape { sech2, gaussian, cw };

PulseShape parse_pulse_shape(const std::string &name);
const char *pulse_shape_name(PulseShape shape);

/// FWHM of a sech^2 intensity profile divided by its width parameter tau0.
double sech2_fwhm_factor();

struct PulseSpec {
    PulseShape shape = PulseShape::sech2;
    /// Intensity FWHM; ignored for cw.
    double fwhm_ps = 2.5;
    double peak_power_mw = 0;
    double center_wavelength_nm = 0;
    /// Position of the pulse center on the time grid.
    double delay_ps = 0;

    void validate() const;
    /// Intensity profile normalized to a peak of 1.
    double shape_at(double t_ps) const;
    /// Integral of the normalized intensity profile over time (ps). Infinite for cw.
    double energy_width_ps() const;
};

/// Peak power of a pulse train with the given average power.
double peak_power_from_average(double average_mw, double rep_rate_mhz, const PulseSpec &shape);

struct GridSpec {
    double time_window_ps = 64.0;
    std::size_t n_time = 2048;
    std::size_t n_z = 200;

    double dt() const {
        return time_window_ps / static_cast<double>(n_time);
    }
    /// Sample k sits at (k - n_time/2) * dt.
    std::vector<double> times() const;
    void validate(double pump_fwhm_ps, double walkoff_ps) const;
};

/// Group slowness of signal and SFG relative to the pump, in ps/mm.
struct GroupSlowness {
    double signal = 0;
    double sfg = 0;

    static GroupSlowness from_dispersion(double signal_nm, double pump_nm, double temperature_c,
                                         const dispersion::SellmeierModel &model);
};

struct SolverOptions {
    std::size_t checkpoints = 64;
    /// Residual phase mismatch inside the solver (rad/mm); QPM exact by default.
    double delta_k_rad_per_mm = 0;
    /// Maximum tolerated relative Manley-Rowe drift.
    double manley_rowe_tolerance = 1e-4;
    /// Intermediate checkpoints keep at most this many time samples.
    std::size_t checkpoint_samples = 256;
};

struct Checkpoint {
    double z_mm = 0;
    /// Time sample stride relative to the full grid.
    std::size_t stride = 1;
    Envelope pump, signal, sfg;
};

struct ManleyRowe {
    /// Photon-flux sums (signal + sfg) and (pump + sfg), in W ps nm.
    double signal_sum = 0;
    double pump_sum = 0;
};

struct FieldRecord {
    std::vector<double> time_ps;
    /// First entry at z=0 and last at z=L carry the full grid.
    std::vector<Checkpoint> checkpoints;
    dispersion::CrystalSpec crystal;
    PulseSpec pump, signal;
    GridSpec grid;
    GroupSlowness slowness;
    double sfg_wavelength_nm = 0;
    double delta_k_rad_per_mm = 0;
    std::vector<ManleyRowe> manley_rowe;

    const Checkpoint &input() const {
        return checkpoints.front();
    }
    const Checkpoint &output() const {
        return checkpoints.back();
    }
    /// Largest relative drift of the two Manley-Rowe sums over all checkpoints.
    double manley_rowe_drift() const;
};

struct GateResponse {
    std::vector<double> time_ps;
    /// Non-negative, unit area (sum h dt = 1).
    std::vector<double> h;
    double fwhm_ps = 0;

    double dt() const {
        return time_ps.size() > 1 ? time_ps[1] - time_ps[0] : 0.0;
    }
    void validate() const;
    /// Gaussian response with the given FWHM, sampled on a window of +-6 FWHM.
    static GateResponse gaussian(double fwhm_ps, double dt_ps);
    static GateResponse from_samples(std::vector<double> time_ps, std::vector<double> h);
};

/// Full width at half maximum of a sampled single-lobed profile, by linear
/// interpolation between the samples bracketing half maximum.
double measure_fwhm(std::span<const double> t, std::span<const double> y);

Envelope make_pulse(const PulseSpec &spec, const GridSpec &grid);

FieldRecord propagate(const dispersion::CrystalSpec &crystal, const PulseSpec &pump, const PulseSpec &signal,
                      const GridSpec &grid, const GroupSlowness &slowness, const SolverOptions &options = {});

/// Mode-locked pump described by its average power.
struct PumpLaser {
    double wavelength_nm = 990.0;
    double fwhm_ps = 2.5;
    double average_power_mw = 1.5;
    double rep_rate_mhz = 76.0;
    PulseShape shape = PulseShape::sech2;
    /// Pulse center on the grid; by default the pump sits so that the SFG
    /// walk-off span is centered in the window.
    std::optional<double> delay_ps;
};

/// Everything needed for one gate simulation of a CW signal.
struct Setup {
    dispersion::CrystalSpec crystal;
    PumpLaser pump;
    double signal_wavelength_nm = 812.0;
    double signal_power_mw = 1e-3;
    GridSpec grid;
    SolverOptions options;

    /// Setup for the QPM-matched pump of the default crystal at 812 nm.
    static Setup standard(const dispersion::SellmeierModel &model);
};

FieldRecord propagate(const Setup &setup, const dispersion::SellmeierModel &model);

GateResponse gate_response(const FieldRecord &record);

/// Integral of |A_sfg(L, t)|^2 dt in pJ.
double sfg_energy_pj(const FieldRecord &record);

struct SweepPoint {
    double power_mw = 0;
    double sfg_energy_pj = 0;
    double resolution_ps = 0;
};

/// Thrown when one point of a sweep fails; carries the completed points.
struct SweepError : NumericalError {
    SweepError(const std::string &message, std::vector<SweepPoint> partial, ErrorCategory cause)
        : NumericalError(message, "sweep_aborted"), partial(std::move(partial)), cause(cause) {
    }
    std::vector<SweepPoint> partial;
    ErrorCategory cause;
};

std::vector<SweepPoint> sweep_pump_power(std::span<const double> powers_mw, const Setup &setup,
                                         const dispersion::SellmeierModel &model);

struct SaturationMeasurement {
    double power_mw = 0;
    double output = 0;
};

struct SaturationFit {
    double coupling = 0;
    /// Global factor mapping simulated SFG energy to the measured output.
    double scale = 0;
    double rms_relative_residual = 0;
    int iterations = 0;
};

/// Least-squares fit of the coupling constant to a measured output-power
/// curve, with a free global scale.
SaturationFit fit_saturation(std::span<const SaturationMeasurement> measured, const Setup &setup,
                             const dispersion::SellmeierModel &model, double initial_coupling);

/// Coupling constant at which the gate FWHM at the setup's pump power equals
/// `target_fwhm_ps`.
double calibrate_resolution(double target_fwhm_ps, const Setup &setup, const dispersion::SellmeierModel &model);

void write_gate_csv(std::ostream &out, const GateResponse &gate);
GateResponse read_gate_csv(std::istream &in);
void write_sweep_csv(std::ostream &out, std::span<const SweepPoint> sweep);
/// Writes <prefix>_meta.json and <prefix>_{pump,signal,sfg}.csv holding |A|^2
/// in W with rows = time and columns = checkpoints.
void export_field_record(const FieldRecord &record, const std::string &prefix);

}  // namespace g2up::propagation

#endif
