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

#include "g2up/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "g2up/csv.hpp"
#include "g2up/fft.hpp"
#include "json.hpp"

namespace g2up::propagation {

using cplx = std::complex<double>;

PulseShape parse_pulse_shape(const std::string &name) {
    if (name == "sech2") {
        return PulseShape::sech2;
    }
    if (name == "gaussian") {
        return PulseShape::gaussian;
    }
    if (name == "cw") {
        return PulseShape::cw;
    }
    throw ConfigError("unknown pulse shape '" + name + "' (expected sech2, gaussian or cw)");
}

const char *pulse_shape_name(PulseShape shape) {
    switch (shape) {
        case PulseShape::sech2:
            return "sech2";
        case PulseShape::gaussian:
            return "gaussian";
        case PulseShape::cw:
            return "cw";
    }
    return "?";
}

double sech2_fwhm_factor() {
    return 2.0 * std::log(1.0 + std::numbers::sqrt2);
}

void PulseSpec::validate() const {
    if (shape != PulseShape::cw && !(fwhm_ps > 0)) {
        throw DomainError("pulse FWHM must be positive");
    }
    if (!(peak_power_mw >= 0) || !std::isfinite(peak_power_mw)) {
        throw DomainError("peak power must be finite and non-negative");
    }
    if (!std::isfinite(delay_ps)) {
        throw DomainError("pulse delay must be finite");
    }
}

double PulseSpec::shape_at(double t_ps) const {
    double x = t_ps - delay_ps;
    switch (shape) {
        case PulseShape::sech2: {
            double s = 1.0 / std::cosh(x * sech2_fwhm_factor() / fwhm_ps);
            return s * s;
        }
        case PulseShape::gaussian:
            return std::exp(-4.0 * std::numbers::ln2 * x * x / (fwhm_ps * fwhm_ps));
        case PulseShape::cw:
            return 1.0;
    }
    return 0.0;
}

double PulseSpec::energy_width_ps() const {
    switch (shape) {
        case PulseShape::sech2:
            return 2.0 * fwhm_ps / sech2_fwhm_factor();
        case PulseShape::gaussian:
            return fwhm_ps * std::sqrt(std::numbers::pi / (4.0 * std::numbers::ln2));
        case PulseShape::cw:
            return INFINITY;
    }
    return 0.0;
}

double peak_power_from_average(double average_mw, double rep_rate_mhz, const PulseSpec &shape) {
    if (shape.shape == PulseShape::cw) {
        return average_mw;
    }
    if (!(rep_rate_mhz > 0) || !(average_mw >= 0)) {
        throw DomainError("average power needs a positive repetition rate and non-negative power");
    }
    // Pulse energy = average / rep rate = peak * energy width.
    double energy_width_s = shape.energy_width_ps() * 1e-12;
    return average_mw / (rep_rate_mhz * 1e6 * energy_width_s);
}

std::vector<double> GridSpec::times() const {
    std::vector<double> t(n_time);
    double h = dt();
    for (std::size_t k = 0; k < n_time; k++) {
        t[k] = (static_cast<double>(k) - static_cast<double>(n_time / 2)) * h;
    }
    return t;
}

void GridSpec::validate(double pump_fwhm_ps, double walkoff_ps) const {
    if (n_time < 1024 || (n_time & (n_time - 1)) != 0) {
        throw ConfigError("n_time must be a power of two >= 1024");
    }
    if (n_z < 100) {
        throw ConfigError("n_z must be >= 100");
    }
    double needed = 6.0 * pump_fwhm_ps + std::abs(walkoff_ps);
    if (!(time_window_ps >= needed)) {
        std::ostringstream ss;
        ss << "time window " << time_window_ps << " ps is shorter than 6 pump FWHM plus walk-off (" << needed
           << " ps)";
        throw ConfigError(ss.str());
    }
}

GroupSlowness GroupSlowness::from_dispersion(double signal_nm, double pump_nm, double temperature_c,
                                             const dispersion::SellmeierModel &model) {
    double sfg_nm = dispersion::sfg_wavelength(signal_nm, pump_nm);
    return {dispersion::group_slowness_difference(signal_nm, pump_nm, temperature_c, model),
            dispersion::group_slowness_difference(sfg_nm, pump_nm, temperature_c, model)};
}

double FieldRecord::manley_rowe_drift() const {
    double drift = 0;
    if (manley_rowe.empty()) {
        return drift;
    }
    const auto &ref = manley_rowe.front();
    for (const auto &m : manley_rowe) {
        if (ref.signal_sum > 0) {
            drift = std::max(drift, std::abs(m.signal_sum - ref.signal_sum) / ref.signal_sum);
        }
        if (ref.pump_sum > 0) {
            drift = std::max(drift, std::abs(m.pump_sum - ref.pump_sum) / ref.pump_sum);
        }
    }
    return drift;
}

void GateResponse::validate() const {
    if (time_ps.size() != h.size() || time_ps.size() < 3) {
        throw ConfigError("gate response needs matching time and value arrays with at least 3 samples");
    }
    double step = dt();
    if (!(step > 0)) {
        throw ConfigError("gate response time grid must be increasing");
    }
    for (std::size_t k = 1; k < time_ps.size(); k++) {
        if (std::abs(time_ps[k] - time_ps[k - 1] - step) > 1e-6 * step) {
            throw ConfigError("gate response time grid must be uniform");
        }
    }
    double area = 0;
    for (double v : h) {
        if (!(v >= 0) || !std::isfinite(v)) {
            throw ConfigError("gate response must be finite and non-negative");
        }
        area += v * step;
    }
    if (std::abs(area - 1.0) > 1e-6) {
        throw ConfigError("gate response must have unit area");
    }
    if (!(fwhm_ps > 0)) {
        throw ConfigError("gate response FWHM must be positive");
    }
}

GateResponse GateResponse::gaussian(double fwhm_ps, double dt_ps) {
    if (!(fwhm_ps > 0) || !(dt_ps > 0) || dt_ps > fwhm_ps / 4) {
        throw DomainError("Gaussian gate needs fwhm > 0 and 0 < dt <= fwhm/4");
    }
    auto half = static_cast<std::size_t>(std::ceil(6.0 * fwhm_ps / dt_ps));
    std::vector<double> t(2 * half + 1), h(2 * half + 1);
    for (std::size_t k = 0; k < t.size(); k++) {
        t[k] = (static_cast<double>(k) - static_cast<double>(half)) * dt_ps;
        h[k] = std::exp(-4.0 * std::numbers::ln2 * t[k] * t[k] / (fwhm_ps * fwhm_ps));
    }
    return from_samples(std::move(t), std::move(h));
}

GateResponse GateResponse::from_samples(std::vector<double> time_ps, std::vector<double> h) {
    GateResponse g;
    if (time_ps.size() != h.size() || time_ps.size() < 3) {
        throw ConfigError("gate response needs matching time and value arrays with at least 3 samples");
    }
    double step = time_ps[1] - time_ps[0];
    double area = 0;
    for (double &v : h) {
        v = std::max(0.0, v);
        area += v * step;
    }
    if (!(area > 0)) {
        throw EmptyResponseError("gate response has zero area");
    }
    for (double &v : h) {
        v /= area;
    }
    g.time_ps = std::move(time_ps);
    g.h = std::move(h);
    g.fwhm_ps = measure_fwhm(g.time_ps, g.h);
    g.validate();
    return g;
}

double measure_fwhm(std::span<const double> t, std::span<const double> y) {
    if (t.size() != y.size() || t.size() < 3) {
        throw ConfigError("FWHM needs matching arrays with at least 3 samples");
    }
    auto peak = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    double half = 0.5 * y[peak];
    if (!(half > 0)) {
        throw NumericalError("FWHM of a profile without a positive maximum");
    }
    std::size_t l = peak;
    while (l > 0 && y[l] >= half) {
        l--;
    }
    std::size_t r = peak;
    while (r + 1 < y.size() && y[r] >= half) {
        r++;
    }
    if (y[l] >= half || y[r] >= half) {
        throw NumericalError("profile does not fall below half maximum inside the window");
    }
    double tl = t[l] + (half - y[l]) / (y[l + 1] - y[l]) * (t[l + 1] - t[l]);
    double tr = t[r - 1] + (half - y[r - 1]) / (y[r] - y[r - 1]) * (t[r] - t[r - 1]);
    return tr - tl;
}

Envelope make_pulse(const PulseSpec &spec, const GridSpec &grid) {
    spec.validate();
    if (spec.shape != PulseShape::cw && 6.0 * spec.fwhm_ps > grid.time_window_ps) {
        throw ConfigError("time window is too small for a pulse of FWHM " + csv::format(spec.fwhm_ps) + " ps");
    }
    auto t = grid.times();
    Envelope a(t.size());
    double amplitude = std::sqrt(spec.peak_power_mw * 1e-3);
    for (std::size_t k = 0; k < t.size(); k++) {
        a[k] = amplitude * std::sqrt(spec.shape_at(t[k]));
    }
    return a;
}

namespace {

struct Couplings {
    double signal, pump, sfg;
};

/// Pointwise coupled-mode right-hand side.
struct Derivative {
    cplx s, p, f;
};

inline Derivative rhs(const Couplings &k, cplx s, cplx p, cplx f, cplx phase) {
    const cplx i(0.0, 1.0);
    return {i * k.signal * f * std::conj(p) * std::conj(phase), i * k.pump * f * std::conj(s) * std::conj(phase),
            i * k.sfg * s * p * phase};
}

void nonlinear_step(Envelope &s, Envelope &p, Envelope &f, const Couplings &k, double z, double h, double dk) {
    cplx ph0 = std::polar(1.0, dk * z);
    cplx ph_mid = std::polar(1.0, dk * (z + 0.5 * h));
    cplx ph1 = std::polar(1.0, dk * (z + h));
    for (std::size_t n = 0; n < s.size(); n++) {
        cplx s0 = s[n], p0 = p[n], f0 = f[n];
        auto k1 = rhs(k, s0, p0, f0, ph0);
        auto k2 = rhs(k, s0 + 0.5 * h * k1.s, p0 + 0.5 * h * k1.p, f0 + 0.5 * h * k1.f, ph_mid);
        auto k3 = rhs(k, s0 + 0.5 * h * k2.s, p0 + 0.5 * h * k2.p, f0 + 0.5 * h * k2.f, ph_mid);
        auto k4 = rhs(k, s0 + h * k3.s, p0 + h * k3.p, f0 + h * k3.f, ph1);
        s[n] = s0 + h / 6.0 * (k1.s + 2.0 * k2.s + 2.0 * k3.s + k4.s);
        p[n] = p0 + h / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
        f[n] = f0 + h / 6.0 * (k1.f + 2.0 * k2.f + 2.0 * k3.f + k4.f);
    }
}

/// exp(-2 pi i nu_k shift) for each FFT bin: advects a field by `shift` ps.
std::vector<cplx> shift_factors(const GridSpec &grid, double shift_ps) {
    std::size_t n = grid.n_time;
    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; k++) {
        double idx = k < n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
        double nu = idx / grid.time_window_ps;
        out[k] = std::polar(1.0, -2.0 * std::numbers::pi * nu * shift_ps);
    }
    return out;
}

void advect(Envelope &a, const std::vector<cplx> &factors, const FftPlan &fft) {
    fft.forward(a);
    for (std::size_t k = 0; k < a.size(); k++) {
        a[k] *= factors[k];
    }
    fft.inverse(a);
}

ManleyRowe photon_sums(const Envelope &s, const Envelope &p, const Envelope &f, double ls, double lp, double lf,
                       double dt) {
    double es = 0, ep = 0, ef = 0;
    for (std::size_t n = 0; n < s.size(); n++) {
        es += std::norm(s[n]);
        ep += std::norm(p[n]);
        ef += std::norm(f[n]);
    }
    // Photon flux is proportional to power times wavelength.
    return {(es * ls + ef * lf) * dt, (ep * lp + ef * lf) * dt};
}

Checkpoint make_checkpoint(double z, std::size_t stride, const Envelope &s, const Envelope &p, const Envelope &f) {
    Checkpoint c;
    c.z_mm = z;
    c.stride = stride;
    for (std::size_t n = 0; n < s.size(); n += stride) {
        c.signal.push_back(s[n]);
        c.pump.push_back(p[n]);
        c.sfg.push_back(f[n]);
    }
    return c;
}

void check_edges(const Envelope &a, const Envelope *reference, const char *wave) {
    double peak = 0;
    auto value = [&](std::size_t n) { return reference ? std::abs(a[n] - (*reference)[n]) : std::abs(a[n]); };
    for (std::size_t n = 0; n < a.size(); n++) {
        peak = std::max(peak, value(n));
    }
    if (peak == 0) {
        return;
    }
    double edge = std::max(value(0), value(a.size() - 1));
    if (edge > 1e-6 * peak) {
        std::ostringstream ss;
        ss << "the " << wave << " envelope reaches the time-window edge (edge/peak = " << edge / peak
           << "); widen the window or re-center the pump";
        throw ConfigError(ss.str(), "wraparound");
    }
}

}  // namespace

FieldRecord propagate(const dispersion::CrystalSpec &crystal, const PulseSpec &pump, const PulseSpec &signal,
                      const GridSpec &grid, const GroupSlowness &slowness, const SolverOptions &options) {
    crystal.validate();
    pump.validate();
    signal.validate();
    if (!(pump.center_wavelength_nm > 0) || !(signal.center_wavelength_nm > 0)) {
        throw DomainError("pump and signal need positive center wavelengths");
    }
    double walkoff = std::max(std::abs(slowness.signal), std::abs(slowness.sfg)) * crystal.length_mm;
    grid.validate(pump.shape == PulseShape::cw ? 0.0 : pump.fwhm_ps, walkoff);
    if (options.checkpoints < 2 || options.checkpoints > grid.n_z + 1) {
        throw ConfigError("checkpoint count must lie in [2, n_z + 1]");
    }

    double ls = signal.center_wavelength_nm;
    double lp = pump.center_wavelength_nm;
    double lf = dispersion::sfg_wavelength(ls, lp);
    // Coupling ratios follow the photon energies, which makes the photon-flux
    // sums invariant in the continuum limit.
    Couplings k{crystal.coupling * lf / ls, crystal.coupling * lf / lp, crystal.coupling};

    FieldRecord rec;
    rec.time_ps = grid.times();
    rec.crystal = crystal;
    rec.pump = pump;
    rec.signal = signal;
    rec.grid = grid;
    rec.slowness = slowness;
    rec.sfg_wavelength_nm = lf;
    rec.delta_k_rad_per_mm = options.delta_k_rad_per_mm;

    Envelope a_p = make_pulse(pump, grid);
    Envelope a_s = make_pulse(signal, grid);
    Envelope a_f(grid.n_time, cplx(0.0, 0.0));
    const Envelope a_s_in = a_s;

    double dt = grid.dt();
    double h = crystal.length_mm / static_cast<double>(grid.n_z);
    FftPlan fft(grid.n_time);
    auto half_signal = shift_factors(grid, 0.5 * h * slowness.signal);
    auto half_sfg = shift_factors(grid, 0.5 * h * slowness.sfg);
    std::size_t stride = std::max<std::size_t>(1, grid.n_time / std::max<std::size_t>(1, options.checkpoint_samples));

    rec.checkpoints.push_back(make_checkpoint(0.0, 1, a_s, a_p, a_f));
    rec.manley_rowe.push_back(photon_sums(a_s, a_p, a_f, ls, lp, lf, dt));
    std::size_t next_checkpoint = 1;
    auto checkpoint_step = [&](std::size_t j) {
        return (j * grid.n_z + (options.checkpoints - 1) / 2) / (options.checkpoints - 1);
    };

    for (std::size_t step = 0; step < grid.n_z; step++) {
        double z = static_cast<double>(step) * h;
        advect(a_s, half_signal, fft);
        advect(a_f, half_sfg, fft);
        nonlinear_step(a_s, a_p, a_f, k, z, h, options.delta_k_rad_per_mm);
        advect(a_s, half_signal, fft);
        advect(a_f, half_sfg, fft);

        while (next_checkpoint < options.checkpoints && checkpoint_step(next_checkpoint) == step + 1) {
            bool last = next_checkpoint + 1 == options.checkpoints;
            double zc = last ? crystal.length_mm : static_cast<double>(step + 1) * h;
            rec.checkpoints.push_back(make_checkpoint(zc, last ? 1 : stride, a_s, a_p, a_f));
            auto sums = photon_sums(a_s, a_p, a_f, ls, lp, lf, dt);
            rec.manley_rowe.push_back(sums);
            next_checkpoint++;
        }
    }
    if (rec.checkpoints.size() != options.checkpoints) {
        throw Error(ErrorCategory::internal, "internal_error", "checkpoint bookkeeping mismatch");
    }

    double drift = rec.manley_rowe_drift();
    if (drift > options.manley_rowe_tolerance) {
        std::ostringstream ss;
        ss << "Manley-Rowe photon-flux drift " << drift << " exceeds " << options.manley_rowe_tolerance
           << "; increase n_z";
        throw SolverAccuracyError(ss.str());
    }
    check_edges(a_p, nullptr, "pump");
    check_edges(a_f, nullptr, "SFG");
    check_edges(a_s, signal.shape == PulseShape::cw ? &a_s_in : nullptr, "signal");
    return rec;
}

Setup Setup::standard(const dispersion::SellmeierModel &model) {
    Setup s;
    s.pump.wavelength_nm = dispersion::solve_qpm_pump(s.signal_wavelength_nm, s.crystal, model).pump_nm;
    return s;
}

FieldRecord propagate(const Setup &setup, const dispersion::SellmeierModel &model) {
    auto slowness = GroupSlowness::from_dispersion(setup.signal_wavelength_nm, setup.pump.wavelength_nm,
                                                   setup.crystal.temperature_c, model);
    PulseSpec pump;
    pump.shape = setup.pump.shape;
    pump.fwhm_ps = setup.pump.fwhm_ps;
    pump.center_wavelength_nm = setup.pump.wavelength_nm;
    pump.delay_ps = setup.pump.delay_ps.value_or(-0.5 * slowness.sfg * setup.crystal.length_mm);
    pump.peak_power_mw = peak_power_from_average(setup.pump.average_power_mw, setup.pump.rep_rate_mhz, pump);

    PulseSpec signal;
    signal.shape = PulseShape::cw;
    signal.peak_power_mw = setup.signal_power_mw;
    signal.center_wavelength_nm = setup.signal_wavelength_nm;
    return propagate(setup.crystal, pump, signal, setup.grid, slowness, setup.options);
}

GateResponse gate_response(const FieldRecord &record) {
    if (record.signal.shape != PulseShape::cw) {
        throw ConfigError("gate response needs a run with a CW signal");
    }
    const auto &in = record.input().signal;
    const auto &out = record.output().signal;
    std::vector<double> dip(out.size());
    double p_in = 0, peak = 0;
    for (std::size_t n = 0; n < out.size(); n++) {
        p_in = std::max(p_in, std::norm(in[n]));
        dip[n] = std::max(0.0, std::norm(in[n]) - std::norm(out[n]));
        peak = std::max(peak, dip[n]);
    }
    if (!(peak > 1e-12 * p_in)) {
        throw EmptyResponseError("the signal shows no conversion dip; check pump power and coupling");
    }
    return GateResponse::from_samples(record.time_ps, std::move(dip));
}

double sfg_energy_pj(const FieldRecord &record) {
    double e = 0;
    for (const auto &a : record.output().sfg) {
        e += std::norm(a);
    }
    return e * record.grid.dt();
}

std::vector<SweepPoint> sweep_pump_power(std::span<const double> powers_mw, const Setup &setup,
                                         const dispersion::SellmeierModel &model) {
    for (std::size_t k = 0; k < powers_mw.size(); k++) {
        if (!(powers_mw[k] > 0) || (k > 0 && !(powers_mw[k] > powers_mw[k - 1]))) {
            throw ConfigError("sweep powers must be positive and strictly ascending");
        }
    }
    std::vector<SweepPoint> out;
    for (double p : powers_mw) {
        Setup s = setup;
        s.pump.average_power_mw = p;
        try {
            auto rec = propagate(s, model);
            out.push_back({p, sfg_energy_pj(rec), gate_response(rec).fwhm_ps});
        } catch (const Error &e) {
            throw SweepError("sweep aborted at " + csv::format(p) + " mW: " + e.what(), out, e.category());
        }
    }
    return out;
}

namespace {

struct ProjectedResidual {
    std::vector<double> r;
    double scale = 0;
    double cost = 0;
};

ProjectedResidual projected_residual(std::span<const SaturationMeasurement> measured, const Setup &setup,
                                     const dispersion::SellmeierModel &model, double log_coupling) {
    Setup s = setup;
    s.crystal.coupling = std::exp(log_coupling);
    std::vector<double> powers;
    for (const auto &m : measured) {
        powers.push_back(m.power_mw);
    }
    auto sweep = sweep_pump_power(powers, s, model);
    // Relative residual s * m / y - 1, minimized over the free scale s.
    std::vector<double> q(measured.size());
    double sq = 0, sqq = 0;
    for (std::size_t i = 0; i < q.size(); i++) {
        q[i] = sweep[i].sfg_energy_pj / measured[i].output;
        sq += q[i];
        sqq += q[i] * q[i];
    }
    ProjectedResidual out;
    out.scale = sq / sqq;
    out.r.resize(q.size());
    for (std::size_t i = 0; i < q.size(); i++) {
        out.r[i] = out.scale * q[i] - 1.0;
        out.cost += out.r[i] * out.r[i];
    }
    return out;
}

}  // namespace

SaturationFit fit_saturation(std::span<const SaturationMeasurement> measured, const Setup &setup,
                             const dispersion::SellmeierModel &model, double initial_coupling) {
    if (measured.size() < 4) {
        throw ConfigError("saturation fit needs at least 4 measured points");
    }
    if (!(initial_coupling > 0)) {
        throw DomainError("initial coupling must be positive");
    }
    bool all_zero = std::all_of(measured.begin(), measured.end(), [](const auto &m) { return m.output == 0; });
    if (all_zero) {
        throw FitError("all measured outputs are zero; the coupling is unidentifiable");
    }
    for (const auto &m : measured) {
        if (!(m.output > 0) || !std::isfinite(m.output)) {
            throw DomainError("measured outputs must be positive for relative residuals");
        }
    }

    // Levenberg-Marquardt in log(coupling) with a central-difference Jacobian.
    constexpr int kMaxIterations = 60;
    constexpr double kStep = 1e-3;
    constexpr double kTolerance = 1e-8;
    double u = std::log(initial_coupling);
    auto current = projected_residual(measured, setup, model, u);
    double lambda = 1e-3;
    for (int iter = 1; iter <= kMaxIterations; iter++) {
        auto plus = projected_residual(measured, setup, model, u + kStep);
        auto minus = projected_residual(measured, setup, model, u - kStep);
        double jtj = 0, jtr = 0;
        for (std::size_t i = 0; i < current.r.size(); i++) {
            double j = (plus.r[i] - minus.r[i]) / (2 * kStep);
            jtj += j * j;
            jtr += j * current.r[i];
        }
        if (jtj == 0) {
            throw FitError("saturation curve does not depend on the coupling; points do not span the knee");
        }
        while (true) {
            double du = -jtr / (jtj * (1.0 + lambda));
            du = std::clamp(du, -1.0, 1.0);
            auto trial = projected_residual(measured, setup, model, u + du);
            if (trial.cost <= current.cost) {
                u += du;
                current = std::move(trial);
                lambda = std::max(lambda / 3.0, 1e-12);
                if (std::abs(du) < kTolerance) {
                    return {std::exp(u), current.scale, std::sqrt(current.cost / current.r.size()), iter};
                }
                break;
            }
            lambda *= 4.0;
            if (lambda > 1e8) {
                // No descent direction left: the current point is the minimum
                // to within the finite-difference accuracy.
                return {std::exp(u), current.scale, std::sqrt(current.cost / current.r.size()), iter};
            }
        }
    }
    std::ostringstream ss;
    ss << "saturation fit did not converge in " << kMaxIterations
       << " iterations; rms relative residual = " << std::sqrt(current.cost / current.r.size());
    throw FitError(ss.str());
}

double calibrate_resolution(double target_fwhm_ps, const Setup &setup, const dispersion::SellmeierModel &model) {
    auto fwhm_at = [&](double coupling) {
        Setup s = setup;
        s.crystal.coupling = coupling;
        return gate_response(propagate(s, model)).fwhm_ps;
    };
    double lo = 1e-4;
    double f_lo = fwhm_at(lo);
    if (target_fwhm_ps <= f_lo) {
        throw NumericalError("target resolution " + csv::format(target_fwhm_ps) +
                             " ps is below the low-power limit " + csv::format(f_lo) + " ps");
    }
    double hi = 0.02;
    double f_hi = fwhm_at(hi);
    for (int k = 0; f_hi < target_fwhm_ps; k++) {
        if (k == 20) {
            throw NumericalError("could not bracket the target resolution");
        }
        lo = hi;
        hi *= 2;
        f_hi = fwhm_at(hi);
    }
    while (hi / lo - 1.0 > 1e-7) {
        double mid = std::sqrt(lo * hi);
        if (fwhm_at(mid) < target_fwhm_ps) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return std::sqrt(lo * hi);
}

void write_gate_csv(std::ostream &out, const GateResponse &gate) {
    out << "t_ps,h\n";
    for (std::size_t k = 0; k < gate.h.size(); k++) {
        out << csv::format(gate.time_ps[k]) << ',' << csv::format(gate.h[k]) << '\n';
    }
}

GateResponse read_gate_csv(std::istream &in) {
    auto table = csv::read(in);
    auto ct = table.column("t_ps");
    auto ch = table.column("h");
    std::vector<double> t, h;
    for (const auto &row : table.rows) {
        t.push_back(csv::to_double(row[ct]));
        h.push_back(csv::to_double(row[ch]));
    }
    return GateResponse::from_samples(std::move(t), std::move(h));
}

void write_sweep_csv(std::ostream &out, std::span<const SweepPoint> sweep) {
    out << "power_mW,sfg_energy,resolution_ps\n";
    for (const auto &p : sweep) {
        out << csv::format(p.power_mw) << ',' << csv::format(p.sfg_energy_pj) << ',' << csv::format(p.resolution_ps)
            << '\n';
    }
}

void export_field_record(const FieldRecord &record, const std::string &prefix) {
    nlohmann::json meta;
    meta["crystal"] = {{"poling_period_um", record.crystal.poling_period_um},
                       {"length_mm", record.crystal.length_mm},
                       {"temperature_c", record.crystal.temperature_c},
                       {"coupling_per_sqrt_w_mm", record.crystal.coupling},
                       {"qpm_order", record.crystal.qpm_order}};
    auto pulse_json = [](const PulseSpec &p) {
        return nlohmann::json{{"shape", pulse_shape_name(p.shape)},
                              {"fwhm_ps", p.fwhm_ps},
                              {"peak_power_mw", p.peak_power_mw},
                              {"center_wavelength_nm", p.center_wavelength_nm},
                              {"delay_ps", p.delay_ps}};
    };
    meta["pump"] = pulse_json(record.pump);
    meta["signal"] = pulse_json(record.signal);
    meta["sfg_wavelength_nm"] = record.sfg_wavelength_nm;
    meta["group_slowness_ps_per_mm"] = {{"signal", record.slowness.signal}, {"sfg", record.slowness.sfg}};
    meta["grid"] = {{"time_window_ps", record.grid.time_window_ps},
                    {"n_time", record.grid.n_time},
                    {"n_z", record.grid.n_z}};
    meta["delta_k_rad_per_mm"] = record.delta_k_rad_per_mm;
    meta["manley_rowe_drift"] = record.manley_rowe_drift();
    meta["units"] = {{"time", "ps"}, {"z", "mm"}, {"values", "|A|^2 in W"}};
    std::vector<double> z;
    for (const auto &c : record.checkpoints) {
        z.push_back(c.z_mm);
    }
    meta["z_mm"] = z;

    {
        std::ofstream f(prefix + "_meta.json");
        if (!f) {
            throw ConfigError("cannot write '" + prefix + "_meta.json'", "io_error");
        }
        f << meta.dump(2) << '\n';
    }

    // Intermediate checkpoints are decimated; every column uses the coarsest stride.
    std::size_t stride = 1;
    for (const auto &c : record.checkpoints) {
        stride = std::max(stride, c.stride);
    }
    auto write_wave = [&](const char *name, Envelope Checkpoint::*wave) {
        std::string path = prefix + "_" + name + ".csv";
        std::ofstream f(path);
        if (!f) {
            throw ConfigError("cannot write '" + path + "'", "io_error");
        }
        f << "t_ps";
        for (const auto &c : record.checkpoints) {
            f << ",z=" << csv::format(c.z_mm);
        }
        f << '\n';
        for (std::size_t n = 0; n < record.time_ps.size(); n += stride) {
            f << csv::format(record.time_ps[n]);
            for (const auto &c : record.checkpoints) {
                f << ',' << csv::format(std::norm((c.*wave)[n / c.stride]));
            }
            f << '\n';
        }
    };
    write_wave("pump", &Checkpoint::pump);
    write_wave("signal", &Checkpoint::signal);
    write_wave("sfg", &Checkpoint::sfg);
}

}  // namespace g2up::propagation
