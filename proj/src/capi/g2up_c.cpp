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

#include "g2up/g2up.h"

#include <cmath>
#include <fstream>
#include <new>
#include <string>
#include <vector>

#include "g2up/analysis.hpp"
#include "g2up/csv.hpp"
#include "g2up/dispersion.hpp"
#include "g2up/errors.hpp"
#include "g2up/experiment.hpp"
#include "g2up/hbt.hpp"
#include "g2up/propagation.hpp"

#ifndef G2UP_VERSION_STRING
#define G2UP_VERSION_STRING "unknown"
#endif

using namespace g2up;

struct g2up_setup {
    dispersion::SellmeierModel model;
    propagation::Setup setup;
};

struct g2up_gate {
    propagation::GateResponse gate;
};

struct g2up_experiment {
    experiment::Experiment exp;
};

struct g2up_histogram {
    hbt::CoincidenceHistogram hist;
};

struct g2up_g2 {
    hbt::G2Estimate estimate;
};

namespace {

thread_local std::string last_message;
thread_local std::string last_kind;

g2up_status fail(g2up_status status, const std::string &kind, const std::string &message) {
    last_kind = kind;
    last_message = message;
    return status;
}

template <class F>
g2up_status guarded(F &&body) {
    try {
        body();
        return G2UP_OK;
    } catch (const Error &e) {
        return fail(static_cast<g2up_status>(e.category()), e.kind(), e.what());
    } catch (const std::bad_alloc &) {
        return fail(G2UP_ERR_INTERNAL, "out_of_memory", "allocation failed");
    } catch (const std::exception &e) {
        return fail(G2UP_ERR_INTERNAL, "internal_error", e.what());
    } catch (...) {
        return fail(G2UP_ERR_INTERNAL, "internal_error", "unknown exception");
    }
}

void require(const void *p, const char *what) {
    if (!p) {
        throw ConfigError(std::string(what) + " must not be NULL", "null_argument");
    }
}

std::ofstream open_out(const char *path) {
    require(path, "path");
    std::ofstream out(path);
    if (!out) {
        throw ConfigError(std::string("cannot write ") + path, "io_error");
    }
    return out;
}

void close_out(std::ofstream &out, const char *path) {
    out.close();
    if (!out) {
        throw ConfigError(std::string("write failed for ") + path, "io_error");
    }
}

void resolve_pump(g2up_setup &s) {
    s.setup.pump.wavelength_nm =
        dispersion::solve_qpm_pump(s.setup.signal_wavelength_nm, s.setup.crystal, s.model).pump_nm;
}

std::size_t to_count(double v, const char *key) {
    if (!(v >= 1) || v != std::floor(v) || v > 1e9) {
        throw ConfigError(std::string(key) + " must be a positive integer");
    }
    return static_cast<std::size_t>(v);
}

double pulse_energy(const propagation::Envelope &a, double dt) {
    double e = 0;
    for (const auto &x : a) {
        e += std::norm(x);
    }
    return e * dt;
}

std::vector<analysis::TracePoint> window(const hbt::G2Estimate &estimate, double lo, double hi) {
    std::vector<analysis::TracePoint> out;
    for (const auto &p : analysis::trace_of(estimate)) {
        if (p.dt_ps >= lo && p.dt_ps <= hi) {
            out.push_back(p);
        }
    }
    return out;
}

}  // namespace

extern "C" {

const char *g2up_version(void) {
    return G2UP_VERSION_STRING;
}

const char *g2up_last_error(void) {
    return last_message.c_str();
}

const char *g2up_last_error_kind(void) {
    return last_kind.c_str();
}

g2up_status g2up_solve_qpm_pump(double signal_nm, double poling_period_um, double temperature_c,
                                g2up_qpm_point *out) {
    return guarded([&] {
        require(out, "out");
        dispersion::CrystalSpec crystal;
        crystal.poling_period_um = poling_period_um;
        crystal.temperature_c = temperature_c;
        auto sol = dispersion::solve_qpm_pump(signal_nm, crystal, dispersion::SellmeierModel::mgo_congruent_ln());
        *out = {signal_nm, sol.pump_nm, dispersion::sfg_wavelength(signal_nm, sol.pump_nm), sol.delta_k,
                sol.multiple_roots ? 1 : 0};
    });
}

g2up_status g2up_sfg_wavelength(double signal_nm, double pump_nm, double *sfg_nm) {
    return guarded([&] {
        require(sfg_nm, "sfg_nm");
        *sfg_nm = dispersion::sfg_wavelength(signal_nm, pump_nm);
    });
}

g2up_status g2up_write_qpm_csv(double from_nm, double to_nm, double step_nm, double poling_period_um,
                               double temperature_c, const char *path, size_t *roots_found) {
    return guarded([&] {
        if (!(step_nm > 0) || !(to_nm >= from_nm)) {
            throw ConfigError("signal range needs from <= to and step > 0");
        }
        std::vector<double> signals;
        auto n = static_cast<std::size_t>(std::floor((to_nm - from_nm) / step_nm + 1e-9));
        for (std::size_t k = 0; k <= n; k++) {
            signals.push_back(from_nm + static_cast<double>(k) * step_nm);
        }
        dispersion::CrystalSpec crystal;
        crystal.poling_period_um = poling_period_um;
        crystal.temperature_c = temperature_c;
        auto curve = dispersion::qpm_curve(signals, crystal, dispersion::SellmeierModel::mgo_congruent_ln());
        auto out = open_out(path);
        dispersion::write_qpm_csv(out, curve);
        close_out(out, path);
        if (roots_found) {
            *roots_found = 0;
            for (const auto &p : curve) {
                *roots_found += p.triplet ? 1 : 0;
            }
        }
    });
}

g2up_status g2up_setup_new(g2up_setup **out) {
    return guarded([&] {
        require(out, "out");
        auto model = dispersion::SellmeierModel::mgo_congruent_ln();
        auto setup = propagation::Setup::standard(model);
        *out = new g2up_setup{std::move(model), std::move(setup)};
    });
}

void g2up_setup_free(g2up_setup *setup) {
    delete setup;
}

g2up_status g2up_setup_set(g2up_setup *setup, const char *key, double value) {
    return guarded([&] {
        require(setup, "setup");
        require(key, "key");
        auto &s = setup->setup;
        const std::string k = key;
        if (!std::isfinite(value)) {
            throw ConfigError("setup value for " + k + " must be finite");
        }
        if (k == "pump_power_mw") {
            s.pump.average_power_mw = value;
        } else if (k == "pump_fwhm_ps") {
            s.pump.fwhm_ps = value;
        } else if (k == "pump_nm") {
            s.pump.wavelength_nm = value;
        } else if (k == "rep_rate_mhz") {
            s.pump.rep_rate_mhz = value;
        } else if (k == "signal_power_mw") {
            s.signal_power_mw = value;
        } else if (k == "coupling") {
            s.crystal.coupling = value;
        } else if (k == "length_mm") {
            s.crystal.length_mm = value;
        } else if (k == "time_window_ps") {
            s.grid.time_window_ps = value;
        } else if (k == "n_time") {
            s.grid.n_time = to_count(value, key);
        } else if (k == "n_z") {
            s.grid.n_z = to_count(value, key);
        } else if (k == "signal_nm" || k == "poling_period_um" || k == "temperature_c") {
            auto saved = s;
            if (k == "signal_nm") {
                s.signal_wavelength_nm = value;
            } else if (k == "poling_period_um") {
                s.crystal.poling_period_um = value;
            } else {
                s.crystal.temperature_c = value;
            }
            try {
                resolve_pump(*setup);
            } catch (...) {
                s = saved;
                throw;
            }
        } else {
            throw ConfigError("unknown setup key '" + k + "'", "unknown_key");
        }
    });
}

g2up_status g2up_setup_get(const g2up_setup *setup, const char *key, double *value) {
    return guarded([&] {
        require(setup, "setup");
        require(key, "key");
        require(value, "value");
        const auto &s = setup->setup;
        const std::string k = key;
        if (k == "pump_power_mw") {
            *value = s.pump.average_power_mw;
        } else if (k == "pump_fwhm_ps") {
            *value = s.pump.fwhm_ps;
        } else if (k == "pump_nm") {
            *value = s.pump.wavelength_nm;
        } else if (k == "rep_rate_mhz") {
            *value = s.pump.rep_rate_mhz;
        } else if (k == "signal_nm") {
            *value = s.signal_wavelength_nm;
        } else if (k == "signal_power_mw") {
            *value = s.signal_power_mw;
        } else if (k == "coupling") {
            *value = s.crystal.coupling;
        } else if (k == "length_mm") {
            *value = s.crystal.length_mm;
        } else if (k == "poling_period_um") {
            *value = s.crystal.poling_period_um;
        } else if (k == "temperature_c") {
            *value = s.crystal.temperature_c;
        } else if (k == "time_window_ps") {
            *value = s.grid.time_window_ps;
        } else if (k == "n_time") {
            *value = static_cast<double>(s.grid.n_time);
        } else if (k == "n_z") {
            *value = static_cast<double>(s.grid.n_z);
        } else {
            throw ConfigError("unknown setup key '" + k + "'", "unknown_key");
        }
    });
}

g2up_status g2up_propagate(const g2up_setup *setup, const char *prefix, g2up_propagation_summary *out) {
    return guarded([&] {
        require(setup, "setup");
        auto rec = propagation::propagate(setup->setup, setup->model);
        auto gate = propagation::gate_response(rec);
        const double dt = rec.grid.dt();
        if (out) {
            double e_in = pulse_energy(rec.input().pump, dt);
            *out = {propagation::sfg_energy_pj(rec), 1.0 - pulse_energy(rec.output().pump, dt) / e_in,
                    rec.manley_rowe_drift(), gate.fwhm_ps, rec.sfg_wavelength_nm};
        }
        if (prefix) {
            propagation::export_field_record(rec, prefix);
            std::string gate_path = std::string(prefix) + "_gate.csv";
            auto f = open_out(gate_path.c_str());
            propagation::write_gate_csv(f, gate);
            close_out(f, gate_path.c_str());
        }
    });
}

g2up_status g2up_sweep_csv(const g2up_setup *setup, const double *powers_mw, size_t n, const char *path) {
    return guarded([&] {
        require(setup, "setup");
        require(powers_mw, "powers_mw");
        auto sweep = propagation::sweep_pump_power({powers_mw, n}, setup->setup, setup->model);
        auto out = open_out(path);
        propagation::write_sweep_csv(out, sweep);
        close_out(out, path);
    });
}

g2up_status g2up_fit_saturation(const g2up_setup *setup, const char *measurement_csv, double initial_coupling,
                                g2up_saturation_fit *out) {
    return guarded([&] {
        require(setup, "setup");
        require(measurement_csv, "measurement_csv");
        require(out, "out");
        auto table = csv::read_file(measurement_csv);
        auto power = table.column("power_mw");
        auto output = table.column("output");
        std::vector<propagation::SaturationMeasurement> m;
        for (const auto &row : table.rows) {
            m.push_back({csv::to_double(row.at(power)), csv::to_double(row.at(output))});
        }
        auto fit = propagation::fit_saturation(m, setup->setup, setup->model, initial_coupling);
        *out = {fit.coupling, fit.scale, fit.rms_relative_residual, fit.iterations};
    });
}

g2up_status g2up_calibrate_resolution(const g2up_setup *setup, double target_fwhm_ps, double *coupling) {
    return guarded([&] {
        require(setup, "setup");
        require(coupling, "coupling");
        *coupling = propagation::calibrate_resolution(target_fwhm_ps, setup->setup, setup->model);
    });
}

g2up_status g2up_gate_simulate(const g2up_setup *setup, g2up_gate **out) {
    return guarded([&] {
        require(setup, "setup");
        require(out, "out");
        auto gate = propagation::gate_response(propagation::propagate(setup->setup, setup->model));
        *out = new g2up_gate{std::move(gate)};
    });
}

g2up_status g2up_gate_gaussian(double fwhm_ps, double dt_ps, g2up_gate **out) {
    return guarded([&] {
        require(out, "out");
        *out = new g2up_gate{propagation::GateResponse::gaussian(fwhm_ps, dt_ps)};
    });
}

g2up_status g2up_gate_read_csv(const char *path, g2up_gate **out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        std::ifstream in(path);
        if (!in) {
            throw ConfigError(std::string("cannot open ") + path, "io_error");
        }
        *out = new g2up_gate{propagation::read_gate_csv(in)};
    });
}

g2up_status g2up_gate_write_csv(const g2up_gate *gate, const char *path) {
    return guarded([&] {
        require(gate, "gate");
        auto out = open_out(path);
        propagation::write_gate_csv(out, gate->gate);
        close_out(out, path);
    });
}

double g2up_gate_fwhm(const g2up_gate *gate) {
    return gate ? gate->gate.fwhm_ps : std::nan("");
}

void g2up_gate_free(g2up_gate *gate) {
    delete gate;
}

g2up_status g2up_experiment_load(const char *path, g2up_experiment **out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new g2up_experiment{experiment::load(path)};
    });
}

g2up_status g2up_experiment_parse(const char *json_text, const char *base_dir, g2up_experiment **out) {
    return guarded([&] {
        require(json_text, "json_text");
        require(out, "out");
        *out = new g2up_experiment{experiment::parse(json_text, base_dir ? base_dir : ".")};
    });
}

void g2up_experiment_free(g2up_experiment *experiment) {
    delete experiment;
}

const char *g2up_experiment_resolved_json(const g2up_experiment *experiment) {
    return experiment ? experiment->exp.resolved_json.c_str() : "";
}

uint64_t g2up_experiment_seed(const g2up_experiment *experiment) {
    return experiment ? experiment->exp.config.rng_seed : 0;
}

g2up_status g2up_experiment_set_seed(g2up_experiment *experiment, uint64_t seed) {
    return guarded([&] {
        require(experiment, "experiment");
        experiment->exp.config.rng_seed = seed;
    });
}

g2up_status g2up_experiment_set_n_periods(g2up_experiment *experiment, uint64_t n_periods) {
    return guarded([&] {
        require(experiment, "experiment");
        auto cfg = experiment->exp.config;
        cfg.n_periods = n_periods;
        cfg.validate();
        experiment->exp.config = cfg;
    });
}

g2up_status g2up_experiment_set_threads(g2up_experiment *experiment, unsigned threads) {
    return guarded([&] {
        require(experiment, "experiment");
        experiment->exp.config.threads = threads;
    });
}

g2up_status g2up_simulate(const g2up_experiment *experiment, g2up_histogram **out) {
    return guarded([&] {
        require(experiment, "experiment");
        require(out, "out");
        *out = new g2up_histogram{hbt::simulate_coincidences(experiment->exp.source, experiment->exp.config)};
    });
}

g2up_status g2up_simulate_oracle(const g2up_experiment *experiment, double trace_dt_ps, g2up_histogram **out) {
    return guarded([&] {
        require(experiment, "experiment");
        require(out, "out");
        *out = new g2up_histogram{
            hbt::oracle_coincidences(experiment->exp.source, experiment->exp.config, trace_dt_ps)};
    });
}

g2up_status g2up_histogram_write_csv(const g2up_histogram *histogram, const char *path) {
    return guarded([&] {
        require(histogram, "histogram");
        auto out = open_out(path);
        hbt::write_histogram_csv(out, histogram->hist);
        close_out(out, path);
    });
}

void g2up_histogram_free(g2up_histogram *histogram) {
    delete histogram;
}

g2up_status g2up_estimate(const g2up_histogram *histogram, g2up_g2 **out) {
    return guarded([&] {
        require(histogram, "histogram");
        require(out, "out");
        auto c = hbt::normalize(histogram->hist);
        *out = new g2up_g2{hbt::estimate_g2(c)};
    });
}

g2up_status g2up_g2_read_csv(const char *path, g2up_g2 **out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        std::ifstream in(path);
        if (!in) {
            throw ConfigError(std::string("cannot open ") + path, "io_error");
        }
        *out = new g2up_g2{hbt::read_g2_csv(in)};
    });
}

g2up_status g2up_g2_write_csv(const g2up_g2 *estimate, const char *path) {
    return guarded([&] {
        require(estimate, "estimate");
        auto out = open_out(path);
        hbt::write_g2_csv(out, estimate->estimate);
        close_out(out, path);
    });
}

size_t g2up_g2_size(const g2up_g2 *estimate) {
    return estimate ? estimate->estimate.points.size() : 0;
}

g2up_status g2up_g2_point_at(const g2up_g2 *estimate, size_t index, g2up_g2_point *out) {
    return guarded([&] {
        require(estimate, "estimate");
        require(out, "out");
        const auto &pts = estimate->estimate.points;
        if (index >= pts.size()) {
            throw ConfigError("point index out of range", "index_out_of_range");
        }
        const auto &p = pts[index];
        *out = {p.dt_ps, p.c, p.c_err, p.g2, p.g2_err};
    });
}

void g2up_g2_free(g2up_g2 *estimate) {
    delete estimate;
}

g2up_status g2up_fit_peak(const g2up_g2 *estimate, double lo_ps, double hi_ps, g2up_peak_fit *out) {
    return guarded([&] {
        require(estimate, "estimate");
        require(out, "out");
        auto trace = window(estimate->estimate, lo_ps, hi_ps);
        auto f = analysis::fit_gaussian_peak(trace);
        *out = {f.center_ps,     f.fwhm_ps,       f.amplitude,    f.baseline,     f.center_err,
                f.fwhm_err,      f.amplitude_err, f.baseline_err, f.reduced_chi2, f.iterations,
                f.dip ? 1 : 0, f.fwhm_unconstrained ? 1 : 0};
    });
}

g2up_status g2up_visibility(const g2up_g2 *estimate, double frequency_ghz, double response_fwhm_ps,
                            g2up_visibility_result *out) {
    return guarded([&] {
        require(estimate, "estimate");
        require(out, "out");
        auto trace = analysis::trace_of(estimate->estimate);
        if (response_fwhm_ps > 0) {
            trace = analysis::convolve_gaussian(trace, response_fwhm_ps);
        }
        auto v = analysis::visibility(trace, frequency_ghz);
        *out = {v.visibility, v.error, v.offset, v.amplitude, v.phase_rad};
    });
}

g2up_status g2up_violation(const g2up_g2 *estimate, g2up_violation_result *out) {
    return guarded([&] {
        require(estimate, "estimate");
        require(out, "out");
        auto v = analysis::classical_violation(estimate->estimate);
        *out = {v.significance_sigma, v.argmax_dt_ps, v.difference, v.sigma};
    });
}

g2up_status g2up_mean(const g2up_g2 *estimate, g2up_mean_result *out) {
    return guarded([&] {
        require(estimate, "estimate");
        require(out, "out");
        auto m = analysis::mean_g2(estimate->estimate);
        double worst = 0;
        for (const auto &p : estimate->estimate.points) {
            if (p.g2_err > 0) {
                worst = std::max(worst, std::abs(p.g2 - 1.0) / p.g2_err);
            }
        }
        *out = {m.mean, m.error, worst};
    });
}

g2up_status g2up_deconvolve(double measured_fwhm_ps, double measured_err_ps, double pulse_fwhm_ps,
                            double pulse_err_ps, double *resolution_ps, double *error_ps) {
    return guarded([&] {
        require(resolution_ps, "resolution_ps");
        auto d = analysis::deconvolve_resolution(measured_fwhm_ps, measured_err_ps, pulse_fwhm_ps, pulse_err_ps);
        *resolution_ps = d.resolution_ps;
        if (error_ps) {
            *error_ps = d.error_ps;
        }
    });
}

g2up_status g2up_gate_duty_cycle(double resolution_fwhm_ps, double rep_rate_mhz, double *duty) {
    return guarded([&] {
        require(duty, "duty");
        *duty = analysis::gate_duty_cycle(resolution_fwhm_ps, rep_rate_mhz);
    });
}

g2up_status g2up_budget(const char *const *names, const double *factors, size_t n, double *product) {
    return guarded([&] {
        require(product, "product");
        if (n > 0) {
            require(names, "names");
            require(factors, "factors");
        }
        std::vector<std::pair<std::string, double>> f;
        for (size_t i = 0; i < n; i++) {
            require(names[i], "factor name");
            f.emplace_back(names[i], factors[i]);
        }
        *product = analysis::efficiency_budget(f).product;
    });
}

size_t g2up_default_budget_size(void) {
    return analysis::default_budget_factors().size();
}

g2up_status g2up_default_budget_factor(size_t index, const char **name, double *value) {
    return guarded([&] {
        require(name, "name");
        require(value, "value");
        static const auto factors = analysis::default_budget_factors();
        if (index >= factors.size()) {
            throw ConfigError("budget factor index out of range", "index_out_of_range");
        }
        *name = factors[index].first.c_str();
        *value = factors[index].second;
    });
}

}  // extern "C"
