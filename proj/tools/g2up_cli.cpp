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

// Command-line front end. Talks to the library only through g2up.h.

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "g2up/g2up.h"
#include "json.hpp"

using json = nlohmann::ordered_json;

namespace {

struct Failure {
    g2up_status status;
    std::string kind;
    std::string message;
};

void check(g2up_status s) {
    if (s != G2UP_OK) {
        throw Failure{s, g2up_last_error_kind(), g2up_last_error()};
    }
}

[[noreturn]] void usage(const std::string &message) {
    throw Failure{G2UP_ERR_CONFIG, "usage_error", message};
}

template <class T, void (*Free)(T *)>
struct Deleter {
    void operator()(T *p) const {
        Free(p);
    }
};
using SetupPtr = std::unique_ptr<g2up_setup, Deleter<g2up_setup, g2up_setup_free>>;
using ExperimentPtr = std::unique_ptr<g2up_experiment, Deleter<g2up_experiment, g2up_experiment_free>>;
using HistogramPtr = std::unique_ptr<g2up_histogram, Deleter<g2up_histogram, g2up_histogram_free>>;
using G2Ptr = std::unique_ptr<g2up_g2, Deleter<g2up_g2, g2up_g2_free>>;

std::string sha256_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Failure{G2UP_ERR_CONFIG, "io_error", "cannot read " + path};
    }
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw Failure{G2UP_ERR_INTERNAL, "internal_error", "SHA-256 unavailable"};
    }
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; i++) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    }
    return hex.str();
}

/// Bookkeeping for the manifest written next to the primary output.
struct Run {
    std::string command;
    std::vector<std::string> args;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    json extra = json::object();
    std::string manifest_path;

    void write_manifest() const {
        json m;
        m["command"] = command;
        m["args"] = args;
        m["seed"] = seed ? json(*seed) : json(nullptr);
        json in = json::array();
        for (const auto &p : inputs) {
            in.push_back({{"path", p}, {"sha256", sha256_file(p)}});
        }
        m["inputs"] = in;
        json out = json::array();
        for (const auto &p : outputs) {
            out.push_back({{"path", p}, {"sha256", sha256_file(p)}});
        }
        m["outputs"] = out;
        for (const auto &[k, v] : extra.items()) {
            m[k] = v;
        }
        m["tool"] = {{"name", "g2up"}, {"version", g2up_version()}};
        std::ofstream f(manifest_path);
        f << m.dump(2) << '\n';
        if (!f) {
            throw Failure{G2UP_ERR_CONFIG, "io_error", "cannot write " + manifest_path};
        }
    }
};

void write_json(const std::string &path, const json &j) {
    std::ofstream f(path);
    f << j.dump(2) << '\n';
    if (!f) {
        throw Failure{G2UP_ERR_CONFIG, "io_error", "cannot write " + path};
    }
}

double parse_number(const std::string &s) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (used == 0 || used != s.size()) {
        usage("not a number: '" + s + "'");
    }
    return v;
}

std::vector<std::string> split(const std::string &text, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, sep);) {
        parts.push_back(p);
    }
    return parts;
}

struct Range {
    double from, to, step;
};

Range parse_range(const std::string &text) {
    auto parts = split(text, ':');
    if (parts.size() != 3) {
        usage("range must be from:to:step, got '" + text + "'");
    }
    Range r{parse_number(parts[0]), parse_number(parts[1]), parse_number(parts[2])};
    if (!(r.step > 0) || !(r.to >= r.from)) {
        usage("range needs from <= to and step > 0");
    }
    return r;
}

/// "from:to:step" or a comma-separated list.
std::vector<double> parse_values(const std::string &text) {
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        auto r = parse_range(text);
        auto n = static_cast<long>(std::floor((r.to - r.from) / r.step + 1e-9));
        for (long k = 0; k <= n; k++) {
            out.push_back(r.from + static_cast<double>(k) * r.step);
        }
        return out;
    }
    for (const auto &p : split(text, ',')) {
        out.push_back(parse_number(p));
    }
    if (out.empty()) {
        usage("empty value list");
    }
    return out;
}

/// Propagation setup flags shared by propagate, sweep and calibrate.
struct SetupFlags {
    std::optional<double> pump_power_mw, pump_fwhm_ps, coupling, signal_nm, length_mm, poling_um, temperature_c,
        time_window_ps, n_time, n_z;

    void add(CLI::App *app) {
        app->add_option("--pump-power", pump_power_mw, "Average pump power (mW)");
        app->add_option("--pump-fwhm", pump_fwhm_ps, "Pump intensity FWHM (ps)");
        app->add_option("--coupling", coupling, "Coupling constant (W^-1/2 mm^-1)");
        app->add_option("--signal-nm", signal_nm, "Signal wavelength (nm); the pump is re-phase-matched");
        app->add_option("--length", length_mm, "Crystal length (mm)");
        app->add_option("--poling", poling_um, "Poling period (um)");
        app->add_option("--temperature", temperature_c, "Crystal temperature (C)");
        app->add_option("--time-window", time_window_ps, "Time window (ps)");
        app->add_option("--n-time", n_time, "Time samples");
        app->add_option("--n-z", n_z, "Propagation steps");
    }

    SetupPtr build() const {
        g2up_setup *raw = nullptr;
        check(g2up_setup_new(&raw));
        SetupPtr s(raw);
        auto set = [&](const char *key, const std::optional<double> &v) {
            if (v) {
                check(g2up_setup_set(s.get(), key, *v));
            }
        };
        set("temperature_c", temperature_c);
        set("poling_period_um", poling_um);
        set("signal_nm", signal_nm);
        set("pump_power_mw", pump_power_mw);
        set("pump_fwhm_ps", pump_fwhm_ps);
        set("coupling", coupling);
        set("length_mm", length_mm);
        set("time_window_ps", time_window_ps);
        set("n_time", n_time);
        set("n_z", n_z);
        return s;
    }
};

json setup_json(const g2up_setup *s) {
    json j;
    for (const char *key : {"signal_nm", "pump_nm", "pump_power_mw", "pump_fwhm_ps", "rep_rate_mhz", "coupling",
                            "length_mm", "poling_period_um", "temperature_c", "time_window_ps", "n_time", "n_z"}) {
        double v = 0;
        check(g2up_setup_get(s, key, &v));
        j[key] = v;
    }
    return j;
}

json point_json(const g2up_g2_point &p) {
    return {{"dt_ps", p.dt_ps}, {"g2", p.g2}, {"g2_err", p.g2_err}};
}

int emit_error(const Failure &f) {
    json e = {{"error", {{"status", static_cast<int>(f.status)}, {"kind", f.kind}, {"message", f.message}}}};
    std::cerr << e.dump() << std::endl;
    return static_cast<int>(f.status);
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Upconversion-gated photon correlation toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(g2up_version()));
    std::string manifest;
    app.add_option("--manifest", manifest, "Manifest path (default: <output>.manifest.json)");

    Run run;
    for (int i = 1; i < argc; i++) {
        run.args.emplace_back(argv[i]);
    }
    json result;

    // qpm
    auto *qpm = app.add_subcommand("qpm", "Quasi-phase-matching curve");
    std::string qpm_signal = "750:1150:1", qpm_out = "qpm.csv";
    double qpm_poling = 3.96, qpm_temperature = 25.0;
    std::optional<double> qpm_at;
    qpm->add_option("--signal", qpm_signal, "Signal range from:to:step (nm)")->capture_default_str();
    qpm->add_option("--poling", qpm_poling, "Poling period (um)")->capture_default_str();
    qpm->add_option("--temperature", qpm_temperature, "Crystal temperature (C)")->capture_default_str();
    qpm->add_option("--at", qpm_at, "Also report the solution at this signal wavelength (nm)");
    qpm->add_option("-o,--output", qpm_out, "Output CSV")->capture_default_str();
    qpm->callback([&] {
        run.command = "qpm";
        auto range = parse_range(qpm_signal);
        size_t roots = 0;
        check(g2up_write_qpm_csv(range.from, range.to, range.step, qpm_poling, qpm_temperature, qpm_out.c_str(),
                                 &roots));
        run.outputs.push_back(qpm_out);
        result = {{"output", qpm_out}, {"points", parse_values(qpm_signal).size()}, {"roots_found", roots}};
        if (qpm_at) {
            g2up_qpm_point p{};
            check(g2up_solve_qpm_pump(*qpm_at, qpm_poling, qpm_temperature, &p));
            result["at"] = {{"signal_nm", p.signal_nm},
                            {"pump_nm", p.pump_nm},
                            {"sfg_nm", p.sfg_nm},
                            {"multiple_roots", p.multiple_roots != 0}};
        }
        run.manifest_path = qpm_out + ".manifest.json";
    });

    // propagate
    auto *prop = app.add_subcommand("propagate", "Propagate one pump pulse with a CW signal");
    SetupFlags prop_flags;
    prop_flags.add(prop);
    std::string prop_prefix = "propagation";
    prop->add_option("--prefix", prop_prefix, "Output prefix")->capture_default_str();
    prop->callback([&] {
        run.command = "propagate";
        auto s = prop_flags.build();
        g2up_propagation_summary sum{};
        check(g2up_propagate(s.get(), prop_prefix.c_str(), &sum));
        for (const char *suffix : {"_meta.json", "_pump.csv", "_signal.csv", "_sfg.csv", "_gate.csv"}) {
            run.outputs.push_back(prop_prefix + suffix);
        }
        result = {{"setup", setup_json(s.get())},
                  {"sfg_energy_pj", sum.sfg_energy_pj},
                  {"pump_depletion", sum.pump_depletion},
                  {"manley_rowe_drift", sum.manley_rowe_drift},
                  {"gate_fwhm_ps", sum.gate_fwhm_ps},
                  {"sfg_wavelength_nm", sum.sfg_wavelength_nm}};
        std::string summary = prop_prefix + "_summary.json";
        write_json(summary, result);
        run.outputs.push_back(summary);
        run.manifest_path = prop_prefix + ".manifest.json";
    });

    // sweep
    auto *sweep = app.add_subcommand("sweep", "Pump power sweep of SFG energy and gate width");
    SetupFlags sweep_flags;
    sweep_flags.add(sweep);
    std::string sweep_powers = "0.1,0.25,0.5,1,1.5,2,3,4,5", sweep_out = "sweep.csv";
    sweep->add_option("--powers", sweep_powers, "Powers (mW): from:to:step or a list")->capture_default_str();
    sweep->add_option("-o,--output", sweep_out, "Output CSV")->capture_default_str();
    sweep->callback([&] {
        run.command = "sweep";
        auto s = sweep_flags.build();
        auto powers = parse_values(sweep_powers);
        check(g2up_sweep_csv(s.get(), powers.data(), powers.size(), sweep_out.c_str()));
        run.outputs.push_back(sweep_out);
        result = {{"output", sweep_out}, {"points", powers.size()}, {"setup", setup_json(s.get())}};
        run.manifest_path = sweep_out + ".manifest.json";
    });

    // calibrate
    auto *cal = app.add_subcommand("calibrate", "Fit the coupling constant");
    SetupFlags cal_flags;
    cal_flags.add(cal);
    std::string cal_measurement, cal_out = "calibration.json";
    std::optional<double> cal_target, cal_initial;
    auto *cal_m = cal->add_option("--measurement", cal_measurement, "CSV with columns power_mw,output");
    auto *cal_t = cal->add_option("--target-fwhm", cal_target, "Gate FWHM (ps) to reach at the pump power");
    cal_m->excludes(cal_t);
    cal->add_option("--initial-coupling", cal_initial, "Starting coupling for the saturation fit");
    cal->add_option("-o,--output", cal_out, "Output JSON")->capture_default_str();
    cal->callback([&] {
        run.command = "calibrate";
        auto s = cal_flags.build();
        if (!cal_measurement.empty()) {
            double initial = 0;
            check(g2up_setup_get(s.get(), "coupling", &initial));
            g2up_saturation_fit fit{};
            check(g2up_fit_saturation(s.get(), cal_measurement.c_str(), cal_initial.value_or(initial), &fit));
            run.inputs.push_back(cal_measurement);
            result = {{"method", "saturation_fit"},
                      {"coupling", fit.coupling},
                      {"scale", fit.scale},
                      {"rms_relative_residual", fit.rms_relative_residual},
                      {"iterations", fit.iterations}};
        } else if (cal_target) {
            double coupling = 0;
            check(g2up_calibrate_resolution(s.get(), *cal_target, &coupling));
            result = {{"method", "resolution"}, {"target_fwhm_ps", *cal_target}, {"coupling", coupling}};
        } else {
            usage("calibrate needs --measurement or --target-fwhm");
        }
        result["setup"] = setup_json(s.get());
        write_json(cal_out, result);
        run.outputs.push_back(cal_out);
        run.manifest_path = cal_out + ".manifest.json";
    });

    // simulate
    auto *sim = app.add_subcommand("simulate", "Run an experiment file through the HBT simulation");
    std::string sim_exp, sim_out = "g2.csv", sim_hist;
    std::optional<std::uint64_t> sim_seed, sim_periods;
    unsigned sim_threads = 0;
    bool sim_oracle = false;
    double sim_trace_dt = 0.05;
    sim->add_option("experiment", sim_exp, "Experiment JSON")->required();
    sim->add_option("-o,--output", sim_out, "g2 CSV")->capture_default_str();
    sim->add_option("--histogram", sim_hist, "Also write the raw coincidence histogram CSV");
    sim->add_option("--seed", sim_seed, "Override the experiment seed");
    sim->add_option("--n-periods", sim_periods, "Override the number of repetition periods");
    sim->add_option("--threads", sim_threads, "Worker threads (0: all cores); output does not depend on it");
    sim->add_flag("--oracle", sim_oracle, "Use the photon-level intensity-trace sampler");
    sim->add_option("--trace-dt", sim_trace_dt, "Trace step for --oracle (ps)")->capture_default_str();
    sim->callback([&] {
        run.command = "simulate";
        g2up_experiment *raw = nullptr;
        check(g2up_experiment_load(sim_exp.c_str(), &raw));
        ExperimentPtr exp(raw);
        run.inputs.push_back(sim_exp);
        if (sim_seed) {
            check(g2up_experiment_set_seed(exp.get(), *sim_seed));
        }
        if (sim_periods) {
            check(g2up_experiment_set_n_periods(exp.get(), *sim_periods));
        }
        check(g2up_experiment_set_threads(exp.get(), sim_threads));
        run.seed = g2up_experiment_seed(exp.get());

        g2up_histogram *hraw = nullptr;
        check(sim_oracle ? g2up_simulate_oracle(exp.get(), sim_trace_dt, &hraw) : g2up_simulate(exp.get(), &hraw));
        HistogramPtr hist(hraw);
        if (!sim_hist.empty()) {
            check(g2up_histogram_write_csv(hist.get(), sim_hist.c_str()));
            run.outputs.push_back(sim_hist);
        }
        g2up_g2 *graw = nullptr;
        check(g2up_estimate(hist.get(), &graw));
        G2Ptr g2(graw);
        check(g2up_g2_write_csv(g2.get(), sim_out.c_str()));
        run.outputs.insert(run.outputs.begin(), sim_out);
        run.extra["resolved_experiment"] = json::parse(g2up_experiment_resolved_json(exp.get()));
        result = {{"output", sim_out}, {"bins", g2up_g2_size(g2.get())}, {"seed", *run.seed},
                  {"sampler", sim_oracle ? "oracle" : "gate"}};
        run.manifest_path = sim_out + ".manifest.json";
    });

    // analyze
    auto *ana = app.add_subcommand("analyze", "Derived quantities from a g2 CSV");
    std::string ana_in, ana_out = "analysis.json", ana_window;
    bool ana_mean = false, ana_peak = false, ana_violation = false;
    std::optional<double> ana_freq;
    double ana_response = 0;
    std::vector<double> ana_deconv;
    double ana_measured_err = 0, ana_pulse_err = 0;
    ana->add_option("g2_csv", ana_in, "g2 CSV written by simulate");
    ana->add_flag("--mean", ana_mean, "Mean g2 and the largest deviation from 1");
    ana->add_flag("--fit-peak", ana_peak, "Gaussian peak fit");
    ana->add_option("--window", ana_window, "Fit window lo:hi (ps) for --fit-peak");
    ana->add_option("--visibility", ana_freq, "Oscillation visibility at this frequency (GHz)");
    ana->add_option("--response-fwhm", ana_response, "Gaussian timing response applied before --visibility (ps)");
    ana->add_flag("--violation", ana_violation, "Significance of g2(dt) > g2(0)");
    ana->add_option("--deconvolve", ana_deconv, "MEASURED_FWHM PULSE_FWHM (ps)")->expected(2);
    ana->add_option("--measured-err", ana_measured_err, "Uncertainty of the measured FWHM for --deconvolve");
    ana->add_option("--pulse-err", ana_pulse_err, "Uncertainty of the pulse FWHM for --deconvolve");
    ana->add_option("-o,--output", ana_out, "Output JSON")->capture_default_str();
    ana->callback([&] {
        run.command = "analyze";
        const bool needs_trace = ana_mean || ana_peak || ana_violation || ana_freq;
        if (!needs_trace && ana_deconv.empty()) {
            usage("analyze needs at least one of --mean, --fit-peak, --visibility, --violation, --deconvolve");
        }
        G2Ptr g2;
        if (needs_trace) {
            if (ana_in.empty()) {
                usage("this analysis needs a g2 CSV");
            }
            g2up_g2 *raw = nullptr;
            check(g2up_g2_read_csv(ana_in.c_str(), &raw));
            g2.reset(raw);
            run.inputs.push_back(ana_in);
            result["input"] = ana_in;
        }
        if (ana_mean) {
            g2up_mean_result m{};
            check(g2up_mean(g2.get(), &m));
            result["mean"] = {{"mean", m.mean}, {"error", m.error}, {"max_deviation_sigma", m.max_deviation_sigma}};
        }
        if (ana_peak) {
            double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
            if (!ana_window.empty()) {
                auto parts = split(ana_window, ':');
                if (parts.size() != 2) {
                    usage("--window takes lo:hi");
                }
                lo = parse_number(parts[0]);
                hi = parse_number(parts[1]);
            }
            g2up_peak_fit f{};
            check(g2up_fit_peak(g2.get(), lo, hi, &f));
            result["peak"] = {{"center_ps", f.center_ps},       {"center_err", f.center_err},
                              {"fwhm_ps", f.fwhm_ps},           {"fwhm_err", f.fwhm_err},
                              {"amplitude", f.amplitude},       {"amplitude_err", f.amplitude_err},
                              {"baseline", f.baseline},         {"baseline_err", f.baseline_err},
                              {"reduced_chi2", f.reduced_chi2}, {"iterations", f.iterations},
                              {"dip", f.dip != 0},              {"fwhm_unconstrained", f.fwhm_unconstrained != 0}};
        }
        if (ana_freq) {
            g2up_visibility_result v{};
            check(g2up_visibility(g2.get(), *ana_freq, ana_response, &v));
            result["visibility"] = {{"frequency_ghz", *ana_freq}, {"response_fwhm_ps", ana_response},
                                    {"visibility", v.visibility}, {"error", v.error},
                                    {"offset", v.offset},         {"amplitude", v.amplitude},
                                    {"phase_rad", v.phase_rad}};
        }
        if (ana_violation) {
            g2up_violation_result v{};
            check(g2up_violation(g2.get(), &v));
            g2up_g2_point zero{};
            for (size_t i = 0; i < g2up_g2_size(g2.get()); i++) {
                g2up_g2_point p{};
                check(g2up_g2_point_at(g2.get(), i, &p));
                if (p.dt_ps == 0) {
                    zero = p;
                }
            }
            result["violation"] = {{"significance_sigma", v.significance_sigma},
                                   {"argmax_dt_ps", v.argmax_dt_ps},
                                   {"difference", v.difference},
                                   {"sigma", v.sigma},
                                   {"zero", point_json(zero)}};
        }
        if (!ana_deconv.empty()) {
            double r = 0, err = 0;
            check(g2up_deconvolve(ana_deconv[0], ana_measured_err, ana_deconv[1], ana_pulse_err, &r, &err));
            result["deconvolution"] = {{"measured_fwhm_ps", ana_deconv[0]},
                                       {"pulse_fwhm_ps", ana_deconv[1]},
                                       {"resolution_ps", r},
                                       {"error_ps", err}};
        }
        write_json(ana_out, result);
        run.outputs.push_back(ana_out);
        run.manifest_path = ana_out + ".manifest.json";
    });

    // budget
    auto *bud = app.add_subcommand("budget", "Overall detection efficiency");
    std::optional<double> bud_res, bud_rep;
    std::vector<std::string> bud_factors;
    std::string bud_out = "budget.json";
    bud->add_option("--resolution", bud_res, "Gate FWHM (ps) for the duty-cycle factor");
    bud->add_option("--rep-rate", bud_rep, "Repetition rate (MHz) for the duty-cycle factor");
    bud->add_option("--factor", bud_factors, "name=value, overrides or extends the default set");
    bud->add_option("-o,--output", bud_out, "Output JSON")->capture_default_str();
    bud->callback([&] {
        run.command = "budget";
        std::vector<std::pair<std::string, double>> factors;
        for (size_t i = 0; i < g2up_default_budget_size(); i++) {
            const char *name = nullptr;
            double value = 0;
            check(g2up_default_budget_factor(i, &name, &value));
            factors.emplace_back(name, value);
        }
        auto set = [&](const std::string &name, double value) {
            for (auto &f : factors) {
                if (f.first == name) {
                    f.second = value;
                    return;
                }
            }
            factors.emplace_back(name, value);
        };
        if (bud_res || bud_rep) {
            double duty = 0;
            check(g2up_gate_duty_cycle(bud_res.value_or(4.0), bud_rep.value_or(76.0), &duty));
            set("gate_duty_cycle", duty);
        }
        for (const auto &f : bud_factors) {
            auto pos = f.find('=');
            if (pos == std::string::npos || pos == 0) {
                usage("--factor takes name=value");
            }
            set(f.substr(0, pos), parse_number(f.substr(pos + 1)));
        }
        std::vector<const char *> names;
        std::vector<double> values;
        json fj = json::object();
        for (const auto &f : factors) {
            names.push_back(f.first.c_str());
            values.push_back(f.second);
            fj[f.first] = f.second;
        }
        double product = 0;
        check(g2up_budget(names.data(), values.data(), names.size(), &product));
        result = {{"factors", fj}, {"product", product}};
        write_json(bud_out, result);
        run.outputs.push_back(bud_out);
        run.manifest_path = bud_out + ".manifest.json";
    });

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp &e) {
            return app.exit(e);
        } catch (const CLI::CallForAllHelp &e) {
            return app.exit(e);
        } catch (const CLI::CallForVersion &e) {
            return app.exit(e);
        } catch (const CLI::ParseError &e) {
            usage(e.what());
        }
        if (!manifest.empty()) {
            run.manifest_path = manifest;
        }
        run.write_manifest();
        std::cout << result.dump(2) << std::endl;
        return 0;
    } catch (const Failure &f) {
        return emit_error(f);
    } catch (const std::exception &e) {
        return emit_error({G2UP_ERR_INTERNAL, "internal_error", e.what()});
    }
}
