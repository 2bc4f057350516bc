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

#include "g2up/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "g2up/errors.hpp"
#include "json.hpp"

namespace g2up::experiment {

namespace {

using nlohmann::json;

void allow_keys(const json &j, const char *where, std::initializer_list<const char *> keys) {
    if (!j.is_object()) {
        throw ConfigError(std::string(where) + " must be a JSON object", "invalid_experiment");
    }
    for (const auto &item : j.items()) {
        bool known = false;
        for (const char *k : keys) {
            known |= item.key() == k;
        }
        if (!known) {
            throw ConfigError(std::string("unknown key '") + item.key() + "' in " + where, "invalid_experiment");
        }
    }
}

template <typename T>
T get(const json &j, const char *key, const char *where) {
    if (!j.contains(key)) {
        throw ConfigError(std::string("missing key '") + key + "' in " + where, "invalid_experiment");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception &) {
        throw ConfigError(std::string("key '") + key + "' in " + where + " has the wrong type", "invalid_experiment");
    }
}

template <typename T>
T get_or(const json &j, const char *key, T fallback, const char *where) {
    return j.contains(key) ? get<T>(j, key, where) : fallback;
}

std::vector<double> parse_delays(const json &j) {
    if (j.is_array()) {
        std::vector<double> out;
        for (const auto &v : j) {
            if (!v.is_number()) {
                throw ConfigError("delays_ps entries must be numbers", "invalid_experiment");
            }
            out.push_back(v.get<double>());
        }
        return out;
    }
    allow_keys(j, "delays_ps", {"from", "to", "step"});
    double from = get<double>(j, "from", "delays_ps");
    double to = get<double>(j, "to", "delays_ps");
    double step = get<double>(j, "step", "delays_ps");
    if (!(step > 0) || !(to >= from)) {
        throw ConfigError("delay range needs step > 0 and to >= from", "invalid_experiment");
    }
    auto n = static_cast<std::size_t>(std::llround((to - from) / step)) + 1;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; i++) {
        double d = from + static_cast<double>(i) * step;
        out[i] = std::abs(d) < 1e-9 * step ? 0.0 : d;
    }
    return out;
}

propagation::GateResponse parse_gate(const json &j, const std::string &base_dir, json &summary) {
    auto type = get<std::string>(j, "type", "gate");
    if (type == "gaussian") {
        allow_keys(j, "gate", {"type", "fwhm_ps", "dt_ps"});
        auto g = propagation::GateResponse::gaussian(get<double>(j, "fwhm_ps", "gate"),
                                                     get_or<double>(j, "dt_ps", 0.05, "gate"));
        summary = j;
        summary["fwhm_ps"] = g.fwhm_ps;
        return g;
    }
    if (type == "csv") {
        allow_keys(j, "gate", {"type", "path"});
        std::filesystem::path p = get<std::string>(j, "path", "gate");
        if (p.is_relative()) {
            p = std::filesystem::path(base_dir) / p;
        }
        std::ifstream in(p);
        if (!in) {
            throw ConfigError("cannot open gate file " + p.string(), "io_error");
        }
        auto g = propagation::read_gate_csv(in);
        summary = {{"type", "csv"}, {"path", p.string()}, {"fwhm_ps", g.fwhm_ps}};
        return g;
    }
    if (type == "simulated") {
        allow_keys(j, "gate", {"type", "pump_power_mw", "coupling", "signal_nm", "pump_fwhm_ps"});
        auto model = dispersion::SellmeierModel::mgo_congruent_ln();
        auto setup = propagation::Setup::standard(model);
        setup.pump.average_power_mw = get_or<double>(j, "pump_power_mw", setup.pump.average_power_mw, "gate");
        setup.crystal.coupling = get_or<double>(j, "coupling", setup.crystal.coupling, "gate");
        setup.pump.fwhm_ps = get_or<double>(j, "pump_fwhm_ps", setup.pump.fwhm_ps, "gate");
        if (j.contains("signal_nm")) {
            setup.signal_wavelength_nm = get<double>(j, "signal_nm", "gate");
            setup.pump.wavelength_nm =
                dispersion::solve_qpm_pump(setup.signal_wavelength_nm, setup.crystal, model).pump_nm;
        }
        auto g = propagation::gate_response(propagation::propagate(setup, model));
        summary = {{"type", "simulated"},
                   {"pump_power_mw", setup.pump.average_power_mw},
                   {"coupling", setup.crystal.coupling},
                   {"signal_nm", setup.signal_wavelength_nm},
                   {"pump_nm", setup.pump.wavelength_nm},
                   {"pump_fwhm_ps", setup.pump.fwhm_ps},
                   {"fwhm_ps", g.fwhm_ps}};
        return g;
    }
    throw ConfigError("unknown gate type '" + type + "'", "invalid_experiment");
}

hbt::SourceModel parse_source(const json &j, const propagation::GateResponse &gate) {
    auto kind = get<std::string>(j, "kind", "source");
    if (kind == "coherent_cw") {
        allow_keys(j, "source", {"kind", "mean_rate"});
        return hbt::CoherentCw{get<double>(j, "mean_rate", "source")};
    }
    if (kind == "modulated_cw") {
        allow_keys(j, "source", {"kind", "mean_rate", "depth", "frequency_ghz", "phase_random"});
        return hbt::ModulatedCw{get<double>(j, "mean_rate", "source"), get<double>(j, "depth", "source"),
                                get<double>(j, "frequency_ghz", "source"),
                                get_or<bool>(j, "phase_random", true, "source")};
    }
    if (kind == "pulsed_coherent") {
        allow_keys(j, "source",
                   {"kind", "pulse_fwhm_ps", "shape", "mean_photons_per_pulse", "rep_incommensurate", "offset_ps"});
        hbt::PulsedCoherent p;
        p.pulse_fwhm_ps = get_or<double>(j, "pulse_fwhm_ps", p.pulse_fwhm_ps, "source");
        p.shape = propagation::parse_pulse_shape(get_or<std::string>(j, "shape", "sech2", "source"));
        p.mean_photons_per_pulse = get<double>(j, "mean_photons_per_pulse", "source");
        p.rep_incommensurate = get_or<bool>(j, "rep_incommensurate", true, "source");
        p.offset_ps = get_or<double>(j, "offset_ps", 0.0, "source");
        return p;
    }
    if (kind == "analytic_g2") {
        allow_keys(j, "source", {"kind", "mean_rate", "model"});
        hbt::AnalyticG2 a;
        a.mean_rate = get<double>(j, "mean_rate", "source");
        const json &m = j.contains("model") ? j.at("model") : json();
        auto type = get<std::string>(m, "type", "source.model");
        if (type == "bunching_antibunching") {
            allow_keys(m, "source.model",
                       {"type", "antibunching", "antibunching_tau_ps", "bunching", "bunching_tau_ps", "solve"});
            if (m.contains("solve")) {
                const json &s = m.at("solve");
                allow_keys(s, "source.model.solve", {"g2_zero", "g2_max", "tau_a_ps", "tau_b_ps", "against"});
                double g0 = get<double>(s, "g2_zero", "source.model.solve");
                double gm = get<double>(s, "g2_max", "source.model.solve");
                double ta = get_or<double>(s, "tau_a_ps", 8.0, "source.model.solve");
                double tb = get_or<double>(s, "tau_b_ps", 35.0, "source.model.solve");
                auto against = get_or<std::string>(s, "against", "measured", "source.model.solve");
                if (against == "measured") {
                    a.curve = hbt::BunchingAntibunching::from_measured_constraints(g0, gm, ta, tb, gate);
                } else if (against == "source") {
                    a.curve = hbt::BunchingAntibunching::from_source_constraints(g0, gm, ta, tb);
                } else {
                    throw ConfigError("solve.against must be 'measured' or 'source'", "invalid_experiment");
                }
            } else {
                a.curve = hbt::BunchingAntibunching{get<double>(m, "antibunching", "source.model"),
                                                    get<double>(m, "antibunching_tau_ps", "source.model"),
                                                    get<double>(m, "bunching", "source.model"),
                                                    get<double>(m, "bunching_tau_ps", "source.model")};
            }
        } else if (type == "tabulated") {
            allow_keys(m, "source.model", {"type", "tau_ps", "g2"});
            a.curve = hbt::TabulatedG2{get<std::vector<double>>(m, "tau_ps", "source.model"),
                                       get<std::vector<double>>(m, "g2", "source.model")};
        } else {
            throw ConfigError("unknown analytic g2 model '" + type + "'", "invalid_experiment");
        }
        return a;
    }
    throw ConfigError("unknown source kind '" + kind + "'", "invalid_experiment");
}

json source_to_json(const hbt::SourceModel &source) {
    json out;
    out["kind"] = hbt::source_kind(source);
    if (const auto *c = std::get_if<hbt::CoherentCw>(&source)) {
        out["mean_rate"] = c->mean_rate;
    } else if (const auto *m = std::get_if<hbt::ModulatedCw>(&source)) {
        out["mean_rate"] = m->mean_rate;
        out["depth"] = m->depth;
        out["frequency_ghz"] = m->frequency_ghz;
        out["phase_random"] = m->phase_random;
    } else if (const auto *p = std::get_if<hbt::PulsedCoherent>(&source)) {
        out["pulse_fwhm_ps"] = p->pulse_fwhm_ps;
        out["shape"] = propagation::pulse_shape_name(p->shape);
        out["mean_photons_per_pulse"] = p->mean_photons_per_pulse;
        out["rep_incommensurate"] = p->rep_incommensurate;
        out["offset_ps"] = p->offset_ps;
    } else if (const auto *a = std::get_if<hbt::AnalyticG2>(&source)) {
        out["mean_rate"] = a->mean_rate;
        if (const auto *ba = std::get_if<hbt::BunchingAntibunching>(&a->curve)) {
            out["model"] = {{"type", "bunching_antibunching"},
                            {"antibunching", ba->antibunching},
                            {"antibunching_tau_ps", ba->antibunching_tau_ps},
                            {"bunching", ba->bunching},
                            {"bunching_tau_ps", ba->bunching_tau_ps}};
        } else {
            const auto &t = std::get<hbt::TabulatedG2>(a->curve);
            out["model"] = {{"type", "tabulated"}, {"tau_ps", t.tau_ps}, {"g2", t.g2}};
        }
    }
    return out;
}

}  // namespace

Experiment parse(const std::string &json_text, const std::string &base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception &e) {
        throw ConfigError(std::string("experiment is not valid JSON: ") + e.what(), "invalid_experiment");
    }
    allow_keys(j, "experiment", {"name", "description", "source", "measurement"});
    Experiment ex;
    ex.name = get_or<std::string>(j, "name", "experiment", "experiment");

    const json &m = j.contains("measurement") ? j.at("measurement") : json();
    allow_keys(m, "measurement",
               {"rep_period_ns", "n_periods", "delays_ps", "gate", "conversion_efficiency", "transmission",
                "detector_efficiency", "splitter_ratio", "rng_seed", "dark_count_probability", "chunk_periods",
                "threads"});
    auto &cfg = ex.config;
    cfg.rep_period_ns = get_or<double>(m, "rep_period_ns", cfg.rep_period_ns, "measurement");
    cfg.n_periods = get<std::uint64_t>(m, "n_periods", "measurement");
    if (!m.contains("delays_ps")) {
        throw ConfigError("missing key 'delays_ps' in measurement", "invalid_experiment");
    }
    cfg.delays_ps = parse_delays(m.at("delays_ps"));
    json gate_summary;
    if (!m.contains("gate")) {
        throw ConfigError("missing key 'gate' in measurement", "invalid_experiment");
    }
    cfg.gate = parse_gate(m.at("gate"), base_dir, gate_summary);
    cfg.conversion_efficiency = get_or<double>(m, "conversion_efficiency", 1.0, "measurement");
    cfg.transmission = get_or<double>(m, "transmission", 1.0, "measurement");
    cfg.detector_efficiency = get_or<double>(m, "detector_efficiency", 1.0, "measurement");
    cfg.splitter_ratio = get_or<double>(m, "splitter_ratio", 0.5, "measurement");
    cfg.rng_seed = get_or<std::uint64_t>(m, "rng_seed", cfg.rng_seed, "measurement");
    cfg.dark_count_probability = get_or<double>(m, "dark_count_probability", 0.0, "measurement");
    cfg.chunk_periods = get_or<std::uint64_t>(m, "chunk_periods", cfg.chunk_periods, "measurement");
    cfg.threads = get_or<unsigned>(m, "threads", 0u, "measurement");

    if (!j.contains("source")) {
        throw ConfigError("missing key 'source' in experiment", "invalid_experiment");
    }
    ex.source = parse_source(j.at("source"), cfg.gate);
    hbt::validate(ex.source);
    cfg.validate();

    json resolved;
    resolved["name"] = ex.name;
    resolved["source"] = source_to_json(ex.source);
    resolved["measurement"] = {{"rep_period_ns", cfg.rep_period_ns},
                               {"n_periods", cfg.n_periods},
                               {"delays_ps", cfg.delays_ps},
                               {"gate", gate_summary},
                               {"conversion_efficiency", cfg.conversion_efficiency},
                               {"transmission", cfg.transmission},
                               {"detector_efficiency", cfg.detector_efficiency},
                               {"splitter_ratio", cfg.splitter_ratio},
                               {"rng_seed", cfg.rng_seed},
                               {"dark_count_probability", cfg.dark_count_probability},
                               {"chunk_periods", cfg.chunk_periods}};
    ex.resolved_json = resolved.dump(2);
    return ex;
}

Experiment load(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open experiment file " + path, "io_error");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    auto dir = std::filesystem::path(path).parent_path();
    return parse(ss.str(), dir.empty() ? "." : dir.string());
}

std::string source_json(const hbt::SourceModel &source) {
    return source_to_json(source).dump();
}

}  // namespace g2up::experiment
