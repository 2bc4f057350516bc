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

#include "g2up/dispersion.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "g2up/csv.hpp"
#include "g2up/errors.hpp"
#include "json.hpp"

namespace g2up::dispersion {

namespace {

constexpr std::size_t kCoefficientCount = 12;

std::string window_text(const SellmeierModel &model) {
    std::ostringstream ss;
    ss << "[" << model.validity_min_nm << ", " << model.validity_max_nm << "] nm";
    return ss.str();
}

void check_window(double lambda_nm, const SellmeierModel &model) {
    if (!std::isfinite(lambda_nm) || !model.contains(lambda_nm)) {
        std::ostringstream ss;
        ss << "wavelength " << lambda_nm << " nm is outside the validity window " << window_text(model)
           << " of Sellmeier model '" << model.name << "'";
        throw DomainError(ss.str());
    }
}

struct SellmeierTerms {
    double n2;
    double dn2_dl;  // per micrometre
};

SellmeierTerms evaluate(double lambda_nm, double temperature_c, const SellmeierModel &model) {
    const auto &c = model.coefficients;
    double l = lambda_nm * 1e-3;
    double l2 = l * l;
    double f = (temperature_c - c[10]) * (temperature_c + c[11]);
    double uv_pole = c[2] + c[8] * f;
    double d1 = l2 - uv_pole * uv_pole;
    double d2 = l2 - c[4] * c[4];
    double num1 = c[1] + c[7] * f;
    double num2 = c[3] + c[9] * f;
    double n2 = c[0] + c[6] * f + num1 / d1 + num2 / d2 - c[5] * l2;
    double dn2 = -2.0 * l * num1 / (d1 * d1) - 2.0 * l * num2 / (d2 * d2) - 2.0 * c[5] * l;
    return {n2, dn2};
}

}  // namespace

SellmeierModel SellmeierModel::mgo_congruent_ln() {
    SellmeierModel m;
    m.name = "mgo_cln_extraordinary_gayer2008";
    m.citation =
        "O. Gayer, Z. Sacks, E. Galun, A. Arie, Temperature and wavelength dependent refractive index "
        "equations for MgO-doped congruent and stoichiometric LiNbO3, Appl. Phys. B 91, 343-348 (2008); "
        "5 mol% MgO:CLN, extraordinary polarization";
    m.coefficients = {5.756, 0.0983, 0.2020, 189.32, 12.52, 1.32e-2, 2.860e-6, 4.700e-8, 6.113e-8, 1.516e-4,
                      24.5,  570.82};
    m.validity_min_nm = 400.0;
    m.validity_max_nm = 4000.0;
    return m;
}

SellmeierModel SellmeierModel::from_json_text(const std::string &text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("Sellmeier file is not valid JSON: ") + e.what());
    }
    SellmeierModel m;
    try {
        m.name = j.at("name").get<std::string>();
        m.citation = j.at("citation").get<std::string>();
        auto coefficients = j.at("coefficients").get<std::vector<double>>();
        if (coefficients.size() != kCoefficientCount) {
            throw ConfigError("Sellmeier file needs " + std::to_string(kCoefficientCount) + " coefficients, got " +
                              std::to_string(coefficients.size()));
        }
        std::copy(coefficients.begin(), coefficients.end(), m.coefficients.begin());
        auto window = j.at("validity_nm").get<std::vector<double>>();
        if (window.size() != 2 || !(window[0] > 0) || !(window[1] > window[0])) {
            throw ConfigError("Sellmeier validity_nm must be [min, max] with 0 < min < max");
        }
        m.validity_min_nm = window[0];
        m.validity_max_nm = window[1];
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("malformed Sellmeier file: ") + e.what());
    }
    return m;
}

SellmeierModel SellmeierModel::load(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open Sellmeier file '" + path + "'", "io_error");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

std::string SellmeierModel::to_json_text() const {
    nlohmann::json j;
    j["name"] = name;
    j["coefficients"] = std::vector<double>(coefficients.begin(), coefficients.end());
    j["validity_nm"] = {validity_min_nm, validity_max_nm};
    j["citation"] = citation;
    return j.dump(2);
}

void CrystalSpec::validate() const {
    if (!(poling_period_um > 0)) {
        throw DomainError("poling period must be positive");
    }
    if (!(length_mm > 0)) {
        throw DomainError("crystal length must be positive");
    }
    if (!(coupling >= 0) || !std::isfinite(coupling)) {
        throw DomainError("coupling constant must be finite and non-negative");
    }
    if (qpm_order <= 0 || qpm_order % 2 == 0) {
        throw DomainError("QPM order must be an odd positive integer");
    }
    if (!std::isfinite(temperature_c)) {
        throw DomainError("crystal temperature must be finite");
    }
}

WaveTriplet WaveTriplet::from_signal_pump(double signal_nm, double pump_nm) {
    return {signal_nm, pump_nm, sfg_wavelength(signal_nm, pump_nm)};
}

double refractive_index(double lambda_nm, double temperature_c, const SellmeierModel &model) {
    check_window(lambda_nm, model);
    return std::sqrt(evaluate(lambda_nm, temperature_c, model).n2);
}

double index_derivative(double lambda_nm, double temperature_c, const SellmeierModel &model) {
    check_window(lambda_nm, model);
    auto t = evaluate(lambda_nm, temperature_c, model);
    return t.dn2_dl / (2.0 * std::sqrt(t.n2)) * 1e-3;
}

double group_index(double lambda_nm, double temperature_c, const SellmeierModel &model) {
    check_window(lambda_nm, model);
    if (lambda_nm == model.validity_min_nm || lambda_nm == model.validity_max_nm) {
        throw DomainError("group index needs a wavelength strictly inside " + window_text(model));
    }
    return refractive_index(lambda_nm, temperature_c, model) -
           lambda_nm * index_derivative(lambda_nm, temperature_c, model);
}

double group_slowness_difference(double lambda_a_nm, double lambda_b_nm, double temperature_c,
                                 const SellmeierModel &model) {
    return (group_index(lambda_a_nm, temperature_c, model) - group_index(lambda_b_nm, temperature_c, model)) /
           kSpeedOfLightMmPerPs;
}

double sfg_wavelength(double signal_nm, double pump_nm) {
    if (!(signal_nm > 0) || !(pump_nm > 0) || !std::isfinite(signal_nm) || !std::isfinite(pump_nm)) {
        throw DomainError("sum-frequency wavelength needs positive finite input wavelengths");
    }
    return 1.0 / (1.0 / signal_nm + 1.0 / pump_nm);
}

double qpm_mismatch(const WaveTriplet &triplet, const CrystalSpec &crystal, const SellmeierModel &model) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double t = crystal.temperature_c;
    double nf = refractive_index(triplet.sfg_nm, t, model);
    double np = refractive_index(triplet.pump_nm, t, model);
    double ns = refractive_index(triplet.signal_nm, t, model);
    // n / lambda[nm] is in 1/nm; 1e6 converts to 1/mm. The period is in um.
    double material = two_pi * (nf / triplet.sfg_nm - np / triplet.pump_nm - ns / triplet.signal_nm) * 1e6;
    double grating = two_pi * crystal.qpm_order / crystal.poling_period_um * 1e3;
    return material - grating;
}

QpmSolution solve_qpm_pump(double signal_nm, const CrystalSpec &crystal, const SellmeierModel &model,
                           PumpBracket bracket) {
    crystal.validate();
    if (!(bracket.hi_nm > bracket.lo_nm) || !(bracket.lo_nm > 0)) {
        throw DomainError("pump bracket must satisfy 0 < lo < hi");
    }
    check_window(signal_nm, model);
    auto mismatch = [&](double pump_nm) {
        return qpm_mismatch(WaveTriplet::from_signal_pump(signal_nm, pump_nm), crystal, model);
    };
    // Only pump wavelengths whose whole triplet lies inside the validity
    // window are searched.
    double inv_min = 1.0 / model.validity_min_nm - 1.0 / signal_nm;
    if (inv_min > 0) {
        double lo = 1.0 / inv_min;
        // Rounding can leave the SFG wavelength a few ulps below the window.
        while (sfg_wavelength(signal_nm, lo) < model.validity_min_nm) {
            lo = std::nextafter(lo, std::numeric_limits<double>::infinity());
        }
        bracket.lo_nm = std::max(bracket.lo_nm, lo);
    }
    bracket.lo_nm = std::max(bracket.lo_nm, model.validity_min_nm);
    bracket.hi_nm = std::min(bracket.hi_nm, model.validity_max_nm);
    if (!(bracket.hi_nm > bracket.lo_nm)) {
        throw NoRootError("no pump wavelength in the bracket keeps the SFG wave inside the validity window");
    }

    // Coarse scan so that several roots inside the bracket are noticed.
    constexpr int kScanIntervals = 128;
    double step = (bracket.hi_nm - bracket.lo_nm) / kScanIntervals;
    double center = 0.5 * (bracket.lo_nm + bracket.hi_nm);
    int sign_changes = 0;
    double best_lo = 0, best_hi = 0, best_flo = 0, best_fhi = 0;
    double best_distance = INFINITY;
    double x_prev = bracket.lo_nm;
    double f_prev = mismatch(x_prev);
    for (int k = 1; k <= kScanIntervals; k++) {
        double x = k == kScanIntervals ? bracket.hi_nm : bracket.lo_nm + k * step;
        double f = mismatch(x);
        if (f_prev == 0 || (f_prev < 0) != (f < 0)) {
            if (f_prev == 0 && k > 1) {
                // Already counted as the right end of the previous interval.
            } else {
                sign_changes++;
                double mid = 0.5 * (x_prev + x);
                if (std::abs(mid - center) < best_distance) {
                    best_distance = std::abs(mid - center);
                    best_lo = x_prev;
                    best_hi = x;
                    best_flo = f_prev;
                    best_fhi = f;
                }
            }
        }
        x_prev = x;
        f_prev = f;
    }
    if (sign_changes == 0) {
        std::ostringstream ss;
        ss << "QPM mismatch has no sign change for pump in [" << bracket.lo_nm << ", " << bracket.hi_nm
           << "] nm at signal " << signal_nm << " nm";
        throw NoRootError(ss.str());
    }

    double a = best_lo, b = best_hi, fa = best_flo, fb = best_fhi;
    if (fa == 0) {
        return {a, 0.0, sign_changes > 1};
    }
    // Bisection down to the wavelength tolerance, then Illinois-modified
    // regula falsi until the mismatch itself is negligible.
    constexpr double kWavelengthTolerance = 1e-3;
    constexpr double kMismatchTolerance = 1e-9;
    while (b - a > kWavelengthTolerance) {
        double m = 0.5 * (a + b);
        double fm = mismatch(m);
        if (fm == 0) {
            return {m, 0.0, sign_changes > 1};
        }
        if ((fm < 0) == (fa < 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    double x = std::abs(fa) < std::abs(fb) ? a : b;
    double fx = std::abs(fa) < std::abs(fb) ? fa : fb;
    int side = 0;
    for (int iter = 0; iter < 100 && std::abs(fx) > kMismatchTolerance; iter++) {
        x = b - fb * (b - a) / (fb - fa);
        fx = mismatch(x);
        if ((fx < 0) == (fb < 0)) {
            b = x;
            fb = fx;
            if (side == -1) {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if (side == +1) {
                fb *= 0.5;
            }
            side = +1;
        }
        if (b - a < 1e-13 * x) {
            break;
        }
    }
    return {x, fx, sign_changes > 1};
}

std::vector<QpmCurvePoint> qpm_curve(std::span<const double> signals_nm, const CrystalSpec &crystal,
                                     const SellmeierModel &model, PumpBracket bracket) {
    std::vector<QpmCurvePoint> out;
    out.reserve(signals_nm.size());
    for (double signal : signals_nm) {
        check_window(signal, model);
        QpmCurvePoint point;
        point.signal_nm = signal;
        try {
            auto solution = solve_qpm_pump(signal, crystal, model, bracket);
            point.triplet = WaveTriplet::from_signal_pump(signal, solution.pump_nm);
            point.delta_k = solution.delta_k;
            point.multiple_roots = solution.multiple_roots;
        } catch (const NoRootError &) {
            point.delta_k = std::nan("");
        }
        out.push_back(point);
    }
    return out;
}

void write_qpm_csv(std::ostream &out, std::span<const QpmCurvePoint> curve) {
    out << "lambda_signal_nm,lambda_pump_nm,lambda_sfg_nm,delta_k_rad_per_mm\n";
    for (const auto &p : curve) {
        out << csv::format(p.signal_nm) << ',';
        if (p.triplet) {
            out << csv::format(p.triplet->pump_nm) << ',' << csv::format(p.triplet->sfg_nm) << ','
                << csv::format(p.delta_k);
        } else {
            out << ",,";
        }
        out << '\n';
    }
}

}  // namespace g2up::dispersion
