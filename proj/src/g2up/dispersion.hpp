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

#ifndef G2UP_DISPERSION_HPP
#define G2UP_DISPERSION_HPP

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace g2up {

/// Speed of light in mm/ps.
inline constexpr double kSpeedOfLightMmPerPs = 0.299792458;

/// Coupling constant that puts the 1.5 mW operating point at a 4.0 ps gate
/// with the default grid and pump (see propagation::calibrate_resolution).
inline constexpr double kDefaultCouplingPerSqrtWattMm = 0.08822;

namespace dispersion {

/// Temperature-dependent extraordinary index of MgO-doped congruent
/// lithium niobate:
///
///   n^2 = a1 + b1 f + (a2 + b2 f) / (l^2 - (a3 + b3 f)^2)
///         + (a4 + b4 f) / (l^2 - a5^2) - a6 l^2,
///   f   = (T - t_ref) (T + t_offset),
///
/// with l in micrometres and T in degrees Celsius.
struct SellmeierModel {
    std::string name;
    std::string citation;
    /// a1..a6, b1..b4, t_ref, t_offset.
    std::array<double, 12> coefficients{};
    double validity_min_nm = 0;
    double validity_max_nm = 0;

    /// Built-in copy of data/sellmeier/mgo_cln_extraordinary.v1.json.
    static SellmeierModel mgo_congruent_ln();
    static SellmeierModel from_json_text(const std::string &text);
    static SellmeierModel load(const std::string &path);
    std::string to_json_text() const;

    bool contains(double lambda_nm) const {
        return lambda_nm >= validity_min_nm && lambda_nm <= validity_max_nm;
    }
};

struct CrystalSpec {
    double poling_period_um = 3.96;
    double length_mm = 12.5;
    double temperature_c = 25.0;
    /// Coupling constant kappa in W^-1/2 mm^-1.
    double coupling = kDefaultCouplingPerSqrtWattMm;
    int qpm_order = 1;

    void validate() const;
};

/// Signal, pump and sum-frequency wavelengths in nm.
struct WaveTriplet {
    double signal_nm = 0;
    double pump_nm = 0;
    double sfg_nm = 0;

    static WaveTriplet from_signal_pump(double signal_nm, double pump_nm);
};

double refractive_index(double lambda_nm, double temperature_c, const SellmeierModel &model);

/// dn/dlambda in 1/nm, from the closed-form derivative of the Sellmeier form.
double index_derivative(double lambda_nm, double temperature_c, const SellmeierModel &model);

/// n_g = n - lambda dn/dlambda.
double group_index(double lambda_nm, double temperature_c, const SellmeierModel &model);

/// Group slowness difference (n_g(a) - n_g(b)) / c in ps/mm.
double group_slowness_difference(double lambda_a_nm, double lambda_b_nm, double temperature_c,
                                 const SellmeierModel &model);

double sfg_wavelength(double signal_nm, double pump_nm);

/// Phase mismatch in rad/mm, including the grating vector 2 pi m / poling period.
double qpm_mismatch(const WaveTriplet &triplet, const CrystalSpec &crystal, const SellmeierModel &model);

struct PumpBracket {
    double lo_nm = 690.0;
    double hi_nm = 1100.0;
};

struct QpmSolution {
    double pump_nm = 0;
    double delta_k = 0;
    bool multiple_roots = false;
};

/// Bracketed root of qpm_mismatch in the pump wavelength. Throws NoRootError
/// when the mismatch does not change sign over the bracket.
QpmSolution solve_qpm_pump(double signal_nm, const CrystalSpec &crystal, const SellmeierModel &model,
                           PumpBracket bracket = {});

struct QpmCurvePoint {
    double signal_nm = 0;
    /// Empty when no root exists in the bracket.
    std::optional<WaveTriplet> triplet;
    double delta_k = 0;
    bool multiple_roots = false;
};

std::vector<QpmCurvePoint> qpm_curve(std::span<const double> signals_nm, const CrystalSpec &crystal,
                                     const SellmeierModel &model, PumpBracket bracket = {});

/// Columns lambda_signal_nm, lambda_pump_nm, lambda_sfg_nm, delta_k_rad_per_mm.
/// Gaps are written as empty fields.
void write_qpm_csv(std::ostream &out, std::span<const QpmCurvePoint> curve);

}  // namespace dispersion
}  // namespace g2up

#endif
