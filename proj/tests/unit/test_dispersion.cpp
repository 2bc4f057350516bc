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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "g2up/csv.hpp"
#include "g2up/dispersion.hpp"
#include "g2up/errors.hpp"

using namespace g2up;
using namespace g2up::dispersion;

namespace {

// Independent transcription of the 5% MgO:CLN extraordinary-index fit.
double reference_index(double lambda_nm, double t) {
    const double a[] = {5.756, 0.0983, 0.2020, 189.32, 12.52, 1.32e-2};
    const double b[] = {2.860e-6, 4.700e-8, 6.113e-8, 1.516e-4};
    double f = (t - 24.5) * (t + 570.82);
    double l = lambda_nm * 1e-3;
    double l2 = l * l;
    double a3 = a[2] + b[2] * f;
    return std::sqrt(a[0] + b[0] * f + (a[1] + b[1] * f) / (l2 - a3 * a3) + (a[3] + b[3] * f) / (l2 - a[4] * a[4]) -
                     a[5] * l2);
}

double reference_mismatch(double s, double p, double poling_um, double t) {
    double f = 1.0 / (1.0 / s + 1.0 / p);
    double two_pi = 2 * std::numbers::pi;
    // rad/mm with wavelengths in nm.
    return two_pi * 1e6 *
           (reference_index(f, t) / f - reference_index(s, t) / s - reference_index(p, t) / p - 1e-3 / poling_um);
}

const SellmeierModel &model() {
    static const SellmeierModel m = SellmeierModel::mgo_congruent_ln();
    return m;
}

}  // namespace

TEST(Sellmeier, MatchesIndependentTranscription) {
    for (double l : {446.0, 812.0, 990.0, 1064.0, 1550.0, 3000.0}) {
        for (double t : {20.0, 25.0, 60.0}) {
            EXPECT_NEAR(refractive_index(l, t, model()), reference_index(l, t), 1e-12) << l << " nm " << t << " C";
        }
    }
    // Literature value of n_e at 1064 nm near room temperature.
    EXPECT_NEAR(refractive_index(1064, 25, model()), 2.1483, 2e-4);
}

TEST(Sellmeier, DerivativeMatchesFiniteDifference) {
    for (double l : {450.0, 812.0, 990.0, 2000.0}) {
        double h = 1e-3;
        double fd = (refractive_index(l + h, 25, model()) - refractive_index(l - h, 25, model())) / (2 * h);
        EXPECT_NEAR(index_derivative(l, 25, model()), fd, 1e-9);
    }
}

TEST(Sellmeier, GroupIndexExceedsPhaseIndexInNormalDispersion) {
    for (double l : {450.0, 812.0, 990.0}) {
        EXPECT_GT(group_index(l, 25, model()), refractive_index(l, 25, model()));
    }
}

TEST(Sellmeier, OutsideWindowIsDomainError) {
    EXPECT_THROW(refractive_index(350, 25, model()), DomainError);
    EXPECT_THROW(refractive_index(5000, 25, model()), DomainError);
    EXPECT_THROW(refractive_index(std::nan(""), 25, model()), DomainError);
}

TEST(Sellmeier, JsonRoundTrip) {
    auto m = SellmeierModel::from_json_text(model().to_json_text());
    EXPECT_EQ(m.coefficients, model().coefficients);
    EXPECT_EQ(m.validity_min_nm, 400.0);
    EXPECT_EQ(m.validity_max_nm, 4000.0);
    EXPECT_THROW(SellmeierModel::from_json_text("{\"coefficients\": [1, 2]}"), ConfigError);
}

TEST(Sellmeier, BundledDataFileMatchesBuiltIn) {
    auto m = SellmeierModel::load(G2UP_SOURCE_DIR "/data/sellmeier/mgo_cln_extraordinary.v1.json");
    EXPECT_EQ(m.coefficients, model().coefficients);
}

TEST(Sfg, EnergyConservation) {
    EXPECT_DOUBLE_EQ(sfg_wavelength(800, 800), 400);
    double s = 812, p = 990;
    double f = sfg_wavelength(s, p);
    EXPECT_NEAR(1 / f, 1 / s + 1 / p, 1e-15);
    EXPECT_THROW(sfg_wavelength(-1, 800), DomainError);
}

TEST(Qpm, SolutionAt812nm) {
    CrystalSpec crystal;
    auto sol = solve_qpm_pump(812, crystal, model());
    EXPECT_GE(sol.pump_nm, 980);
    EXPECT_LE(sol.pump_nm, 1000);
    double f = sfg_wavelength(812, sol.pump_nm);
    EXPECT_GE(f, 443);
    EXPECT_LE(f, 449);
    EXPECT_FALSE(sol.multiple_roots);
    // Residual checked with the independent index; a 1 pm pump shift moves
    // the mismatch by roughly 0.02 rad/mm.
    EXPECT_LT(std::abs(reference_mismatch(812, sol.pump_nm, 3.96, 25)), 1e-6);
    EXPECT_GT(std::abs(reference_mismatch(812, sol.pump_nm + 0.01, 3.96, 25)), 1e-3);
}

TEST(Qpm, CurveCoversSignalBand) {
    std::vector<double> signals;
    for (int s = 750; s <= 1150; s += 5) {
        signals.push_back(s);
    }
    auto curve = qpm_curve(signals, CrystalSpec{}, model());
    ASSERT_EQ(curve.size(), signals.size());
    for (const auto &p : curve) {
        ASSERT_TRUE(p.triplet.has_value()) << p.signal_nm;
        EXPECT_NEAR(p.triplet->sfg_nm, 445, 10) << p.signal_nm;
    }
}

TEST(Qpm, NoRootForUnreachablePoling) {
    CrystalSpec crystal;
    crystal.poling_period_um = 30;
    EXPECT_THROW(solve_qpm_pump(812, crystal, model()), NoRootError);
    auto curve = qpm_curve(std::vector<double>{812}, crystal, model());
    EXPECT_FALSE(curve[0].triplet.has_value());
}

TEST(Qpm, TemperatureShiftsPump) {
    CrystalSpec hot;
    hot.temperature_c = 60;
    double cold = solve_qpm_pump(812, CrystalSpec{}, model()).pump_nm;
    double warm = solve_qpm_pump(812, hot, model()).pump_nm;
    EXPECT_NE(cold, warm);
    EXPECT_LT(std::abs(reference_mismatch(812, warm, 3.96, 60)), 1e-6);
}

TEST(Qpm, CsvHasGapsAsEmptyFields) {
    CrystalSpec crystal;
    std::vector<double> signals{812};
    auto curve = qpm_curve(signals, crystal, model());
    crystal.poling_period_um = 30;
    auto none = qpm_curve(signals, crystal, model());
    curve.push_back(none[0]);
    std::stringstream ss;
    write_qpm_csv(ss, curve);
    auto t = csv::read(ss);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.header[0], "lambda_signal_nm");
    EXPECT_NEAR(csv::to_double(t.rows[0][t.column("lambda_pump_nm")]), curve[0].triplet->pump_nm, 1e-9);
    EXPECT_EQ(t.rows[1][t.column("lambda_pump_nm")], "");
}

TEST(GroupSlowness, SignalAndSfgLagThePump) {
    double p = solve_qpm_pump(812, CrystalSpec{}, model()).pump_nm;
    double ds = group_slowness_difference(812, p, 25, model());
    double df = group_slowness_difference(sfg_wavelength(812, p), p, 25, model());
    EXPECT_GT(ds, 0);
    EXPECT_GT(df, ds);
    double ref = (group_index(812, 25, model()) - group_index(p, 25, model())) / kSpeedOfLightMmPerPs;
    EXPECT_NEAR(ds, ref, 1e-12);
}

TEST(Crystal, Validation) {
    CrystalSpec c;
    c.length_mm = -1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = CrystalSpec{};
    c.poling_period_um = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}
