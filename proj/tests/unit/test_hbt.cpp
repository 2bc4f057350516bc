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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <vector>

#include "g2up/csv.hpp"
#include "g2up/errors.hpp"
#include "g2up/hbt.hpp"

using namespace g2up;
using namespace g2up::hbt;

namespace {

constexpr double kPi = std::numbers::pi;

HistogramBin make_bin(double dt, std::uint64_t c, std::vector<std::uint64_t> acc) {
    HistogramBin b;
    b.dt_ps = dt;
    b.coincidences = c;
    b.accidentals = std::move(acc);
    b.n_periods = 1000;
    return b;
}

MeasurementConfig base_config(std::vector<double> delays, double fwhm = 4.0) {
    MeasurementConfig cfg;
    cfg.gate = propagation::GateResponse::gaussian(fwhm, 0.05);
    cfg.delays_ps = std::move(delays);
    cfg.conversion_efficiency = 0.5;
    cfg.n_periods = 200000;
    cfg.rng_seed = 42;
    return cfg;
}

/// E[L^2] / E[L]^2 for L(phi) = sum_k h_k dt (2 + m cos(w t_k + phi) + m cos(w (t_k + dt) + phi)),
/// by direct quadrature over the modulation phase.
double modulated_ratio_quadrature(const propagation::GateResponse &g, double m, double f_ghz, double delay) {
    const double w = 2 * kPi * f_ghz * 1e-3;
    const int n_phi = 720;
    double s1 = 0, s2 = 0;
    for (int j = 0; j < n_phi; j++) {
        double phi = 2 * kPi * j / n_phi;
        double lambda = 0;
        for (std::size_t k = 0; k < g.h.size(); k++) {
            double t = g.time_ps[k];
            lambda += g.h[k] * g.dt() * (2 + m * std::cos(w * t + phi) + m * std::cos(w * (t + delay) + phi));
        }
        s1 += lambda;
        s2 += lambda * lambda;
    }
    s1 /= n_phi;
    s2 /= n_phi;
    return s2 / (s1 * s1);
}

/// Double sum of h(t) h(t') g2(t' - t + delay).
double gate_average_direct(const BunchingAntibunching &model, const propagation::GateResponse &g, double delay) {
    double s = 0;
    const double dt = g.dt();
    for (std::size_t i = 0; i < g.h.size(); i++) {
        for (std::size_t j = 0; j < g.h.size(); j++) {
            s += g.h[i] * g.h[j] * model(g.time_ps[j] - g.time_ps[i] + delay);
        }
    }
    return s * dt * dt;
}

}  // namespace

// ---- estimator identities ---------------------------------------------------

TEST(Normalize, EqualCountsGiveUnity) {
    CoincidenceHistogram h;
    h.bins.push_back(make_bin(0, 50, {50, 50, 50, 50, 50, 50, 50, 50, 50, 50}));
    h.bins.push_back(make_bin(10, 7, {7, 7, 7, 7, 7, 7, 7, 7, 7, 7}));
    auto c = normalize(h);
    EXPECT_EQ(c[0].c, 1.0);
    EXPECT_EQ(c[1].c, 1.0);
    auto g = estimate_g2(c);
    for (const auto &p : g.points) {
        EXPECT_EQ(p.g2, 1.0);
    }
}

TEST(Normalize, ScaleInvariance) {
    CoincidenceHistogram h, k;
    h.bins.push_back(make_bin(0, 93, {40, 45, 38, 51, 47, 39, 44, 50, 41, 43}));
    k = h;
    for (auto &b : k.bins) {
        b.coincidences *= 8;
        for (auto &a : b.accidentals) {
            a *= 8;
        }
    }
    EXPECT_EQ(normalize(h)[0].c, normalize(k)[0].c);
}

TEST(Normalize, HandBuiltHistogram) {
    CoincidenceHistogram h;
    h.bins.push_back(make_bin(0, 220, {100, 95, 105, 100, 100}));
    auto c = normalize(h);
    EXPECT_EQ(c[0].c, 2.2);
    // Poisson errors: 220 / 100^2 + 2.2^2 / 500.
    EXPECT_DOUBLE_EQ(c[0].c_err, std::sqrt(220.0 / 1e4 + 2.2 * 2.2 / 500.0));
}

TEST(Normalize, NoAccidentalsNamesTheBin) {
    CoincidenceHistogram h;
    h.bins.push_back(make_bin(12.5, 3, {0, 0, 0}));
    try {
        normalize(h);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError &e) {
        EXPECT_EQ(e.kind(), "undefined_normalization");
        EXPECT_NE(std::string(e.what()).find("12.5"), std::string::npos);
    }
}

TEST(EstimateG2, FormulaArithmetic) {
    std::vector<NormalizedPoint> c{{0, 0.97, 0.01}, {30, 1.00, 0.01}};
    auto g = estimate_g2(c);
    EXPECT_EQ(g.at_zero().g2, 0.97);
    EXPECT_DOUBLE_EQ(g.points[1].g2, 1.03);
    EXPECT_DOUBLE_EQ(g.points[1].g2_err, std::sqrt(4 * 1e-4 + 1e-4));
    EXPECT_EQ(g.at_zero().g2_err, 0.01);
}

TEST(EstimateG2, ZeroBinIsRequiredOnce) {
    std::vector<NormalizedPoint> none{{5, 1, 0.1}};
    try {
        estimate_g2(none);
        FAIL();
    } catch (const ConfigError &e) {
        EXPECT_EQ(e.kind(), "missing_zero_delay");
    }
    std::vector<NormalizedPoint> twice{{0, 1, 0.1}, {0, 1, 0.1}};
    EXPECT_THROW(estimate_g2(twice), ConfigError);
}

TEST(EstimateG2, CsvRoundTrip) {
    std::vector<NormalizedPoint> c{{-5, 1.1, 0.02}, {0, 0.9, 0.03}, {5, 1.05, 0.02}};
    auto g = estimate_g2(c);
    std::stringstream ss;
    write_g2_csv(ss, g);
    auto back = read_g2_csv(ss);
    ASSERT_EQ(back.points.size(), 3u);
    EXPECT_EQ(back.zero, 1u);
    for (std::size_t i = 0; i < 3; i++) {
        EXPECT_EQ(back.points[i].g2, g.points[i].g2);
        EXPECT_EQ(back.points[i].g2_err, g.points[i].g2_err);
        EXPECT_EQ(back.points[i].c_err, g.points[i].c_err);
    }
}

TEST(Histogram, LagIndexLayout) {
    EXPECT_EQ(HistogramBin::lag_index(-5), 0);
    EXPECT_EQ(HistogramBin::lag_index(-1), 4);
    EXPECT_EQ(HistogramBin::lag_index(1), 5);
    EXPECT_EQ(HistogramBin::lag_index(5), 9);
    EXPECT_THROW(HistogramBin::lag_index(0), ConfigError);
    EXPECT_THROW(HistogramBin::lag_index(6), ConfigError);
}

TEST(Histogram, CsvColumns) {
    CoincidenceHistogram h;
    h.bins.push_back(make_bin(0, 10, {4, 6}));
    h.bins[0].singles_a = 100;
    h.bins[0].singles_b = 90;
    std::stringstream ss;
    write_histogram_csv(ss, h);
    EXPECT_EQ(ss.str(), "dt_ps,C,acc_mean,singles_A,singles_B,n_periods\n0,10,5,100,90,1000\n");
}

// ---- source models ----------------------------------------------------------

TEST(Sources, Validation) {
    EXPECT_THROW(validate(CoherentCw{-1}), DomainError);
    EXPECT_THROW(validate(ModulatedCw{1, 1.5, 4}), DomainError);
    EXPECT_THROW(validate(PulsedCoherent{0, propagation::PulseShape::sech2, 1}), DomainError);
    AnalyticG2 bad{1, TabulatedG2{{0, 10}, {0.5, 1.2}}};
    EXPECT_THROW(validate(bad), DomainError);
    EXPECT_STREQ(source_kind(CoherentCw{1}), "coherent_cw");
}

TEST(Sources, TabulatedCurveInterpolates) {
    TabulatedG2 t{{0, 10, 20}, {0.5, 1.5, 1.0}};
    EXPECT_DOUBLE_EQ(t(5), 1.0);
    EXPECT_DOUBLE_EQ(t(-5), 1.0);
    EXPECT_DOUBLE_EQ(t(15), 1.25);
    EXPECT_DOUBLE_EQ(t(100), 1.0);
}

TEST(BunchingAntibunching, SourceConstraintsAreMet) {
    auto m = BunchingAntibunching::from_source_constraints(0.94, 1.08, 8, 35);
    EXPECT_NEAR(m(0), 0.94, 1e-10);
    double best = 0;
    for (double t = 0; t < 300; t += 0.001) {
        best = std::max(best, m(t));
    }
    EXPECT_NEAR(best, 1.08, 1e-6);
    EXPECT_LT(m.horizon_ps(), 1000);
    EXPECT_LT(std::abs(m(m.horizon_ps()) - 1), 1e-9 + 1e-12);
}

TEST(BunchingAntibunching, MeasuredConstraintsAreMet) {
    auto gate = propagation::GateResponse::gaussian(4.0, 0.1);
    auto m = BunchingAntibunching::from_measured_constraints(0.94, 1.08, 8, 35, gate);
    EXPECT_NEAR(gate_average_direct(m, gate, 0), 0.94, 1e-6);
    double best = 0;
    for (double t = 0; t < 100; t += 0.1) {
        best = std::max(best, gate_average_direct(m, gate, t));
    }
    EXPECT_NEAR(best, 1.08, 1e-4);
}

TEST(BunchingAntibunching, ImpossibleConstraints) {
    EXPECT_THROW(BunchingAntibunching::from_source_constraints(1.2, 1.1, 8, 35), DomainError);
    EXPECT_THROW(BunchingAntibunching::from_source_constraints(0.9, 1.1, 40, 35), DomainError);
}

TEST(GateAveragedG2, MatchesDirectDoubleSum) {
    auto gate = propagation::GateResponse::gaussian(4.0, 0.1);
    BunchingAntibunching m{0.3, 8, 0.2, 35};
    AnalyticG2 src{0.01, m};
    for (double d : {0.0, 3.0, 10.0, 40.0}) {
        EXPECT_NEAR(gate_averaged_g2(src, gate, d), gate_average_direct(m, gate, d), 1e-9) << d;
    }
}

// ---- pair probabilities -----------------------------------------------------

TEST(PairProbability, CoherentFactorizes) {
    auto cfg = base_config({0, 3, 17});
    cfg.splitter_ratio = 0.3;
    CoherentCw src{0.05};
    for (double d : cfg.delays_ps) {
        auto p = pair_detection_probability(src, cfg, d);
        EXPECT_NEAR(p.p_single_a, 0.3 * 0.5 * 0.05 * 2, 1e-15);
        EXPECT_NEAR(p.p_single_b, 0.7 * 0.5 * 0.05 * 2, 1e-15);
        EXPECT_NEAR(p.p_pair, p.p_single_a * p.p_single_b, 1e-15);
    }
}

TEST(PairProbability, PerfectAntibunchingWithNarrowGate) {
    MeasurementConfig cfg;
    cfg.gate = propagation::GateResponse::gaussian(0.05, 0.005);
    cfg.delays_ps = {0};
    BunchingAntibunching dip{1.0, 8, 0, 35};
    AnalyticG2 src{0.02, dip};
    auto p = pair_detection_probability(src, cfg, 0);
    EXPECT_LT(p.p_pair / (p.p_single_a * p.p_single_b), 0.01);
}

TEST(PairProbability, ModulatedMatchesPhaseQuadrature) {
    auto cfg = base_config({0, 30, 62.5, 125});
    ModulatedCw src{0.02, 0.87, 4.0};
    for (double d : cfg.delays_ps) {
        auto p = pair_detection_probability(src, cfg, d);
        double expected = modulated_ratio_quadrature(cfg.gate, 0.87, 4.0, d);
        EXPECT_NEAR(p.p_pair / (p.p_single_a * p.p_single_b), expected, 1e-9) << d;
    }
}

TEST(PairProbability, RegimeViolation) {
    auto cfg = base_config({0});
    try {
        pair_detection_probability(CoherentCw{1.0}, cfg, 0);
        FAIL();
    } catch (const RegimeError &e) {
        EXPECT_EQ(e.kind(), "regime_violation");
    }
}

TEST(Config, DelaysMustSitOnTheGateGrid) {
    auto cfg = base_config({0, 0.02});
    try {
        simulate_coincidences(CoherentCw{0.05}, cfg);
        FAIL();
    } catch (const ConfigError &e) {
        EXPECT_EQ(e.kind(), "unrepresentable_delay");
    }
}

TEST(Config, Validation) {
    auto cfg = base_config({0});
    cfg.transmission = 1.5;
    EXPECT_THROW(cfg.validate(), DomainError);
    cfg = base_config({});
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = base_config({0, 9000});
    EXPECT_THROW(cfg.validate(), ConfigError);
}

// ---- Monte Carlo ------------------------------------------------------------

TEST(Simulate, DeterministicAcrossThreadCounts) {
    auto cfg = base_config({0, 5});
    cfg.chunk_periods = 4096;
    cfg.n_periods = 100000;
    ModulatedCw src{0.05, 0.8, 4};
    cfg.threads = 1;
    auto a = simulate_coincidences(src, cfg);
    cfg.threads = 4;
    auto b = simulate_coincidences(src, cfg);
    EXPECT_EQ(a, b);
    cfg.rng_seed = 43;
    auto c = simulate_coincidences(src, cfg);
    EXPECT_NE(a, c);
}

TEST(Simulate, ZeroEfficiencyGivesEmptyHistogram) {
    auto cfg = base_config({0, 5});
    cfg.detector_efficiency = 0;
    auto h = simulate_coincidences(CoherentCw{0.05}, cfg);
    for (const auto &b : h.bins) {
        EXPECT_EQ(b.coincidences, 0u);
        EXPECT_EQ(b.accidental_total(), 0u);
        EXPECT_EQ(b.singles_a + b.singles_b, 0u);
        EXPECT_EQ(b.n_periods, cfg.n_periods);
    }
    EXPECT_THROW(normalize(h), NumericalError);
}

TEST(Simulate, SinglesFollowSplitter) {
    auto cfg = base_config({0});
    cfg.splitter_ratio = 0.25;
    cfg.n_periods = 400000;
    auto h = simulate_coincidences(CoherentCw{0.1}, cfg);
    double n = static_cast<double>(cfg.n_periods);
    double pa = 0.25 * 0.5 * 0.1 * 2, pb = 0.75 * 0.5 * 0.1 * 2;
    EXPECT_NEAR(h.bins[0].singles_a / n, pa, 4 * std::sqrt(pa / n));
    EXPECT_NEAR(h.bins[0].singles_b / n, pb, 4 * std::sqrt(pb / n));
    EXPECT_EQ(h.bins[0].accidentals.size(), 10u);
}

TEST(Simulate, CoherentIsFlat) {
    auto cfg = base_config({-20, -10, 0, 10, 20});
    cfg.n_periods = 1000000;
    auto g = estimate_g2(normalize(simulate_coincidences(CoherentCw{0.1}, cfg)));
    for (const auto &p : g.points) {
        EXPECT_NEAR(p.g2, 1.0, 3 * p.g2_err) << p.dt_ps;
    }
}

TEST(Simulate, DarkCountsAloneAreUncorrelated) {
    auto cfg = base_config({0, 10});
    cfg.detector_efficiency = 0;
    cfg.dark_count_probability = 0.02;
    cfg.n_periods = 500000;
    auto c = normalize(simulate_coincidences(CoherentCw{0.1}, cfg));
    for (const auto &p : c) {
        EXPECT_NEAR(p.c, 1.0, 3 * p.c_err);
    }
}

TEST(Simulate, ModulatedOscillates) {
    // Half period of 4 GHz is 125 ps.
    auto cfg = base_config({0, 125, 250});
    cfg.n_periods = 1000000;
    ModulatedCw src{0.05, 0.87, 4};
    auto g = estimate_g2(normalize(simulate_coincidences(src, cfg)));
    EXPECT_GT(g.points[0].g2, 1.2);
    EXPECT_LT(g.points[1].g2, 0.8);
    EXPECT_GT(g.points[2].g2, 1.2);
}

TEST(Simulate, AntibunchedSourceShowsDip) {
    auto cfg = base_config({0, 30});
    cfg.n_periods = 1000000;
    AnalyticG2 src{0.05, BunchingAntibunching{0.5, 8, 0.2, 35}};
    auto g = estimate_g2(normalize(simulate_coincidences(src, cfg)));
    double expected0 = gate_averaged_g2(src, cfg.gate, 0);
    double expected30 = gate_averaged_g2(src, cfg.gate, 30);
    EXPECT_NEAR(g.points[0].g2, expected0, 3 * g.points[0].g2_err);
    EXPECT_NEAR(g.points[1].g2, expected30, 3 * g.points[1].g2_err);
}

// ---- oracle -----------------------------------------------------------------

TEST(Oracle, ConstantTraceIsFlat) {
    auto t = oracle_intensity_trace(CoherentCw{1}, 1, 0.5, 1);
    ASSERT_EQ(t.intensity.size(), 2000u);
    for (double v : t.intensity) {
        EXPECT_EQ(v, 1.0);
    }
}

TEST(Oracle, AnalyticSourceIsUnsupported) {
    AnalyticG2 src{0.1, BunchingAntibunching{0.1, 8, 0.1, 35}};
    try {
        oracle_intensity_trace(src, 1, 0.5, 1);
        FAIL();
    } catch (const ConfigError &e) {
        EXPECT_EQ(e.kind(), "unsupported_oracle");
    }
}

TEST(Oracle, PulsedTraceHasOnePulsePerPeriod) {
    const double period_ns = 0.2;
    PulsedCoherent src{2.5, propagation::PulseShape::sech2, 1, true, 0};
    auto t = oracle_intensity_trace(src, 20 * period_ns, 0.05, 3, period_ns);
    const std::size_t per = 4000;
    ASSERT_EQ(t.intensity.size(), 20 * per);
    std::vector<std::size_t> peaks;
    double total = 0;
    for (std::size_t k = 0; k < 20; k++) {
        auto first = t.intensity.begin() + static_cast<long>(k * per);
        peaks.push_back(static_cast<std::size_t>(std::max_element(first, first + static_cast<long>(per)) - first));
        total += std::accumulate(first, first + static_cast<long>(per), 0.0);
    }
    // Unit mean up to pulses cut at period edges.
    EXPECT_NEAR(total / static_cast<double>(t.intensity.size()), 1.0, 0.1);
    std::sort(peaks.begin(), peaks.end());
    EXPECT_GT(std::unique(peaks.begin(), peaks.end()) - peaks.begin(), 15);

    PulsedCoherent fixed{2.5, propagation::PulseShape::sech2, 1, false, 10};
    auto f = oracle_intensity_trace(fixed, 5 * period_ns, 0.05, 3, period_ns);
    for (std::size_t k = 0; k < 5; k++) {
        auto first = f.intensity.begin() + static_cast<long>(k * per);
        auto peak = std::max_element(first, first + static_cast<long>(per)) - first;
        // Local time -T/2 + j dt, so the pulse at +10 ps sits at sample 2200.
        EXPECT_EQ(peak, 2200);
    }
}

TEST(Oracle, ModulatedTraceAutocorrelation) {
    // A phase that renews every period T: <I(t) I(t + tau)> = 1 + (m^2/2) cos(w tau) (1 - tau/T) for tau < T.
    const double m = 0.87, f = 4.0, period_ns = 2.0, dt = 1.0;
    const int periods = 400;
    ModulatedCw src{1, m, f};
    auto t = oracle_intensity_trace(src, periods * period_ns, dt, 9, period_ns);
    const std::size_t per = static_cast<std::size_t>(period_ns * 1e3 / dt);
    for (double tau : {0.0, 40.0, 62.0, 125.0, 300.0}) {
        auto lag = static_cast<std::size_t>(tau / dt);
        // Block estimates, one per period, for the standard error.
        std::vector<double> blocks;
        for (std::size_t b = 0; b + 1 < static_cast<std::size_t>(periods); b++) {
            double s = 0;
            for (std::size_t j = b * per; j < (b + 1) * per; j++) {
                s += t.intensity[j] * t.intensity[j + lag];
            }
            blocks.push_back(s / static_cast<double>(per));
        }
        double mean = std::accumulate(blocks.begin(), blocks.end(), 0.0) / static_cast<double>(blocks.size());
        double var = 0;
        for (double v : blocks) {
            var += (v - mean) * (v - mean);
        }
        double sigma = std::sqrt(var / static_cast<double>(blocks.size() - 1) / static_cast<double>(blocks.size()));
        double expected = 1 + 0.5 * m * m * std::cos(2 * kPi * f * 1e-3 * tau) * (1 - tau / (period_ns * 1e3));
        EXPECT_NEAR(mean, expected, std::max(2 * sigma, 1e-12)) << "tau " << tau;
    }
}

class OracleEquivalence : public ::testing::Test {
   protected:
    static void compare(const SourceModel &src, MeasurementConfig cfg) {
        auto mc = estimate_g2(normalize(simulate_coincidences(src, cfg)));
        auto oracle = estimate_g2(normalize(oracle_coincidences(src, cfg)));
        for (std::size_t i = 0; i < mc.points.size(); i++) {
            const auto &a = mc.points[i];
            const auto &b = oracle.points[i];
            EXPECT_NEAR(a.g2, b.g2, 3 * std::hypot(a.g2_err, b.g2_err)) << "dt " << a.dt_ps;
        }
    }
};

TEST_F(OracleEquivalence, Coherent) {
    auto cfg = base_config({0, 2, 10});
    cfg.n_periods = 4000000;
    compare(CoherentCw{0.1}, cfg);
}

TEST_F(OracleEquivalence, Modulated) {
    auto cfg = base_config({0, 60, 125});
    cfg.n_periods = 4000000;
    compare(ModulatedCw{0.05, 0.87, 4}, cfg);
}

TEST_F(OracleEquivalence, Pulsed) {
    auto cfg = base_config({0, 3, 8});
    cfg.rep_period_ns = 0.125;
    cfg.n_periods = 10000000;
    compare(PulsedCoherent{2.5, propagation::PulseShape::sech2, 0.2, true, 0}, cfg);
}

TEST(Oracle, RejectsLargeConversionEfficiency) {
    auto cfg = base_config({0});
    cfg.conversion_efficiency = 0.8;
    EXPECT_THROW(oracle_coincidences(CoherentCw{0.05}, cfg), ConfigError);
}
