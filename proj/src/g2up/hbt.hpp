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

#ifndef G2UP_HBT_HPP
#define G2UP_HBT_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "g2up/propagation.hpp"

namespace g2up::hbt {

/// Mean photon numbers (`mean_rate`, `mean_photons_per_pulse`) are counted in
/// front of the converter, per gate-equivalent time tau_eff = 1 / max h.

struct CoherentCw {
    double mean_rate = 0;
};

/// I(t) = 1 + m cos(2 pi f t + phi).
struct ModulatedCw {
    double mean_rate = 0;
    double depth = 0;
    double frequency_ghz = 0;
    /// Draw phi uniformly per period; otherwise phi = 0 in every period.
    bool phase_random = true;
};

struct PulsedCoherent {
    double pulse_fwhm_ps = 2.5;
    propagation::PulseShape shape = propagation::PulseShape::sech2;
    double mean_photons_per_pulse = 0;
    /// Pulse arrival uniform over the period; otherwise fixed at `offset_ps`.
    bool rep_incommensurate = true;
    double offset_ps = 0;
};

/// g2(tau) = 1 + b exp(-|tau|/tau_b) - a exp(-|tau|/tau_a).
struct BunchingAntibunching {
    double antibunching = 0;
    double antibunching_tau_ps = 8.0;
    double bunching = 0;
    double bunching_tau_ps = 35.0;

    double operator()(double tau_ps) const;
    /// Beyond this |tau| the curve differs from 1 by less than 1e-9.
    double horizon_ps() const;

    /// Solves a and b so that g2(0) = g2_zero and max g2 = g2_max.
    static BunchingAntibunching from_source_constraints(double g2_zero, double g2_max, double tau_a_ps,
                                                        double tau_b_ps);
    /// Same constraints applied to the gate-averaged curve that an ideal
    /// measurement with `gate` reports.
    static BunchingAntibunching from_measured_constraints(double g2_zero, double g2_max, double tau_a_ps,
                                                          double tau_b_ps, const propagation::GateResponse &gate);
};

/// Piecewise-linear g2 on |tau|, equal to 1 past the last node.
struct TabulatedG2 {
    std::vector<double> tau_ps;
    std::vector<double> g2;

    double operator()(double tau_ps) const;
    double horizon_ps() const;
};

struct AnalyticG2 {
    double mean_rate = 0;
    std::variant<BunchingAntibunching, TabulatedG2> curve;

    double g2(double tau_ps) const;
    double horizon_ps() const;
};

using SourceModel = std::variant<CoherentCw, ModulatedCw, PulsedCoherent, AnalyticG2>;

void validate(const SourceModel &source);
const char *source_kind(const SourceModel &source);

struct MeasurementConfig {
    double rep_period_ns = 1e3 / 76.0;
    std::uint64_t n_periods = 1000000;
    std::vector<double> delays_ps;
    propagation::GateResponse gate;
    double conversion_efficiency = 1;
    double transmission = 1;
    double detector_efficiency = 1;
    /// Fraction of photons routed to detector A.
    double splitter_ratio = 0.5;
    std::uint64_t rng_seed = 1;
    /// Dark-click probability per detector and period.
    double dark_count_probability = 0;
    /// Periods per RNG substream.
    std::uint64_t chunk_periods = std::uint64_t{1} << 20;
    /// Worker threads; 0 picks the hardware concurrency.
    unsigned threads = 0;

    double efficiency() const {
        return conversion_efficiency * transmission * detector_efficiency;
    }
    void validate() const;
};

struct PairProbabilities {
    double p_single_a = 0;
    double p_single_b = 0;
    double p_pair = 0;
};

/// Click probabilities per period, averaged over the source ensemble, for
/// gates at 0 and dt_ps. Throws RegimeError if some period can push a
/// detector's click probability above 0.1.
PairProbabilities pair_detection_probability(const SourceModel &source, const MeasurementConfig &cfg, double dt_ps);

inline constexpr int kMaxAccidentalLag = 5;

struct HistogramBin {
    double dt_ps = 0;
    std::uint64_t coincidences = 0;
    /// Cross-period coincidence counts, one per lag n != 0. Simulated
    /// histograms hold lags -5..-1 then 1..5 (A in period k, B in k + n).
    std::vector<std::uint64_t> accidentals;
    std::uint64_t singles_a = 0;
    std::uint64_t singles_b = 0;
    std::uint64_t n_periods = 0;

    static int lag_index(int lag);
    std::uint64_t accidental_total() const;
    double accidental_mean() const;
    bool operator==(const HistogramBin &) const = default;
};

struct CoincidenceHistogram {
    std::vector<HistogramBin> bins;
    bool operator==(const CoincidenceHistogram &) const = default;
};

CoincidenceHistogram simulate_coincidences(const SourceModel &source, const MeasurementConfig &cfg);

struct NormalizedPoint {
    double dt_ps = 0;
    double c = 0;
    double c_err = 0;
};

/// c = C / <C(n != 0)>. Throws NumericalError ("undefined_normalization")
/// when a bin has no accidentals.
std::vector<NormalizedPoint> normalize(const CoincidenceHistogram &hist);

struct G2Point {
    double dt_ps = 0;
    double c = 0;
    double c_err = 0;
    double g2 = 0;
    double g2_err = 0;
};

struct G2Estimate {
    std::vector<G2Point> points;
    /// Index of the dt = 0 bin.
    std::size_t zero = 0;
    /// False for estimates read back without c-level errors; the c(0) term is
    /// then treated as independent in comparisons.
    bool correlated = true;

    const G2Point &at_zero() const {
        return points.at(zero);
    }
};

G2Estimate estimate_g2(std::span<const NormalizedPoint> c);

/// Tolerance for matching a delay to zero.
inline constexpr double kZeroDelayTolerancePs = 1e-9;

/// Ideal measured g2 for an analytic source:
/// X(dt) = integral A_h(tau) g2(tau + dt), A_h the autocorrelation of h.
double gate_averaged_g2(const AnalyticG2 &source, const propagation::GateResponse &gate, double dt_ps);

// Independent classical-intensity oracle.

struct IntensityTrace {
    double dt_ps = 0;
    double rep_period_ps = 0;
    /// Intensity relative to its long-time mean.
    std::vector<double> intensity;
};

/// Sampled relative intensity over `duration_ns`, with a fresh phase or pulse
/// position per repetition period. Throws ConfigError ("unsupported_oracle")
/// for analytic sources.
IntensityTrace oracle_intensity_trace(const SourceModel &source, double duration_ns, double dt_ps,
                                      std::uint64_t seed, double rep_period_ns = 1e3 / 76.0);

/// Photon-level coincidence acquisition: photons are drawn as an
/// inhomogeneous Poisson process from the per-period trace, thinned by the
/// gate, beam splitter and efficiencies; a detector clicks on >= 1 photon.
CoincidenceHistogram oracle_coincidences(const SourceModel &source, const MeasurementConfig &cfg,
                                         double trace_dt_ps = 0.05);

void write_histogram_csv(std::ostream &out, const CoincidenceHistogram &hist);
void write_g2_csv(std::ostream &out, const G2Estimate &estimate);
/// Reads dt_ps, c, c_err, g2, g2_err.
G2Estimate read_g2_csv(std::istream &in);

}  // namespace g2up::hbt

#endif
