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

#ifndef G2UP_ANALYSIS_HPP
#define G2UP_ANALYSIS_HPP

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "g2up/hbt.hpp"

namespace g2up::analysis {

struct TracePoint {
    double dt_ps = 0;
    double g2 = 0;
    double sigma = 0;
};

std::vector<TracePoint> trace_of(const hbt::G2Estimate &estimate);

struct PeakFit {
    double center_ps = 0;
    double fwhm_ps = 0;
    double amplitude = 0;
    double baseline = 0;
    double center_err = 0;
    double fwhm_err = 0;
    double amplitude_err = 0;
    double baseline_err = 0;
    double reduced_chi2 = 0;
    int iterations = 0;
    /// Negative amplitude: the feature is a dip.
    bool dip = false;
    /// Amplitude consistent with zero, so the width carries no information.
    bool fwhm_unconstrained = false;
};

/// Weighted Levenberg-Marquardt fit of
///   baseline + amplitude exp(-4 ln2 (dt - center)^2 / fwhm^2),
/// started from baseline = median, center = argmax, amplitude = max - median
/// and the half-maximum width of the data.
PeakFit fit_gaussian_peak(std::span<const TracePoint> trace);

/// Resolution from the width of the incommensurate-pulse peak, assuming
/// measured^2 = 2 (pulse^2 + resolution^2).
double deconvolve_resolution(double measured_fwhm_ps, double pulse_fwhm_ps);

struct Deconvolution {
    double resolution_ps = 0;
    double error_ps = 0;
};

Deconvolution deconvolve_resolution(double measured_fwhm_ps, double measured_err_ps, double pulse_fwhm_ps,
                                    double pulse_err_ps);

struct Visibility {
    double visibility = 0;
    double error = 0;
    double offset = 0;
    double amplitude = 0;
    double phase_rad = 0;
};

/// Weighted linear fit of offset + V cos(2 pi f dt + phi). Points with
/// sigma <= 0 get unit weight.
Visibility visibility(std::span<const TracePoint> trace, double frequency_ghz);

/// Trace smoothed by a Gaussian timing response: each point becomes the
/// normalized Gaussian-weighted mean of its neighbors.
std::vector<TracePoint> convolve_gaussian(std::span<const TracePoint> trace, double fwhm_ps);

struct Violation {
    double significance_sigma = 0;
    double argmax_dt_ps = 0;
    double difference = 0;
    double sigma = 0;
};

/// Largest (g2(dt) - g2(0)) / sigma over dt != 0. Positive values violate
/// g2(0) >= g2(dt).
Violation classical_violation(const hbt::G2Estimate &estimate);

struct MeanG2 {
    double mean = 0;
    double error = 0;
};

/// Mean over all bins, with the shared c(0) term propagated.
MeanG2 mean_g2(const hbt::G2Estimate &estimate);

struct EfficiencyBudget {
    std::vector<std::pair<std::string, double>> factors;
    double product = 1;
};

EfficiencyBudget efficiency_budget(const std::vector<std::pair<std::string, double>> &factors);

double gate_duty_cycle(double resolution_fwhm_ps, double rep_rate_mhz);

/// Illustrative factor set: 4 ps gate at 76 MHz, conversion 0.35,
/// transmission 0.08, detector 0.65, other 1.
std::vector<std::pair<std::string, double>> default_budget_factors();

}  // namespace g2up::analysis

#endif
