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

#include "g2up/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "g2up/errors.hpp"

namespace g2up::analysis {

std::vector<TracePoint> trace_of(const hbt::G2Estimate &estimate) {
    std::vector<TracePoint> out;
    out.reserve(estimate.points.size());
    for (const auto &p : estimate.points) {
        out.push_back({p.dt_ps, p.g2, p.g2_err});
    }
    return out;
}

// ---------------------------------------------------------------- peak fit

namespace {

constexpr double k4Ln2 = 4.0 * std::numbers::ln2;

using Vec4 = Eigen::Matrix<double, 4, 1>;
using Mat4 = Eigen::Matrix<double, 4, 4>;

/// Parameters: baseline, amplitude, center, fwhm.
struct GaussianModel {
    std::span<const TracePoint> data;

    double cost(const Vec4 &p, Eigen::VectorXd *r = nullptr, Eigen::MatrixXd *jac = nullptr) const {
        const auto n = static_cast<Eigen::Index>(data.size());
        if (r) {
            r->resize(n);
        }
        if (jac) {
            jac->resize(n, 4);
        }
        double c = 0;
        for (Eigen::Index i = 0; i < n; i++) {
            const auto &pt = data[static_cast<std::size_t>(i)];
            double x = pt.dt_ps - p[2];
            double e = std::exp(-k4Ln2 * x * x / (p[3] * p[3]));
            double res = (pt.g2 - p[0] - p[1] * e) / pt.sigma;
            c += res * res;
            if (r) {
                (*r)[i] = res;
            }
            if (jac) {
                // Jacobian of the model (not the residual), scaled by 1/sigma.
                (*jac)(i, 0) = 1.0 / pt.sigma;
                (*jac)(i, 1) = e / pt.sigma;
                (*jac)(i, 2) = p[1] * e * 2.0 * k4Ln2 * x / (p[3] * p[3]) / pt.sigma;
                (*jac)(i, 3) = p[1] * e * 2.0 * k4Ln2 * x * x / (p[3] * p[3] * p[3]) / pt.sigma;
            }
        }
        return c;
    }
};

Vec4 initial_guess(std::span<const TracePoint> trace) {
    std::vector<double> y;
    for (const auto &p : trace) {
        y.push_back(p.g2);
    }
    std::vector<double> sorted = y;
    std::sort(sorted.begin(), sorted.end());
    std::size_t n = sorted.size();
    double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    auto hi = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    auto lo = static_cast<std::size_t>(std::min_element(y.begin(), y.end()) - y.begin());
    // Seed on the larger excursion so dips are fitted as negative amplitudes.
    std::size_t peak = y[hi] - median >= median - y[lo] ? hi : lo;
    double amp = y[peak] - median;
    double half = median + 0.5 * amp;
    auto beyond = [&](std::size_t i) { return amp >= 0 ? y[i] > half : y[i] < half; };
    // Half-maximum crossings on either side of the extremum.
    std::size_t l = peak, r = peak;
    while (l > 0 && beyond(l)) {
        l--;
    }
    while (r + 1 < n && beyond(r)) {
        r++;
    }
    double width = trace[r].dt_ps - trace[l].dt_ps;
    double span = trace.back().dt_ps - trace.front().dt_ps;
    if (!(width > 0)) {
        width = 0.25 * span;
    }
    return Vec4(median, amp, trace[peak].dt_ps, width);
}

}  // namespace

PeakFit fit_gaussian_peak(std::span<const TracePoint> trace) {
    if (trace.size() < 8) {
        throw ConfigError("peak fit needs at least 8 points");
    }
    for (std::size_t i = 0; i < trace.size(); i++) {
        if (!(trace[i].sigma > 0) || !std::isfinite(trace[i].g2)) {
            throw ConfigError("peak fit needs finite values and sigma > 0");
        }
        if (i > 0 && !(trace[i].dt_ps > trace[i - 1].dt_ps)) {
            throw ConfigError("peak fit needs strictly increasing delays");
        }
    }
    GaussianModel model{trace};
    Vec4 p = initial_guess(trace);
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    double cost = model.cost(p, &r, &jac);
    double lambda = 1e-3;
    constexpr int kMaxIterations = 500;
    int it = 0;
    bool converged = false;
    for (; it < kMaxIterations && !converged; it++) {
        Mat4 jtj = jac.transpose() * jac;
        Vec4 g = jac.transpose() * r;
        for (;;) {
            Mat4 a = jtj;
            for (int k = 0; k < 4; k++) {
                a(k, k) += lambda * std::max(jtj(k, k), 1e-300);
            }
            Vec4 step = a.ldlt().solve(g);
            Vec4 trial = p + step;
            double trial_cost = trial[3] > 0 && step.allFinite() ? model.cost(trial) : INFINITY;
            if (trial_cost <= cost) {
                double rel = 0;
                for (int k = 0; k < 4; k++) {
                    rel = std::max(rel, std::abs(step[k]) / std::max(std::abs(trial[k]), 1e-12));
                }
                p = trial;
                cost = model.cost(p, &r, &jac);
                lambda = std::max(lambda / 10, 1e-12);
                converged = rel < 1e-10;
                break;
            }
            lambda *= 10;
            if (lambda > 1e16) {
                // No downhill step left at machine precision: stationary point.
                converged = true;
                break;
            }
        }
    }
    if (!converged) {
        std::ostringstream ss;
        ss << "Gaussian peak fit did not converge in " << kMaxIterations
           << " iterations; chi2 = " << cost;
        throw FitError(ss.str());
    }

    PeakFit fit;
    fit.baseline = p[0];
    fit.amplitude = p[1];
    fit.center_ps = p[2];
    fit.fwhm_ps = p[3];
    fit.iterations = it;
    auto dof = static_cast<double>(trace.size()) - 4.0;
    fit.reduced_chi2 = cost / dof;
    Mat4 jtj = jac.transpose() * jac;
    Eigen::CompleteOrthogonalDecomposition<Mat4> cod(jtj);
    Mat4 cov = cod.pseudoInverse();
    auto err = [&](int k) {
        double v = cod.rank() < 4 ? INFINITY : cov(k, k);
        return v > 0 ? std::sqrt(v) : INFINITY;
    };
    fit.baseline_err = err(0);
    fit.amplitude_err = err(1);
    fit.center_err = err(2);
    fit.fwhm_err = err(3);
    fit.dip = fit.amplitude < 0;
    fit.fwhm_unconstrained = !(std::abs(fit.amplitude) > 2.0 * fit.amplitude_err) || !std::isfinite(fit.fwhm_err) ||
                             fit.fwhm_err > fit.fwhm_ps;
    return fit;
}

// ---------------------------------------------------------------- deconvolution

double deconvolve_resolution(double measured_fwhm_ps, double pulse_fwhm_ps) {
    if (!(measured_fwhm_ps > 0) || !(pulse_fwhm_ps >= 0)) {
        throw DomainError("widths must be positive");
    }
    double r2 = 0.5 * measured_fwhm_ps * measured_fwhm_ps - pulse_fwhm_ps * pulse_fwhm_ps;
    if (!(r2 > 0)) {
        throw DomainError("peak narrower than pulse-limited minimum");
    }
    return std::sqrt(r2);
}

Deconvolution deconvolve_resolution(double measured_fwhm_ps, double measured_err_ps, double pulse_fwhm_ps,
                                    double pulse_err_ps) {
    Deconvolution d;
    d.resolution_ps = deconvolve_resolution(measured_fwhm_ps, pulse_fwhm_ps);
    double dm = measured_fwhm_ps / (2.0 * d.resolution_ps);
    double dp = pulse_fwhm_ps / d.resolution_ps;
    d.error_ps = std::hypot(dm * measured_err_ps, dp * pulse_err_ps);
    return d;
}

// ---------------------------------------------------------------- visibility

Visibility visibility(std::span<const TracePoint> trace, double frequency_ghz) {
    if (!(frequency_ghz > 0) || trace.size() < 4) {
        throw ConfigError("visibility needs a positive frequency and at least 4 points");
    }
    double lo = trace.front().dt_ps, hi = trace.front().dt_ps;
    for (const auto &p : trace) {
        lo = std::min(lo, p.dt_ps);
        hi = std::max(hi, p.dt_ps);
    }
    double f = frequency_ghz * 1e-3;
    if ((hi - lo) * f < 2.0) {
        throw ConfigError("trace spans fewer than 2 oscillation periods");
    }
    const auto n = static_cast<Eigen::Index>(trace.size());
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; i++) {
        const auto &p = trace[static_cast<std::size_t>(i)];
        double w = p.sigma > 0 ? 1.0 / p.sigma : 1.0;
        double ph = 2 * std::numbers::pi * f * p.dt_ps;
        a(i, 0) = w;
        a(i, 1) = w * std::cos(ph);
        a(i, 2) = w * std::sin(ph);
        y[i] = w * p.g2;
    }
    Eigen::Matrix3d ata = a.transpose() * a;
    Eigen::Vector3d coef = ata.ldlt().solve(a.transpose() * y);
    Eigen::Matrix3d cov = ata.inverse();
    bool weighted = std::all_of(trace.begin(), trace.end(), [](const TracePoint &p) { return p.sigma > 0; });
    if (!weighted) {
        // Unit weights: scale the covariance by the residual variance.
        double rss = (a * coef - y).squaredNorm();
        cov *= rss / static_cast<double>(n - 3);
    }
    Visibility v;
    v.offset = coef[0];
    v.amplitude = std::hypot(coef[1], coef[2]);
    v.phase_rad = std::atan2(-coef[2], coef[1]);
    v.visibility = v.amplitude / v.offset;
    // Delta method on V = sqrt(b^2 + c^2) / a.
    Eigen::Vector3d grad;
    grad[0] = -v.visibility / v.offset;
    grad[1] = v.amplitude > 0 ? coef[1] / (v.amplitude * v.offset) : 1.0 / v.offset;
    grad[2] = v.amplitude > 0 ? coef[2] / (v.amplitude * v.offset) : 0.0;
    v.error = std::sqrt(std::max(0.0, double(grad.transpose() * cov * grad)));
    return v;
}

std::vector<TracePoint> convolve_gaussian(std::span<const TracePoint> trace, double fwhm_ps) {
    if (!(fwhm_ps > 0)) {
        throw DomainError("response FWHM must be positive");
    }
    std::vector<TracePoint> out;
    out.reserve(trace.size());
    for (const auto &p : trace) {
        double wsum = 0, acc = 0, var = 0;
        for (std::size_t j = 0; j < trace.size(); j++) {
            double x = trace[j].dt_ps - p.dt_ps;
            // Weight by the local sample spacing so uneven grids integrate correctly.
            double left = j > 0 ? trace[j].dt_ps - trace[j - 1].dt_ps : 0.0;
            double right = j + 1 < trace.size() ? trace[j + 1].dt_ps - trace[j].dt_ps : 0.0;
            double w = std::exp(-k4Ln2 * x * x / (fwhm_ps * fwhm_ps)) * 0.5 * (left + right);
            wsum += w;
            acc += w * trace[j].g2;
            var += w * w * trace[j].sigma * trace[j].sigma;
        }
        out.push_back({p.dt_ps, acc / wsum, std::sqrt(var) / wsum});
    }
    return out;
}

// ---------------------------------------------------------------- violation, mean

Violation classical_violation(const hbt::G2Estimate &estimate) {
    if (estimate.points.size() < 2 || estimate.zero >= estimate.points.size()) {
        throw ConfigError("violation test needs a dt = 0 bin and at least one other bin");
    }
    const auto &z = estimate.at_zero();
    Violation best;
    bool any = false;
    for (std::size_t i = 0; i < estimate.points.size(); i++) {
        if (i == estimate.zero) {
            continue;
        }
        const auto &p = estimate.points[i];
        double diff = p.g2 - z.g2;
        // g2(dt) - g2(0) = 2 (c(dt) - c(0)) when both come from one histogram.
        double sigma = estimate.correlated ? 2.0 * std::hypot(p.c_err, z.c_err) : std::hypot(p.g2_err, z.g2_err);
        if (!(sigma > 0)) {
            continue;
        }
        double s = diff / sigma;
        if (!any || s > best.significance_sigma) {
            best = {s, p.dt_ps, diff, sigma};
            any = true;
        }
    }
    if (!any) {
        throw NumericalError("no bin carries a positive uncertainty");
    }
    return best;
}

MeanG2 mean_g2(const hbt::G2Estimate &estimate) {
    if (estimate.points.empty()) {
        throw ConfigError("mean of an empty estimate");
    }
    auto n = static_cast<double>(estimate.points.size());
    MeanG2 m;
    double var = 0;
    if (!estimate.correlated) {
        for (const auto &p : estimate.points) {
            m.mean += p.g2;
            var += p.g2_err * p.g2_err;
        }
        return {m.mean / n, std::sqrt(var) / n};
    }
    for (std::size_t i = 0; i < estimate.points.size(); i++) {
        m.mean += estimate.points[i].g2;
        if (i != estimate.zero) {
            var += 4.0 * estimate.points[i].c_err * estimate.points[i].c_err;
        }
    }
    m.mean /= n;
    // The mean equals (2 sum_{i != 0} c_i - (n - 2) c_0) / n.
    double c0 = estimate.at_zero().c_err;
    var += (n - 2.0) * (n - 2.0) * c0 * c0;
    m.error = std::sqrt(var) / n;
    return m;
}

// ---------------------------------------------------------------- budget

EfficiencyBudget efficiency_budget(const std::vector<std::pair<std::string, double>> &factors) {
    EfficiencyBudget b;
    for (const auto &[name, value] : factors) {
        if (!(value > 0 && value <= 1)) {
            std::ostringstream ss;
            ss << "efficiency factor '" << name << "' = " << value << " lies outside (0, 1]";
            throw DomainError(ss.str());
        }
        b.factors.emplace_back(name, value);
        b.product *= value;
    }
    return b;
}

double gate_duty_cycle(double resolution_fwhm_ps, double rep_rate_mhz) {
    if (!(resolution_fwhm_ps > 0) || !(rep_rate_mhz > 0)) {
        throw DomainError("duty cycle needs positive resolution and repetition rate");
    }
    double period_ps = 1e6 / rep_rate_mhz;
    return resolution_fwhm_ps / period_ps;
}

std::vector<std::pair<std::string, double>> default_budget_factors() {
    return {{"gate_duty_cycle", gate_duty_cycle(4.0, 76.0)},
            {"conversion", 0.35},
            {"transmission", 0.08},
            {"detector", 0.65},
            {"other", 1.0}};
}

}  // namespace g2up::analysis
