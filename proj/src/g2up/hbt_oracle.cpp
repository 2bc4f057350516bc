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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "g2up/errors.hpp"
#include "g2up/hbt.hpp"
#include "g2up/hbt_internal.hpp"

namespace g2up::hbt {

namespace {

/// Classical intensity relative to its long-time mean, with one random draw
/// (modulation phase or pulse position) per repetition period. Local time runs
/// over [-T/2, T/2) with the first gate at 0.
class ClassicalIntensity {
   public:
    ClassicalIntensity(const SourceModel &source, double period_ps) : period_(period_ps) {
        validate(source);
        if (const auto *c = std::get_if<CoherentCw>(&source)) {
            kind_ = Kind::flat;
            photons_ = c->mean_rate;
        } else if (const auto *m = std::get_if<ModulatedCw>(&source)) {
            kind_ = Kind::modulated;
            photons_ = m->mean_rate;
            depth_ = m->depth;
            omega_ = 2 * std::numbers::pi * m->frequency_ghz * 1e-3;
            random_ = m->phase_random;
        } else if (const auto *p = std::get_if<PulsedCoherent>(&source)) {
            kind_ = Kind::pulsed;
            photons_ = p->mean_photons_per_pulse;
            pulse_.shape = p->shape;
            pulse_.fwhm_ps = p->pulse_fwhm_ps;
            random_ = p->rep_incommensurate;
            offset_ = p->offset_ps;
        } else {
            throw ConfigError("the intensity oracle covers classical sources only", "unsupported_oracle");
        }
    }

    /// Modulation phase or pulse center of one period.
    double draw(std::mt19937_64 &rng) const {
        if (kind_ == Kind::modulated) {
            return random_ ? std::uniform_real_distribution<double>(0.0, 2 * std::numbers::pi)(rng) : 0.0;
        }
        if (kind_ == Kind::pulsed) {
            return random_ ? std::uniform_real_distribution<double>(-0.5 * period_, 0.5 * period_)(rng) : offset_;
        }
        return 0.0;
    }

    double at(double state, double t) const {
        switch (kind_) {
            case Kind::flat:
                return 1.0;
            case Kind::modulated:
                return 1.0 + depth_ * std::cos(omega_ * t + state);
            case Kind::pulsed:
                return period_ * pulse_.shape_at(t - state) / pulse_.energy_width_ps();
        }
        return 0.0;
    }

    double peak() const {
        switch (kind_) {
            case Kind::flat:
                return 1.0;
            case Kind::modulated:
                return 1.0 + depth_;
            case Kind::pulsed:
                return period_ / pulse_.energy_width_ps();
        }
        return 0.0;
    }

    /// Mean photon flux in 1/ps for a gate-equivalent time tau_eff.
    double mean_flux(double tau_eff) const {
        return kind_ == Kind::pulsed ? photons_ / period_ : photons_ / tau_eff;
    }

   private:
    enum class Kind { flat, modulated, pulsed };
    Kind kind_ = Kind::flat;
    double period_;
    double photons_ = 0;
    double depth_ = 0, omega_ = 0;
    bool random_ = false;
    double offset_ = 0;
    propagation::PulseSpec pulse_;
};

constexpr std::uint64_t kOracleSalt = 0x6f7261636c65;  // "oracle"

}  // namespace

IntensityTrace oracle_intensity_trace(const SourceModel &source, double duration_ns, double dt_ps,
                                      std::uint64_t seed, double rep_period_ns) {
    const double period = rep_period_ns * 1e3;
    if (!(duration_ns > 0) || !(dt_ps > 0) || !(period > dt_ps)) {
        throw DomainError("trace needs duration > 0 and 0 < dt < repetition period");
    }
    ClassicalIntensity model(source, period);
    IntensityTrace trace;
    trace.dt_ps = dt_ps;
    trace.rep_period_ps = period;
    auto n = static_cast<std::size_t>(duration_ns * 1e3 / dt_ps);
    trace.intensity.resize(n);
    auto rng = internal::substream(seed, kOracleSalt, 0, 0);
    std::int64_t current = -1;
    double state = 0;
    for (std::size_t j = 0; j < n; j++) {
        double t = static_cast<double>(j) * dt_ps;
        auto k = static_cast<std::int64_t>(std::floor(t / period));
        if (k != current) {
            state = model.draw(rng);
            current = k;
        }
        trace.intensity[j] = model.at(state, t - static_cast<double>(k) * period - 0.5 * period);
    }
    return trace;
}

CoincidenceHistogram oracle_coincidences(const SourceModel &source, const MeasurementConfig &cfg,
                                         double trace_dt_ps) {
    cfg.validate();
    if (!(trace_dt_ps > 0)) {
        throw DomainError("trace step must be positive");
    }
    if (cfg.conversion_efficiency > 0.5) {
        throw ConfigError("the oracle adds the two gate weights and needs conversion_efficiency <= 0.5");
    }
    const double period = cfg.rep_period_ns * 1e3;
    ClassicalIntensity model(source, period);
    auto kernel = internal::GateKernel::from(cfg.gate);
    const double flux_peak = model.mean_flux(kernel.tau_eff()) * model.peak();
    const double survive = cfg.transmission * cfg.detector_efficiency;

    return internal::run_chunks(cfg, [&](std::size_t bin, std::uint64_t chunk, std::uint64_t begin,
                                         std::uint64_t end) {
        const double d = cfg.delays_ps[bin];
        struct Window {
            double lo, hi;
        };
        std::vector<Window> windows{{kernel.lo(), kernel.hi()}, {d + kernel.lo(), d + kernel.hi()}};
        if (windows[1].lo < windows[0].lo) {
            std::swap(windows[0], windows[1]);
        }
        if (windows[1].lo <= windows[0].hi) {
            windows = {{windows[0].lo, std::max(windows[0].hi, windows[1].hi)}};
        }
        std::vector<std::poisson_distribution<int>> candidates;
        for (const auto &w : windows) {
            candidates.emplace_back(flux_peak * (w.hi - w.lo));
        }

        auto rng = internal::substream(cfg.rng_seed, kOracleSalt, bin, chunk);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<internal::Click> clicks;
        for (std::uint64_t k = begin; k < end; k++) {
            double state = model.draw(rng);
            std::uint8_t mask = 0;
            for (std::size_t w = 0; w < windows.size(); w++) {
                int n = candidates[w](rng);
                for (int i = 0; i < n; i++) {
                    double t = windows[w].lo + unit(rng) * (windows[w].hi - windows[w].lo);
                    // Intensity is read from the trace sample holding t.
                    double sample_t = (std::floor(t / trace_dt_ps) + 0.5) * trace_dt_ps;
                    if (unit(rng) * model.peak() >= model.at(state, sample_t)) {
                        continue;
                    }
                    double convert = cfg.conversion_efficiency * (kernel.weight(t) + kernel.weight(t - d));
                    if (unit(rng) >= convert * survive) {
                        continue;
                    }
                    mask |= unit(rng) < cfg.splitter_ratio ? 1 : 2;
                }
            }
            if (mask) {
                clicks.push_back({k, mask});
            }
        }
        internal::add_dark_clicks(clicks, rng, cfg.dark_count_probability, begin, end, 1);
        internal::add_dark_clicks(clicks, rng, cfg.dark_count_probability, begin, end, 2);
        return clicks;
    });
}

}  // namespace g2up::hbt
