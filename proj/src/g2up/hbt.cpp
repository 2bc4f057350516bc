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

#include "g2up/hbt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <exception>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <thread>

#include "g2up/errors.hpp"
#include "g2up/hbt_internal.hpp"

namespace g2up::hbt {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kRegimeLimit = 0.1;

std::string describe_delay(double dt_ps) {
    std::ostringstream ss;
    ss << "dt = " << dt_ps << " ps";
    return ss.str();
}

/// Scan on [lo, hi] followed by golden-section refinement of the best cell.
template <typename F>
double maximize(const F &f, double lo, double hi, double step) {
    double best_x = lo;
    double best = f(lo);
    for (double x = lo + step; x <= hi; x += step) {
        double v = f(x);
        if (v > best) {
            best = v;
            best_x = x;
        }
    }
    double a = std::max(lo, best_x - step);
    double b = std::min(hi, best_x + step);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a);
    double d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 80 && b - a > 1e-9; it++) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    return std::max(best, std::max(fc, fd));
}

/// Root of an increasing function on [lo, hi] by bisection.
template <typename F>
double bisect_increasing(const F &f, double target, double lo, double hi, const char *what) {
    if (!(f(lo) <= target && f(hi) >= target)) {
        throw NoRootError(std::string("no parameter reproduces the requested ") + what);
    }
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); it++) {
        double mid = 0.5 * (lo + hi);
        if (f(mid) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

void check_constraints(double g2_zero, double g2_max, double tau_a, double tau_b) {
    if (!(g2_zero >= 0) || !(g2_max > 1.0) || !(g2_max > g2_zero)) {
        throw DomainError("bunching-antibunching constraints need g2(0) >= 0 and max g2 > max(1, g2(0))");
    }
    if (!(tau_a > 0) || !(tau_b > tau_a)) {
        throw DomainError("bunching-antibunching model needs 0 < tau_a < tau_b");
    }
}

}  // namespace

// ---------------------------------------------------------------- sources

double BunchingAntibunching::operator()(double tau_ps) const {
    double t = std::abs(tau_ps);
    return 1.0 + bunching * std::exp(-t / bunching_tau_ps) - antibunching * std::exp(-t / antibunching_tau_ps);
}

double BunchingAntibunching::horizon_ps() const {
    double h = 0;
    if (antibunching > 0) {
        h = std::max(h, antibunching_tau_ps * std::log(antibunching / 1e-9));
    }
    if (bunching > 0) {
        h = std::max(h, bunching_tau_ps * std::log(bunching / 1e-9));
    }
    return h;
}

BunchingAntibunching BunchingAntibunching::from_source_constraints(double g2_zero, double g2_max, double tau_a_ps,
                                                                  double tau_b_ps) {
    check_constraints(g2_zero, g2_max, tau_a_ps, tau_b_ps);
    auto model = [&](double b) {
        return BunchingAntibunching{b + 1.0 - g2_zero, tau_a_ps, b, tau_b_ps};
    };
    auto peak = [&](double b) {
        auto m = model(b);
        return maximize(m, 0.0, 20.0 * tau_b_ps, 0.05 * tau_a_ps);
    };
    double b = bisect_increasing(peak, g2_max, std::max(0.0, g2_zero - 1.0), 100.0, "maximum of g2");
    return model(b);
}

BunchingAntibunching BunchingAntibunching::from_measured_constraints(double g2_zero, double g2_max, double tau_a_ps,
                                                                    double tau_b_ps,
                                                                    const propagation::GateResponse &gate) {
    check_constraints(g2_zero, g2_max, tau_a_ps, tau_b_ps);
    auto acf = internal::GateAutocorrelation::from(internal::GateKernel::from(gate));
    auto smear = [&](double tau_x, double dt) {
        return acf.average([tau_x](double t) { return std::exp(-std::abs(t) / tau_x); }, dt);
    };
    double ea0 = smear(tau_a_ps, 0.0);
    double eb0 = smear(tau_b_ps, 0.0);
    auto model = [&](double b) {
        return BunchingAntibunching{(1.0 + b * eb0 - g2_zero) / ea0, tau_a_ps, b, tau_b_ps};
    };
    auto peak = [&](double b) {
        auto m = model(b);
        auto measured = [&](double dt) {
            return 1.0 + m.bunching * smear(tau_b_ps, dt) - m.antibunching * smear(tau_a_ps, dt);
        };
        return maximize(measured, 0.0, 10.0 * tau_b_ps, 0.25 * tau_a_ps);
    };
    double b_lo = std::max(0.0, (g2_zero - 1.0) / eb0);
    double b = bisect_increasing(peak, g2_max, b_lo, 100.0, "maximum of the measured g2");
    return model(b);
}

double TabulatedG2::operator()(double tau) const {
    double t = std::abs(tau);
    if (t >= tau_ps.back()) {
        return 1.0;
    }
    auto it = std::upper_bound(tau_ps.begin(), tau_ps.end(), t);
    auto k = static_cast<std::size_t>(it - tau_ps.begin());
    double f = (t - tau_ps[k - 1]) / (tau_ps[k] - tau_ps[k - 1]);
    return g2[k - 1] + f * (g2[k] - g2[k - 1]);
}

double TabulatedG2::horizon_ps() const {
    return tau_ps.back();
}

double AnalyticG2::g2(double tau_ps) const {
    return std::visit([tau_ps](const auto &c) { return c(tau_ps); }, curve);
}

double AnalyticG2::horizon_ps() const {
    return std::visit([](const auto &c) { return c.horizon_ps(); }, curve);
}

void validate(const SourceModel &source) {
    auto rate = [](double r, const char *what) {
        if (!(r >= 0) || !std::isfinite(r)) {
            throw DomainError(std::string(what) + " must be finite and non-negative");
        }
    };
    std::visit(overloaded{
                   [&](const CoherentCw &s) { rate(s.mean_rate, "mean_rate"); },
                   [&](const ModulatedCw &s) {
                       rate(s.mean_rate, "mean_rate");
                       if (!(s.depth >= 0 && s.depth <= 1)) {
                           throw DomainError("modulation depth must lie in [0, 1]");
                       }
                       if (!(s.frequency_ghz >= 0) || !std::isfinite(s.frequency_ghz)) {
                           throw DomainError("modulation frequency must be finite and non-negative");
                       }
                   },
                   [&](const PulsedCoherent &s) {
                       rate(s.mean_photons_per_pulse, "mean_photons_per_pulse");
                       if (s.shape == propagation::PulseShape::cw || !(s.pulse_fwhm_ps > 0)) {
                           throw DomainError("pulsed source needs a pulsed shape with positive FWHM");
                       }
                       if (!std::isfinite(s.offset_ps)) {
                           throw DomainError("pulse offset must be finite");
                       }
                   },
                   [&](const AnalyticG2 &s) {
                       rate(s.mean_rate, "mean_rate");
                       std::visit(overloaded{
                                      [](const BunchingAntibunching &c) {
                                          if (!(c.antibunching >= 0) || !(c.bunching >= 0) ||
                                              !(c.antibunching_tau_ps > 0) || !(c.bunching_tau_ps > 0)) {
                                              throw DomainError("g2 model amplitudes must be >= 0, times > 0");
                                          }
                                          double step = std::min(c.antibunching_tau_ps, c.bunching_tau_ps) / 50;
                                          for (double t = 0; t <= c.horizon_ps(); t += step) {
                                              if (c(t) < -1e-12) {
                                                  throw DomainError("g2 model is negative at some delay");
                                              }
                                          }
                                      },
                                      [](const TabulatedG2 &c) {
                                          if (c.tau_ps.size() < 2 || c.tau_ps.size() != c.g2.size() ||
                                              c.tau_ps.front() != 0.0) {
                                              throw DomainError("tabulated g2 needs >= 2 nodes starting at tau = 0");
                                          }
                                          for (std::size_t k = 0; k < c.g2.size(); k++) {
                                              if (!(c.g2[k] >= 0) || !std::isfinite(c.g2[k])) {
                                                  throw DomainError("tabulated g2 must be finite and >= 0");
                                              }
                                              if (k > 0 && !(c.tau_ps[k] > c.tau_ps[k - 1])) {
                                                  throw DomainError("tabulated g2 delays must increase");
                                              }
                                          }
                                          if (std::abs(c.g2.back() - 1.0) > 1e-9) {
                                              throw DomainError("tabulated g2 must reach 1 at its last node");
                                          }
                                      },
                                  },
                                  s.curve);
                   },
               },
               source);
}

const char *source_kind(const SourceModel &source) {
    return std::visit(overloaded{
                          [](const CoherentCw &) { return "coherent_cw"; },
                          [](const ModulatedCw &) { return "modulated_cw"; },
                          [](const PulsedCoherent &) { return "pulsed_coherent"; },
                          [](const AnalyticG2 &) { return "analytic_g2"; },
                      },
                      source);
}

// ---------------------------------------------------------------- internals

namespace internal {

GateKernel GateKernel::from(const propagation::GateResponse &gate) {
    gate.validate();
    auto peak = static_cast<std::size_t>(std::max_element(gate.h.begin(), gate.h.end()) - gate.h.begin());
    double cut = 1e-12 * gate.h[peak];
    std::size_t first = 0, last = gate.h.size() - 1;
    while (first < peak && gate.h[first] <= cut) {
        first++;
    }
    while (last > peak && gate.h[last] <= cut) {
        last--;
    }
    GateKernel k;
    k.dt = gate.dt();
    k.t0 = gate.time_ps[first] - gate.time_ps[peak];
    k.h.assign(gate.h.begin() + static_cast<std::ptrdiff_t>(first),
               gate.h.begin() + static_cast<std::ptrdiff_t>(last) + 1);
    double area = 0;
    for (double v : k.h) {
        area += v * k.dt;
    }
    for (double &v : k.h) {
        v /= area;
    }
    k.h_max = *std::max_element(k.h.begin(), k.h.end());
    return k;
}

double GateKernel::weight(double t) const {
    double x = (t - t0) / dt;
    if (x < 0 || x > static_cast<double>(h.size() - 1)) {
        return 0.0;
    }
    auto j = static_cast<std::size_t>(x);
    if (j + 1 >= h.size()) {
        return h.back() / h_max;
    }
    double f = x - static_cast<double>(j);
    return ((1 - f) * h[j] + f * h[j + 1]) / h_max;
}

GateAutocorrelation GateAutocorrelation::from(const GateKernel &kernel) {
    GateAutocorrelation g;
    auto n = static_cast<std::ptrdiff_t>(kernel.h.size());
    g.dt = kernel.dt;
    g.half = n - 1;
    g.a.assign(static_cast<std::size_t>(2 * n - 1), 0.0);
    for (std::ptrdiff_t k = 0; k < n; k++) {
        double acc = 0;
        for (std::ptrdiff_t j = 0; j + k < n; j++) {
            acc += kernel.h[static_cast<std::size_t>(j)] * kernel.h[static_cast<std::size_t>(j + k)];
        }
        acc *= kernel.dt;
        g.a[static_cast<std::size_t>(g.half + k)] = acc;
        g.a[static_cast<std::size_t>(g.half - k)] = acc;
    }
    return g;
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t salt, std::uint64_t bin, std::uint64_t chunk) {
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(seed), hi(seed), lo(salt), hi(salt), lo(bin), hi(bin), lo(chunk), hi(chunk)};
    return std::mt19937_64(seq);
}

void add_dark_clicks(std::vector<Click> &clicks, std::mt19937_64 &rng, double p, std::uint64_t begin,
                     std::uint64_t end, std::uint8_t detector) {
    if (!(p > 0)) {
        return;
    }
    std::geometric_distribution<std::uint64_t> skip(p);
    for (std::uint64_t k = begin;; k++) {
        k += skip(rng);
        if (k >= end) {
            break;
        }
        clicks.push_back({k, detector});
    }
}

void coalesce(std::vector<Click> &clicks) {
    std::stable_sort(clicks.begin(), clicks.end(), [](const Click &a, const Click &b) { return a.period < b.period; });
    std::size_t out = 0;
    for (std::size_t i = 0; i < clicks.size(); i++) {
        if (out > 0 && clicks[out - 1].period == clicks[i].period) {
            clicks[out - 1].mask |= clicks[i].mask;
        } else {
            clicks[out++] = clicks[i];
        }
    }
    clicks.resize(out);
}

ChunkTally tally_chunk(const std::vector<Click> &clicks, std::uint64_t begin, std::uint64_t end) {
    ChunkTally t;
    const auto lag = static_cast<std::uint64_t>(kMaxAccidentalLag);
    for (std::size_t i = 0; i < clicks.size(); i++) {
        const Click &c = clicks[i];
        bool a = c.mask & 1, b = c.mask & 2;
        t.singles_a += a;
        t.singles_b += b;
        t.coincidences += a && b;
        if (a) {
            for (std::size_t j = i + 1; j < clicks.size() && clicks[j].period - c.period <= lag; j++) {
                if (clicks[j].mask & 2) {
                    t.accidentals[static_cast<std::size_t>(
                        HistogramBin::lag_index(static_cast<int>(clicks[j].period - c.period)))]++;
                }
            }
            for (std::size_t j = i; j-- > 0 && c.period - clicks[j].period <= lag;) {
                if (clicks[j].mask & 2) {
                    t.accidentals[static_cast<std::size_t>(
                        HistogramBin::lag_index(-static_cast<int>(c.period - clicks[j].period)))]++;
                }
            }
        }
        if (c.period < begin + lag) {
            t.head.push_back(c);
        }
        if (c.period + lag >= end) {
            t.tail.push_back(c);
        }
    }
    return t;
}

CoincidenceHistogram run_chunks(
    const MeasurementConfig &cfg,
    const std::function<std::vector<Click>(std::size_t, std::uint64_t, std::uint64_t, std::uint64_t)> &simulate) {
    const std::size_t n_bins = cfg.delays_ps.size();
    const std::uint64_t n_chunks = (cfg.n_periods + cfg.chunk_periods - 1) / cfg.chunk_periods;
    const std::size_t n_tasks = n_bins * static_cast<std::size_t>(n_chunks);
    std::vector<ChunkTally> tallies(n_tasks);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t task = next.fetch_add(1);
            if (task >= n_tasks) {
                return;
            }
            std::size_t bin = task / n_chunks;
            std::uint64_t chunk = task % n_chunks;
            std::uint64_t begin = chunk * cfg.chunk_periods;
            std::uint64_t end = std::min(cfg.n_periods, begin + cfg.chunk_periods);
            try {
                auto clicks = simulate(bin, chunk, begin, end);
                coalesce(clicks);
                tallies[task] = tally_chunk(clicks, begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(n_tasks);
            }
        }
    };
    unsigned n_threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, n_tasks));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n_threads; i++) {
            pool.emplace_back(worker);
        }
        for (auto &t : pool) {
            t.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    CoincidenceHistogram hist;
    const auto lag = static_cast<std::uint64_t>(kMaxAccidentalLag);
    for (std::size_t bin = 0; bin < n_bins; bin++) {
        HistogramBin out;
        out.dt_ps = cfg.delays_ps[bin];
        out.n_periods = cfg.n_periods;
        out.accidentals.assign(2 * kMaxAccidentalLag, 0);
        for (std::uint64_t chunk = 0; chunk < n_chunks; chunk++) {
            const ChunkTally &t = tallies[bin * n_chunks + chunk];
            out.coincidences += t.coincidences;
            out.singles_a += t.singles_a;
            out.singles_b += t.singles_b;
            for (std::size_t i = 0; i < t.accidentals.size(); i++) {
                out.accidentals[i] += t.accidentals[i];
            }
            if (chunk + 1 == n_chunks) {
                continue;
            }
            const ChunkTally &u = tallies[bin * n_chunks + chunk + 1];
            for (const Click &x : t.tail) {
                for (const Click &y : u.head) {
                    std::uint64_t gap = y.period - x.period;
                    if (gap > lag) {
                        continue;
                    }
                    int n = static_cast<int>(gap);
                    if ((x.mask & 1) && (y.mask & 2)) {
                        out.accidentals[static_cast<std::size_t>(HistogramBin::lag_index(n))]++;
                    }
                    if ((x.mask & 2) && (y.mask & 1)) {
                        out.accidentals[static_cast<std::size_t>(HistogramBin::lag_index(-n))]++;
                    }
                }
            }
        }
        hist.bins.push_back(std::move(out));
    }
    return hist;
}

std::ptrdiff_t delay_steps(double dt_ps, double grid_step_ps) {
    double x = dt_ps / grid_step_ps;
    double r = std::round(x);
    if (!std::isfinite(x) || std::abs(x - r) > 1e-6) {
        std::ostringstream ss;
        ss << "delay " << dt_ps << " ps is not a multiple of the gate grid step " << grid_step_ps << " ps";
        throw ConfigError(ss.str(), "unrepresentable_delay");
    }
    return static_cast<std::ptrdiff_t>(r);
}

}  // namespace internal

// ---------------------------------------------------------------- config

void MeasurementConfig::validate() const {
    if (!(rep_period_ns > 0) || !std::isfinite(rep_period_ns)) {
        throw ConfigError("repetition period must be positive");
    }
    if (n_periods == 0) {
        throw ConfigError("n_periods must be positive");
    }
    if (delays_ps.empty()) {
        throw ConfigError("delay list is empty");
    }
    for (double e : {conversion_efficiency, transmission, detector_efficiency, splitter_ratio}) {
        if (!(e >= 0 && e <= 1)) {
            throw DomainError("efficiencies and splitter ratio must lie in [0, 1]");
        }
    }
    if (!(dark_count_probability >= 0 && dark_count_probability < 1)) {
        throw DomainError("dark-count probability must lie in [0, 1)");
    }
    if (chunk_periods < 64) {
        throw ConfigError("chunk_periods must be >= 64");
    }
    auto kernel = internal::GateKernel::from(gate);
    double span = kernel.hi() - kernel.lo();
    double max_delay = 0;
    for (double d : delays_ps) {
        if (!std::isfinite(d)) {
            throw ConfigError("delays must be finite");
        }
        internal::delay_steps(d, kernel.dt);
        max_delay = std::max(max_delay, std::abs(d));
    }
    if (!(span + max_delay < 0.5 * rep_period_ns * 1e3)) {
        std::ostringstream ss;
        ss << "gate span " << span << " ps plus largest delay " << max_delay
           << " ps must stay below half the repetition period";
        throw ConfigError(ss.str());
    }
}

// ---------------------------------------------------------------- sampling model

namespace {

/// Per-bin sampling model. Classical sources are conditionally Poissonian
/// given the phase of the period; their click probabilities are linear in the
/// integrated gate intensity Lambda (weak-signal limit). Analytic sources have
/// fixed single and pair probabilities per period.
struct BinModel {
    double r = 0.5;
    bool phased = false;
    double p11 = 0, p10 = 0, p01 = 0;
    /// Phased: candidate periods have probability p_active * q_max.
    double p_active = 0;
    double q_max = 0;
    std::function<double(std::mt19937_64 &)> draw_lambda;
    PairProbabilities ensemble;
    double max_single = 0;
};

void set_stationary_classical(BinModel &m, double lambda) {
    double a = m.r * lambda, b = (1 - m.r) * lambda;
    m.p11 = a * b;
    m.p10 = a * (1 - b);
    m.p01 = (1 - a) * b;
    m.ensemble = {a, b, a * b};
    m.max_single = std::max(a, b);
}

/// Tabulated pulse-gate overlap K(u) = sum_j h_j p(t_j - u) dt, with p the
/// unit-area pulse profile.
struct PulseOverlap {
    double u0 = 0;
    double dt = 0;
    std::vector<double> k;

    static PulseOverlap build(const PulsedCoherent &src, const internal::GateKernel &kernel) {
        propagation::PulseSpec pulse;
        pulse.shape = src.shape;
        pulse.fwhm_ps = src.pulse_fwhm_ps;
        double norm = 1.0 / pulse.energy_width_ps();
        double reach = (src.shape == propagation::PulseShape::sech2 ? 9.0 : 3.5) * src.pulse_fwhm_ps;
        PulseOverlap o;
        o.dt = kernel.dt;
        auto pad = static_cast<std::ptrdiff_t>(std::ceil(reach / o.dt));
        auto n = static_cast<std::ptrdiff_t>(kernel.h.size()) + 2 * pad;
        o.u0 = kernel.lo() - static_cast<double>(pad) * o.dt;
        o.k.assign(static_cast<std::size_t>(n), 0.0);
        std::vector<double> profile(static_cast<std::size_t>(n + static_cast<std::ptrdiff_t>(kernel.h.size())));
        // t_j - u_i = (j - i + pad) dt on the shared grid.
        for (std::size_t q = 0; q < profile.size(); q++) {
            double x = (static_cast<double>(q) - static_cast<double>(n - 1) + static_cast<double>(pad)) * o.dt;
            profile[q] = pulse.shape_at(x) * norm;
        }
        for (std::ptrdiff_t i = 0; i < n; i++) {
            double acc = 0;
            for (std::size_t j = 0; j < kernel.h.size(); j++) {
                acc += kernel.h[j] * profile[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(j) - i + n - 1)];
            }
            o.k[static_cast<std::size_t>(i)] = acc * o.dt;
        }
        return o;
    }
};

/// Delay-independent pieces, computed once per run.
struct Context {
    internal::GateKernel kernel;
    std::optional<internal::GateAutocorrelation> acf;
    std::optional<PulseOverlap> overlap;

    Context(const SourceModel &source, const propagation::GateResponse &gate)
        : kernel(internal::GateKernel::from(gate)) {
        if (const auto *p = std::get_if<PulsedCoherent>(&source)) {
            overlap = PulseOverlap::build(*p, kernel);
        }
        if (std::holds_alternative<AnalyticG2>(source)) {
            acf = internal::GateAutocorrelation::from(kernel);
        }
    }
};

BinModel build_model(const SourceModel &source, const MeasurementConfig &cfg, const Context &ctx, double dt_ps) {
    const internal::GateKernel &kernel = ctx.kernel;
    BinModel m;
    m.r = cfg.splitter_ratio;
    const double eta = cfg.efficiency();
    const double period_ps = cfg.rep_period_ns * 1e3;
    std::visit(
        overloaded{
            [&](const CoherentCw &s) { set_stationary_classical(m, 2.0 * eta * s.mean_rate); },
            [&](const ModulatedCw &s) {
                const double f = s.frequency_ghz * 1e-3;
                std::complex<double> hf = 0;
                for (std::size_t j = 0; j < kernel.h.size(); j++) {
                    double t = kernel.t0 + static_cast<double>(j) * kernel.dt;
                    hf += kernel.h[j] * std::polar(1.0, 2 * std::numbers::pi * f * t);
                }
                hf *= kernel.dt;
                // Lambda(phi) = eta mu (2 + m Re(coef e^{i phi})).
                const std::complex<double> coef =
                    s.depth * hf * (1.0 + std::polar(1.0, 2 * std::numbers::pi * f * dt_ps));
                const double scale = eta * s.mean_rate;
                if (!s.phase_random) {
                    set_stationary_classical(m, scale * (2.0 + coef.real()));
                    return;
                }
                m.phased = true;
                m.p_active = 1.0;
                double lambda_max = scale * (2.0 + std::abs(coef));
                m.q_max = std::min(1.0, lambda_max);
                m.draw_lambda = [scale, coef](std::mt19937_64 &rng) {
                    double phi = std::uniform_real_distribution<double>(0.0, 2 * std::numbers::pi)(rng);
                    return scale * (2.0 + (coef * std::polar(1.0, phi)).real());
                };
                double mean = 2.0 * scale;
                double second = scale * scale * (4.0 + 0.5 * std::norm(coef));
                m.ensemble = {m.r * mean, (1 - m.r) * mean, m.r * (1 - m.r) * second};
                m.max_single = std::max(m.r, 1 - m.r) * lambda_max;
            },
            [&](const PulsedCoherent &s) {
                const PulseOverlap &overlap = *ctx.overlap;
                const double scale = eta * s.mean_photons_per_pulse * kernel.tau_eff();
                auto d = internal::delay_steps(dt_ps, kernel.dt);
                auto nk = static_cast<std::ptrdiff_t>(overlap.k.size());
                std::ptrdiff_t i_lo = std::min<std::ptrdiff_t>(0, d);
                std::ptrdiff_t i_hi = nk - 1 + std::max<std::ptrdiff_t>(0, d);
                // L(s) = K(s) + K(s - dt) on the grid u0 + i dt.
                auto total = std::make_shared<std::vector<double>>(static_cast<std::size_t>(i_hi - i_lo + 1), 0.0);
                for (std::ptrdiff_t i = i_lo; i <= i_hi; i++) {
                    double v = 0;
                    if (i >= 0 && i < nk) {
                        v += overlap.k[static_cast<std::size_t>(i)];
                    }
                    if (i - d >= 0 && i - d < nk) {
                        v += overlap.k[static_cast<std::size_t>(i - d)];
                    }
                    (*total)[static_cast<std::size_t>(i - i_lo)] = v;
                }
                const double s_lo = overlap.u0 + static_cast<double>(i_lo) * overlap.dt;
                const double s_hi = overlap.u0 + static_cast<double>(i_hi) * overlap.dt;
                const double step = overlap.dt;
                auto lambda_at = [total, s_lo, step, scale](double pos) {
                    double x = (pos - s_lo) / step;
                    if (x < 0) {
                        return 0.0;
                    }
                    auto j = static_cast<std::size_t>(x);
                    if (j + 1 >= total->size()) {
                        return j + 1 == total->size() ? scale * total->back() : 0.0;
                    }
                    double f = x - static_cast<double>(j);
                    return scale * ((1 - f) * (*total)[j] + f * (*total)[j + 1]);
                };
                double l_max = scale * *std::max_element(total->begin(), total->end());
                if (!s.rep_incommensurate) {
                    set_stationary_classical(m, lambda_at(s.offset_ps));
                    m.max_single = std::max(m.r, 1 - m.r) * l_max;
                    return;
                }
                if (!(s_lo > -0.5 * period_ps && s_hi < 0.5 * period_ps)) {
                    throw ConfigError("pulse-gate overlap window does not fit inside one repetition period");
                }
                m.phased = true;
                m.p_active = (s_hi - s_lo) / period_ps;
                m.q_max = std::min(1.0, l_max);
                m.draw_lambda = [lambda_at, s_lo, s_hi](std::mt19937_64 &rng) {
                    return lambda_at(std::uniform_real_distribution<double>(s_lo, s_hi)(rng));
                };
                // Exact integrals of the piecewise-linear Lambda over the period.
                double first = 0, second = 0;
                for (std::size_t j = 0; j + 1 < total->size(); j++) {
                    double a = scale * (*total)[j], b = scale * (*total)[j + 1];
                    first += 0.5 * (a + b) * step;
                    second += (a * a + a * b + b * b) * step / 3.0;
                }
                first /= period_ps;
                second /= period_ps;
                m.ensemble = {m.r * first, (1 - m.r) * first, m.r * (1 - m.r) * second};
                m.max_single = std::max(m.r, 1 - m.r) * l_max;
            },
            [&](const AnalyticG2 &s) {
                const auto &acf = *ctx.acf;
                auto g2 = [&s](double t) { return s.g2(t); };
                double x0 = acf.average(g2, 0.0);
                double xd = acf.average(g2, dt_ps);
                double mu = eta * s.mean_rate;
                double pa = m.r * 2.0 * mu, pb = (1 - m.r) * 2.0 * mu;
                double pab = m.r * (1 - m.r) * mu * mu * (2.0 * x0 + 2.0 * xd);
                m.ensemble = {pa, pb, pab};
                m.max_single = std::max(pa, pb);
                if (pab > std::min(pa, pb)) {
                    throw RegimeError("pair probability exceeds a single-detector probability at " +
                                      describe_delay(dt_ps));
                }
                m.p11 = pab;
                m.p10 = pa - pab;
                m.p01 = pb - pab;
            },
        },
        source);
    if (m.max_single > kRegimeLimit) {
        std::ostringstream ss;
        ss << "click probability per period reaches " << m.max_single << " at " << describe_delay(dt_ps)
           << "; the single-click model needs <= " << kRegimeLimit;
        throw RegimeError(ss.str());
    }
    return m;
}

void check_horizon(const SourceModel &source, const MeasurementConfig &cfg) {
    if (const auto *a = std::get_if<AnalyticG2>(&source)) {
        double max_delay = 0;
        for (double d : cfg.delays_ps) {
            max_delay = std::max(max_delay, std::abs(d));
        }
        if (!(a->horizon_ps() + max_delay < 0.5 * cfg.rep_period_ns * 1e3)) {
            throw ConfigError("g2 correlation horizon reaches into neighboring repetition periods");
        }
    }
}

std::vector<internal::Click> sample_chunk(const BinModel &m, std::mt19937_64 &rng, std::uint64_t begin,
                                          std::uint64_t end) {
    std::vector<internal::Click> clicks;
    double q = m.phased ? m.p_active * m.q_max : m.p11 + m.p10 + m.p01;
    if (!(q > 0)) {
        return clicks;
    }
    std::geometric_distribution<std::uint64_t> skip(std::min(q, 1.0));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::uint64_t k = begin;; k++) {
        if (q < 1.0) {
            k += skip(rng);
        }
        if (k >= end) {
            break;
        }
        std::uint8_t mask = 0;
        if (m.phased) {
            double lambda = m.draw_lambda(rng);
            double a = m.r * lambda, b = (1 - m.r) * lambda;
            double u = unit(rng) * m.q_max;
            if (u < a * b) {
                mask = 3;
            } else if (u < a) {
                mask = 1;
            } else if (u < a + b - a * b) {
                mask = 2;
            }
        } else {
            double u = unit(rng) * q;
            mask = u < m.p11 ? 3 : (u < m.p11 + m.p10 ? 1 : 2);
        }
        if (mask) {
            clicks.push_back({k, mask});
        }
    }
    return clicks;
}

constexpr std::uint64_t kSamplerSalt = 0x67617465;  // "gate"

}  // namespace

PairProbabilities pair_detection_probability(const SourceModel &source, const MeasurementConfig &cfg, double dt_ps) {
    validate(source);
    return build_model(source, cfg, Context(source, cfg.gate), dt_ps).ensemble;
}

CoincidenceHistogram simulate_coincidences(const SourceModel &source, const MeasurementConfig &cfg) {
    validate(source);
    cfg.validate();
    check_horizon(source, cfg);
    Context ctx(source, cfg.gate);
    std::vector<BinModel> models;
    models.reserve(cfg.delays_ps.size());
    for (double d : cfg.delays_ps) {
        models.push_back(build_model(source, cfg, ctx, d));
    }
    return internal::run_chunks(cfg, [&](std::size_t bin, std::uint64_t chunk, std::uint64_t begin,
                                         std::uint64_t end) {
        auto rng = internal::substream(cfg.rng_seed, kSamplerSalt, bin, chunk);
        auto clicks = sample_chunk(models[bin], rng, begin, end);
        internal::add_dark_clicks(clicks, rng, cfg.dark_count_probability, begin, end, 1);
        internal::add_dark_clicks(clicks, rng, cfg.dark_count_probability, begin, end, 2);
        return clicks;
    });
}

double gate_averaged_g2(const AnalyticG2 &source, const propagation::GateResponse &gate, double dt_ps) {
    auto acf = internal::GateAutocorrelation::from(internal::GateKernel::from(gate));
    return acf.average([&source](double t) { return source.g2(t); }, dt_ps);
}

int HistogramBin::lag_index(int lag) {
    if (lag >= -kMaxAccidentalLag && lag <= -1) {
        return lag + kMaxAccidentalLag;
    }
    if (lag >= 1 && lag <= kMaxAccidentalLag) {
        return lag + kMaxAccidentalLag - 1;
    }
    throw ConfigError("accidental lag out of range");
}

std::uint64_t HistogramBin::accidental_total() const {
    std::uint64_t total = 0;
    for (auto v : accidentals) {
        total += v;
    }
    return total;
}

double HistogramBin::accidental_mean() const {
    if (accidentals.empty()) {
        return 0.0;
    }
    return static_cast<double>(accidental_total()) / static_cast<double>(accidentals.size());
}

}  // namespace g2up::hbt
