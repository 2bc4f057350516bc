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

// Pieces shared by the gate-sampled Monte Carlo and the intensity oracle.

#ifndef G2UP_HBT_INTERNAL_HPP
#define G2UP_HBT_INTERNAL_HPP

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "g2up/hbt.hpp"

namespace g2up::hbt::internal {

/// Gate response cropped to its support and shifted so the peak sits at t=0.
struct GateKernel {
    double t0 = 0;
    double dt = 0;
    /// Unit area.
    std::vector<double> h;
    double h_max = 0;

    static GateKernel from(const propagation::GateResponse &gate);

    double lo() const {
        return t0;
    }
    double hi() const {
        return t0 + dt * static_cast<double>(h.size() - 1);
    }
    double tau_eff() const {
        return 1.0 / h_max;
    }
    /// h(t) / max h, linearly interpolated, zero outside the support.
    double weight(double t) const;
};

/// Autocorrelation A(k dt) = sum_j h_j h_{j+k} dt of a kernel.
struct GateAutocorrelation {
    double dt = 0;
    std::ptrdiff_t half = 0;
    std::vector<double> a;

    static GateAutocorrelation from(const GateKernel &kernel);

    /// sum_k A(k dt) f(k dt + shift) dt
    template <typename F>
    double average(const F &f, double shift) const {
        double acc = 0;
        for (std::ptrdiff_t k = -half; k <= half; k++) {
            acc += a[static_cast<std::size_t>(k + half)] * f(static_cast<double>(k) * dt + shift);
        }
        return acc * dt;
    }
};

/// Engine for one (bin, chunk) substream.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t salt, std::uint64_t bin, std::uint64_t chunk);

struct Click {
    std::uint64_t period = 0;
    /// Bit 0: detector A, bit 1: detector B.
    std::uint8_t mask = 0;
};

/// Counts for one chunk of periods plus the clicks near its edges, which pair
/// with neighboring chunks.
struct ChunkTally {
    std::uint64_t coincidences = 0;
    std::uint64_t singles_a = 0;
    std::uint64_t singles_b = 0;
    std::vector<std::uint64_t> accidentals = std::vector<std::uint64_t>(2 * kMaxAccidentalLag, 0);
    std::vector<Click> head, tail;
};

/// Geometric-skip Bernoulli stream of dark clicks on one detector.
void add_dark_clicks(std::vector<Click> &clicks, std::mt19937_64 &rng, double p, std::uint64_t begin,
                     std::uint64_t end, std::uint8_t detector);

/// Merges clicks from one period into one entry and sorts by period.
void coalesce(std::vector<Click> &clicks);

/// `clicks` sorted and coalesced, all in [begin, end).
ChunkTally tally_chunk(const std::vector<Click> &clicks, std::uint64_t begin, std::uint64_t end);

/// Runs `simulate(bin, chunk, begin, end)` over every chunk of every bin on a
/// worker pool and reduces the tallies in chunk order.
CoincidenceHistogram run_chunks(
    const MeasurementConfig &cfg,
    const std::function<std::vector<Click>(std::size_t, std::uint64_t, std::uint64_t, std::uint64_t)> &simulate);

/// Index of a delay on the gate grid. Throws ConfigError if the delay is not
/// an integer multiple of the grid step.
std::ptrdiff_t delay_steps(double dt_ps, double grid_step_ps);

}  // namespace g2up::hbt::internal

#endif
