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

#include <cmath>
#include <ostream>
#include <sstream>

#include "g2up/csv.hpp"
#include "g2up/errors.hpp"
#include "g2up/hbt.hpp"

namespace g2up::hbt {

std::vector<NormalizedPoint> normalize(const CoincidenceHistogram &hist) {
    std::vector<NormalizedPoint> out;
    out.reserve(hist.bins.size());
    for (const auto &bin : hist.bins) {
        std::uint64_t total = bin.accidental_total();
        if (total == 0) {
            std::ostringstream ss;
            ss << "no accidental coincidences in the bin at dt = " << bin.dt_ps << " ps";
            throw NumericalError(ss.str(), "undefined_normalization");
        }
        double mean = bin.accidental_mean();
        double counts = static_cast<double>(bin.coincidences);
        double c = counts / mean;
        // Poisson errors on numerator and denominator; an empty numerator
        // still carries the one-count bound.
        double var = std::max(counts, 1.0) / (mean * mean) + c * c / static_cast<double>(total);
        out.push_back({bin.dt_ps, c, std::sqrt(var)});
    }
    return out;
}

G2Estimate estimate_g2(std::span<const NormalizedPoint> c) {
    G2Estimate est;
    bool found = false;
    for (std::size_t i = 0; i < c.size(); i++) {
        if (std::abs(c[i].dt_ps) <= kZeroDelayTolerancePs) {
            if (found) {
                throw ConfigError("more than one dt = 0 bin", "duplicate_zero_delay");
            }
            est.zero = i;
            found = true;
        }
    }
    if (!found) {
        throw ConfigError("g2 inversion needs a dt = 0 bin", "missing_zero_delay");
    }
    const NormalizedPoint &z = c[est.zero];
    for (std::size_t i = 0; i < c.size(); i++) {
        G2Point p{c[i].dt_ps, c[i].c, c[i].c_err, 0, 0};
        if (i == est.zero) {
            p.g2 = z.c;
            p.g2_err = z.c_err;
        } else {
            p.g2 = 2.0 * c[i].c - z.c;
            p.g2_err = std::sqrt(4.0 * c[i].c_err * c[i].c_err + z.c_err * z.c_err);
        }
        est.points.push_back(p);
    }
    return est;
}

void write_histogram_csv(std::ostream &out, const CoincidenceHistogram &hist) {
    out << "dt_ps,C,acc_mean,singles_A,singles_B,n_periods\n";
    for (const auto &b : hist.bins) {
        out << csv::format(b.dt_ps) << ',' << csv::format(b.coincidences) << ',' << csv::format(b.accidental_mean())
            << ',' << csv::format(b.singles_a) << ',' << csv::format(b.singles_b) << ','
            << csv::format(b.n_periods) << '\n';
    }
}

void write_g2_csv(std::ostream &out, const G2Estimate &estimate) {
    out << "dt_ps,c,c_err,g2,g2_err\n";
    for (const auto &p : estimate.points) {
        out << csv::format(p.dt_ps) << ',' << csv::format(p.c) << ',' << csv::format(p.c_err) << ','
            << csv::format(p.g2) << ',' << csv::format(p.g2_err) << '\n';
    }
}

G2Estimate read_g2_csv(std::istream &in) {
    auto table = csv::read(in);
    std::size_t cdt = table.column("dt_ps"), cc = table.column("c"), cce = table.column("c_err"),
                cg = table.column("g2"), cge = table.column("g2_err");
    G2Estimate est;
    bool found = false;
    for (const auto &row : table.rows) {
        G2Point p{csv::to_double(row.at(cdt)), csv::to_double(row.at(cc)), csv::to_double(row.at(cce)),
                  csv::to_double(row.at(cg)), csv::to_double(row.at(cge))};
        if (std::abs(p.dt_ps) <= kZeroDelayTolerancePs) {
            est.zero = est.points.size();
            found = true;
        }
        est.points.push_back(p);
    }
    if (!found) {
        throw ConfigError("g2 table has no dt = 0 row", "missing_zero_delay");
    }
    return est;
}

}  // namespace g2up::hbt
