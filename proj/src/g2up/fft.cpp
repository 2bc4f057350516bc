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

#include "g2up/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <vector>

#include "g2up/errors.hpp"

namespace g2up {

namespace {
std::mutex &planner_mutex() {
    static std::mutex m;
    return m;
}

fftw_complex *as_fftw(std::complex<double> *p) {
    return reinterpret_cast<fftw_complex *>(p);
}
}  // namespace

FftPlan::FftPlan(std::size_t n) : n_(n) {
    std::vector<std::complex<double>> scratch(n);
    std::lock_guard<std::mutex> lock(planner_mutex());
    int len = static_cast<int>(n);
    unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_plan_ = fftw_plan_dft_1d(len, as_fftw(scratch.data()), as_fftw(scratch.data()), FFTW_FORWARD, flags);
    inverse_plan_ = fftw_plan_dft_1d(len, as_fftw(scratch.data()), as_fftw(scratch.data()), FFTW_BACKWARD, flags);
    if (forward_plan_ == nullptr || inverse_plan_ == nullptr) {
        throw Error(ErrorCategory::internal, "fft_error", "FFTW could not create a plan");
    }
}

FftPlan::~FftPlan() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

void FftPlan::forward(std::span<std::complex<double>> data) const {
    fftw_execute_dft(static_cast<fftw_plan>(forward_plan_), as_fftw(data.data()), as_fftw(data.data()));
}

void FftPlan::inverse(std::span<std::complex<double>> data) const {
    fftw_execute_dft(static_cast<fftw_plan>(inverse_plan_), as_fftw(data.data()), as_fftw(data.data()));
    double scale = 1.0 / static_cast<double>(n_);
    for (auto &v : data) {
        v *= scale;
    }
}

}  // namespace g2up
