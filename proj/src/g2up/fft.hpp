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

#ifndef G2UP_FFT_HPP
#define G2UP_FFT_HPP

#include <complex>
#include <cstddef>
#include <span>

namespace g2up {

/// In-place complex FFT of a fixed length, backed by FFTW. Executing a plan is
/// thread-safe; plan construction and destruction are serialized internally.
class FftPlan {
   public:
    explicit FftPlan(std::size_t n);
    ~FftPlan();
    FftPlan(const FftPlan &) = delete;
    FftPlan &operator=(const FftPlan &) = delete;

    std::size_t size() const {
        return n_;
    }
    /// X_k = sum_n x_n exp(-2 pi i k n / N).
    void forward(std::span<std::complex<double>> data) const;
    /// Inverse transform including the 1/N factor.
    void inverse(std::span<std::complex<double>> data) const;

   private:
    std::size_t n_;
    void *forward_plan_;
    void *inverse_plan_;
};

}  // namespace g2up

#endif
