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

#ifndef G2UP_ERRORS_HPP
#define G2UP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace g2up {

/// Broad failure categories. The numeric values double as CLI exit codes.
enum class ErrorCategory : int {
    internal = 1,
    configuration = 2,
    numerical = 3,
    regime = 4,
};

/// Base of every error raised by the library. `kind()` is a stable
/// machine-readable tag ("domain_error", "no_root", ...).
class Error : public std::runtime_error {
   public:
    Error(ErrorCategory category, std::string kind, const std::string &message)
        : std::runtime_error(message), category_(category), kind_(std::move(kind)) {
    }
    ErrorCategory category() const noexcept {
        return category_;
    }
    const std::string &kind() const noexcept {
        return kind_;
    }

   private:
    ErrorCategory category_;
    std::string kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string &message, std::string kind = "configuration_error")
        : Error(ErrorCategory::configuration, std::move(kind), message) {
    }
};

/// Input outside the mathematical or physical domain of an operation.
struct DomainError : ConfigError {
    explicit DomainError(const std::string &message) : ConfigError(message, "domain_error") {
    }
};

struct NumericalError : Error {
    explicit NumericalError(const std::string &message, std::string kind = "numerical_error")
        : Error(ErrorCategory::numerical, std::move(kind), message) {
    }
};

struct NoRootError : NumericalError {
    explicit NoRootError(const std::string &message) : NumericalError(message, "no_root") {
    }
};

struct SolverAccuracyError : NumericalError {
    explicit SolverAccuracyError(const std::string &message) : NumericalError(message, "solver_accuracy") {
    }
};

struct EmptyResponseError : NumericalError {
    explicit EmptyResponseError(const std::string &message) : NumericalError(message, "empty_response") {
    }
};

struct FitError : NumericalError {
    explicit FitError(const std::string &message) : NumericalError(message, "fit_error") {
    }
};

/// Detection probabilities too large for the single-click coincidence model.
struct RegimeError : Error {
    explicit RegimeError(const std::string &message) : Error(ErrorCategory::regime, "regime_violation", message) {
    }
};

}  // namespace g2up

#endif
