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

#ifndef G2UP_EXPERIMENT_HPP
#define G2UP_EXPERIMENT_HPP

#include <string>

#include "g2up/hbt.hpp"

namespace g2up::experiment {

/// A parsed experiment file. See docs/experiment-schema.md for the format.
struct Experiment {
    std::string name;
    hbt::SourceModel source;
    hbt::MeasurementConfig config;
    /// Resolved experiment (solved model parameters, expanded delays, gate
    /// summary) as JSON text.
    std::string resolved_json;
};

/// Relative gate CSV paths are taken relative to `base_dir`.
Experiment parse(const std::string &json_text, const std::string &base_dir = ".");
Experiment load(const std::string &path);

/// JSON description of a source model.
std::string source_json(const hbt::SourceModel &source);

}  // namespace g2up::experiment

#endif
