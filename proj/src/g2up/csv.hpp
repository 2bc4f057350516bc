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

#ifndef G2UP_CSV_HPP
#define G2UP_CSV_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace g2up::csv {

/// Shortest decimal string that parses back to exactly `value`.
std::string format(double value);
std::string format(std::uint64_t value);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of `name` in the header; throws ConfigError if absent.
    std::size_t column(std::string_view name) const;
};

/// Comma-separated, first line is the header, blank lines and lines starting
/// with '#' are skipped.
Table read(std::istream &in);
Table read_file(const std::string &path);

double to_double(const std::string &field);

}  // namespace g2up::csv

#endif
