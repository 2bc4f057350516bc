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

#include "g2up/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>

#include "g2up/errors.hpp"

namespace g2up::csv {

std::string format(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) {
        throw Error(ErrorCategory::internal, "format_error", "could not format a double");
    }
    return std::string(buf, end);
}

std::string format(std::uint64_t value) {
    return std::to_string(value);
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t k = 0; k < header.size(); k++) {
        if (header[k] == name) {
            return k;
        }
    }
    throw ConfigError("CSV is missing column '" + std::string(name) + "'");
}

static std::vector<std::string> split_line(const std::string &line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) {
            field.pop_back();
        }
        std::size_t start = field.find_first_not_of(' ');
        fields.push_back(start == std::string::npos ? std::string() : field.substr(start));
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

Table read(std::istream &in) {
    Table table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        auto fields = split_line(line);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw ConfigError("CSV row has " + std::to_string(fields.size()) + " fields, header has " +
                              std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    if (!have_header) {
        throw ConfigError("CSV input is empty");
    }
    return table;
}

Table read_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open '" + path + "'", "io_error");
    }
    return read(in);
}

double to_double(const std::string &field) {
    double value = 0;
    const char *first = field.data();
    const char *last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        throw ConfigError("not a number: '" + field + "'");
    }
    return value;
}

}  // namespace g2up::csv
