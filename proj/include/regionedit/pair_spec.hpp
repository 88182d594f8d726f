// Copyright 2026 The RegionEdit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <optional>
#include <string>
#include <vector>

#include "regionedit/common.hpp"

namespace regionedit {

/// `MASK.png:PROMPT:ORDER[:GROUP]` as given on the command line.
struct PairSpec {
    std::string mask_path;
    std::string prompt;
    int order = 0;
    std::optional<int> group;
};

namespace detail {

inline std::optional<int> parse_int(const std::string& s) {
    int v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec]  = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
    return v;
}

}  // namespace detail

/// The prompt may itself contain ':'; numeric fields are taken from the right.
inline PairSpec parse_pair_spec(const std::string& spec) {
    std::vector<std::string> parts;
    size_t start = 0;
    for (size_t i = 0; i <= spec.size(); ++i) {
        if (i == spec.size() || spec[i] == ':') {
            parts.push_back(spec.substr(start, i - start));
            start = i + 1;
        }
    }
    if (parts.size() < 3) throw InvalidInput("pair '" + spec + "' must look like MASK.png:PROMPT:ORDER[:GROUP]");

    PairSpec out;
    out.mask_path = parts.front();
    size_t last   = parts.size() - 1;
    const auto a  = detail::parse_int(parts[last]);
    if (!a) throw InvalidInput("pair '" + spec + "' has a non-integer ORDER/GROUP field");
    if (parts.size() >= 4) {
        if (const auto b = detail::parse_int(parts[last - 1])) {
            out.order = *b;
            out.group = *a;
            last -= 1;
        } else {
            out.order = *a;
        }
    } else {
        out.order = *a;
    }
    for (size_t i = 1; i < last; ++i) {
        if (i > 1) out.prompt += ':';
        out.prompt += parts[i];
    }
    if (out.prompt.size() >= 2 && out.prompt.front() == '"' && out.prompt.back() == '"') {
        out.prompt = out.prompt.substr(1, out.prompt.size() - 2);
    }
    if (out.mask_path.empty()) throw InvalidInput("pair '" + spec + "' has an empty mask path");
    if (out.group && *out.group < 1) throw InvalidInput("pair '" + spec + "' group must be >= 1");
    return out;
}

}  // namespace regionedit
