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

#include <filesystem>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "regionedit/bench.hpp"

// Method sweep files:
//
//   scorers: [toy, clip]
//   workers: 2
//   defaults: {steps: 10, blend_stop: 1}
//   methods:
//     - name: full
//     - name: no-self
//       self_control: false
//   ablation: true        # optional: expand the first method into the four arms

namespace regionedit::bench {

struct SweepConfig {
    std::vector<MethodConfig> methods;
    std::vector<std::string> scorers{"toy"};
    int workers = 1;
};

namespace detail {

inline void apply_method_keys(MethodConfig& m, const YAML::Node& n) {
    auto& s = m.sampler;
    auto& c = s.control;
    if (n["backend"]) m.backend = n["backend"].as<std::string>();
    if (n["backend_seed"]) m.backend_seed = n["backend_seed"].as<std::uint64_t>();
    if (n["steps"]) s.steps = n["steps"].as<int>();
    if (n["blend_stop"]) s.blend_stop = n["blend_stop"].as<int>();
    if (n["text_scale"]) s.text_scale = n["text_scale"].as<double>();
    if (n["image_scale"]) s.image_scale = n["image_scale"].as<double>();
    if (n["seed"]) s.seed = n["seed"].as<std::uint64_t>();
    if (n["boost"]) c.boost_weight = n["boost"].as<double>();
    if (n["neg_bias"]) c.neg_bias = n["neg_bias"].as<double>();
    if (n["cross_control"]) c.enable_cross = n["cross_control"].as<bool>();
    if (n["self_control"]) c.enable_self = n["self_control"].as<bool>();
    if (n["boost_enabled"]) c.enable_boost = n["boost_enabled"].as<bool>();
    if (n["background"]) {
        const auto v = n["background"].as<std::string>();
        if (v == "sot_pad_only") c.background = BackgroundPolicy::SotPadOnly;
        else if (v == "unrestricted") c.background = BackgroundPolicy::Unrestricted;
        else throw InvalidInput("background must be sot_pad_only or unrestricted");
    }
}

}  // namespace detail

inline SweepConfig parse_sweep(const YAML::Node& root) {
    SweepConfig sweep;
    if (root["scorers"]) sweep.scorers = root["scorers"].as<std::vector<std::string>>();
    if (root["workers"]) sweep.workers = root["workers"].as<int>();
    MethodConfig defaults;
    defaults.name = "default";
    if (root["defaults"]) detail::apply_method_keys(defaults, root["defaults"]);
    if (root["methods"]) {
        for (const auto& node : root["methods"]) {
            MethodConfig m = defaults;
            if (!node["name"]) throw InvalidInput("every method needs a name");
            m.name = node["name"].as<std::string>();
            detail::apply_method_keys(m, node);
            m.sampler.validate();
            sweep.methods.push_back(std::move(m));
        }
    }
    if (root["ablation"] && root["ablation"].as<bool>()) {
        const MethodConfig base = sweep.methods.empty() ? defaults : sweep.methods.front();
        sweep.methods           = ablation_arms(base);
    }
    if (sweep.methods.empty()) throw InvalidInput("sweep defines no methods");
    return sweep;
}

inline SweepConfig load_sweep(const std::filesystem::path& path) {
    try {
        return parse_sweep(YAML::LoadFile(path.string()));
    } catch (const YAML::Exception& e) {
        throw InvalidInput("cannot parse " + path.string() + ": " + e.what());
    }
}

}  // namespace regionedit::bench
