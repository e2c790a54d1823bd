/*
 * Copyright 2026 The msdg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "common/keyvalue.hpp"

namespace msdg {

/// Architectural hyperparameters. Defaults are the desk-scale configuration.
struct ModelConfig {
    std::size_t length = 4000;      // samples per spectrum (l)
    std::size_t window = 40;        // patch width (rho)
    std::size_t stride = 20;        // patch stride (gamma)
    std::size_t hidden = 64;        // h
    std::size_t heads = 4;
    std::size_t head_dim = 16;      // d_k
    std::size_t layers = 2;         // L, both encoders
    std::size_t mlp_dim = 128;      // encoder MLP width
    std::size_t peak_mlp_dim = 64;  // phi
    std::size_t alpha = 8;          // dictionary rows, all classes
    std::size_t rank = 2;           // r
    double dropout = 0.1;
    bool dictionary_enabled = true;
    double dust_threshold = 0.5;    // tau
    double layer_norm_eps = 1e-5;
    std::vector<std::uint8_t> positive_classes{2, 3, 4, 5};  // one sub-dictionary each
    std::uint8_t dust_class = 1;

    static ModelConfig desk();
    static ModelConfig paper();
    /// Reads keys over the desk defaults; unknown keys are rejected.
    static ModelConfig from_keyvalue(KeyValueConfig& kv);
    static ModelConfig load(const std::string& path);

    /// Sub-dictionary count c.
    std::size_t class_count() const { return positive_classes.size(); }
    std::size_t per_class() const { return class_count() ? alpha / class_count() : 0; }
    /// N = (l - rho) / gamma + 1; validates divisibility.
    std::size_t patches() const;

    /// Throws ConfigError on any violated invariant.
    void validate() const;
};

}  // namespace msdg
