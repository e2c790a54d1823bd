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

#include <cstdint>
#include <string>
#include <vector>

#include "common/keyvalue.hpp"
#include "spectra/spectra.hpp"

namespace msdg {

/// Synthetic data generation settings. Presets: "desk" (250 per class) and
/// "paper-proportion" (630/1500/1500/1400/1500).
struct DataConfig {
    std::string preset = "desk";
    double mz_min = 500;
    double mz_max = 10000;
    std::size_t length = 4000;
    ClassCounts counts = desk_counts();
    NoiseParams noise;
    TemplateOptions templates;

    static DataConfig from_preset(const std::string& preset);
    /// Keys override the chosen preset; unknown keys are rejected.
    static DataConfig from_keyvalue(KeyValueConfig& kv);
    static DataConfig load(const std::string& path);
    void validate() const;
};

struct GeneratedData {
    Dataset dataset;
    std::vector<ClassTemplate> templates;
};

/// Templates and spectra both derive from `seed`.
GeneratedData generate(const DataConfig& cfg, std::uint64_t seed);

/// Peak table sidecar: CSV with columns class_id,center_mz,width_mz,amplitude.
/// Classes without peaks appear with empty peak columns.
std::string templates_csv(const std::vector<ClassTemplate>& templates);
std::vector<ClassTemplate> parse_templates_csv(const std::string& text);
void save_templates(const std::string& path, const std::vector<ClassTemplate>& templates);
std::vector<ClassTemplate> load_templates(const std::string& path);

}  // namespace msdg
