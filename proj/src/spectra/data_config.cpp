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

#include "spectra/data_config.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "common/binary_io.hpp"
#include "common/random.hpp"

namespace msdg {

DataConfig DataConfig::from_preset(const std::string& preset) {
    DataConfig cfg;
    cfg.preset = preset;
    if (preset == "desk") {
        cfg.counts = desk_counts();
    } else if (preset == "paper-proportion") {
        cfg.counts = paper_proportion_counts();
    } else {
        throw ConfigError("unknown data preset '" + preset + "' (expected desk or paper-proportion)");
    }
    return cfg;
}

DataConfig DataConfig::from_keyvalue(KeyValueConfig& kv) {
    DataConfig cfg = from_preset(kv.take_string("preset", "desk"));
    cfg.mz_min = kv.take_double("mz_min", cfg.mz_min);
    cfg.mz_max = kv.take_double("mz_max", cfg.mz_max);
    cfg.length = kv.take_u64("length", cfg.length);
    for (int c = 0; c < kNumClasses; ++c) {
        cfg.counts[c] = kv.take_u64("count_" + std::to_string(c + 1), cfg.counts[c]);
    }
    auto& n = cfg.noise;
    n.noise_sigma = kv.take_double("noise_sigma", n.noise_sigma);
    n.baseline_amplitude = kv.take_double("baseline_amplitude", n.baseline_amplitude);
    n.baseline_jitter = kv.take_double("baseline_jitter", n.baseline_jitter);
    n.baseline_decay = kv.take_double("baseline_decay", n.baseline_decay);
    n.amplitude_jitter = kv.take_double("amplitude_jitter", n.amplitude_jitter);
    n.shot_scale_sigma = kv.take_double("shot_scale_sigma", n.shot_scale_sigma);
    n.peak_dropout = kv.take_double("peak_dropout", n.peak_dropout);
    n.mz_jitter = kv.take_double("mz_jitter", n.mz_jitter);
    n.spurious_rate = kv.take_double("spurious_rate", n.spurious_rate);
    n.spurious_amplitude = kv.take_double("spurious_amplitude", n.spurious_amplitude);
    auto& t = cfg.templates;
    t.patch_width = kv.take_u64("patch_width", t.patch_width);
    t.bacterial_peaks = kv.take_u64("bacterial_peaks", t.bacterial_peaks);
    t.protein_peaks_min = kv.take_u64("protein_peaks_min", t.protein_peaks_min);
    t.protein_peaks_max = kv.take_u64("protein_peaks_max", t.protein_peaks_max);
    kv.finish();
    cfg.validate();
    return cfg;
}

DataConfig DataConfig::load(const std::string& path) {
    KeyValueConfig kv = KeyValueConfig::load(path);
    return from_keyvalue(kv);
}

void DataConfig::validate() const {
    if (!(mz_min > 0 && mz_max > mz_min)) throw ConfigError("m/z range must satisfy 0 < mz_min < mz_max");
    if (length < 2) throw ConfigError("length must be at least 2");
    for (int c = 0; c < kNumClasses; ++c) {
        if (counts[c] == 0) throw ConfigError("count_" + std::to_string(c + 1) + " must be at least 1");
    }
    const auto& n = noise;
    for (double v : {n.noise_sigma, n.baseline_amplitude, n.baseline_jitter, n.amplitude_jitter, n.shot_scale_sigma,
                     n.mz_jitter, n.spurious_rate, n.spurious_amplitude}) {
        if (!(v >= 0) || !std::isfinite(v)) throw ConfigError("noise parameters must be finite and non-negative");
    }
    if (!(n.baseline_decay > 0)) throw ConfigError("baseline_decay must be positive");
    if (!(n.peak_dropout >= 0 && n.peak_dropout < 1)) throw ConfigError("peak_dropout must lie in [0, 1)");
    if (templates.patch_width == 0) throw ConfigError("patch_width must be positive");
    if (templates.bacterial_peaks < 6) throw ConfigError("bacterial templates need at least 6 peaks");
    if (templates.protein_peaks_min < 1 || templates.protein_peaks_max > 3 ||
        templates.protein_peaks_min > templates.protein_peaks_max) {
        throw ConfigError("protein peak counts must satisfy 1 <= min <= max <= 3");
    }
}

GeneratedData generate(const DataConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    const std::uint64_t template_seed = rng.next_u64();
    const std::uint64_t data_seed = rng.next_u64();
    const MzAxis axis = MzAxis::linear(cfg.mz_min, cfg.mz_max, cfg.length);
    GeneratedData out;
    out.templates = default_templates(axis, template_seed, cfg.templates);
    out.dataset = generate_dataset(axis, out.templates, cfg.counts, cfg.noise, data_seed);
    return out;
}

std::string templates_csv(const std::vector<ClassTemplate>& templates) {
    std::ostringstream out;
    out << "class_id,center_mz,width_mz,amplitude\n";
    char buf[128];
    for (const auto& t : templates) {
        if (t.centers.empty()) {
            out << static_cast<int>(t.class_id) << ",,,\n";
            continue;
        }
        for (std::size_t i = 0; i < t.centers.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", t.class_id, t.centers[i], t.widths[i],
                          t.amplitudes[i]);
            out << buf;
        }
    }
    return out.str();
}

std::vector<ClassTemplate> parse_templates_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("class_id,center_mz", 0) != 0) {
        throw FormatError("peak table must start with the header class_id,center_mz,width_mz,amplitude");
    }
    std::vector<ClassTemplate> out(kNumClasses);
    std::vector<bool> seen(kNumClasses, false);
    for (int c = 0; c < kNumClasses; ++c) out[c].class_id = static_cast<std::uint8_t>(c + 1);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) fields.push_back(f);
        while (fields.size() < 4) fields.emplace_back();
        if (fields.size() != 4) throw FormatError("peak table line " + std::to_string(line_no) + ": expected 4 fields");
        int id = 0;
        try {
            id = std::stoi(fields[0]);
        } catch (const std::exception&) {
            throw FormatError("peak table line " + std::to_string(line_no) + ": bad class id");
        }
        if (id < 1 || id > kNumClasses) throw FormatError("peak table line " + std::to_string(line_no) + ": class id outside 1..5");
        seen[id - 1] = true;
        if (fields[1].empty()) continue;
        try {
            out[id - 1].centers.push_back(std::stod(fields[1]));
            out[id - 1].widths.push_back(std::stod(fields[2]));
            out[id - 1].amplitudes.push_back(std::stod(fields[3]));
        } catch (const std::exception&) {
            throw FormatError("peak table line " + std::to_string(line_no) + ": bad number");
        }
    }
    for (int c = 0; c < kNumClasses; ++c) {
        if (!seen[c]) throw FormatError("peak table has no entry for class " + std::to_string(c + 1));
        auto& t = out[c];
        t.kind = t.centers.empty() ? ProfileKind::kPeakless
                                   : (t.centers.size() >= 6 ? ProfileKind::kBacterial : ProfileKind::kProtein);
    }
    return out;
}

void save_templates(const std::string& path, const std::vector<ClassTemplate>& templates) {
    const std::string text = templates_csv(templates);
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<ClassTemplate> load_templates(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    return parse_templates_csv(std::string(bytes.begin(), bytes.end()));
}

}  // namespace msdg
