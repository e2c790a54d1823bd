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

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace msdg {

inline constexpr int kNumClasses = 5;
/// Class ids run 1..5. Class 1 is the peakless (dust-like) class; 2-3 are
/// multi-peak bacterial-like, 4-5 few-peak protein-like.
inline constexpr std::uint8_t kDustClass = 1;

const char* class_name(std::uint8_t class_id);

/// Shared m/z axis in Daltons, strictly increasing.
struct MzAxis {
    std::vector<float> values;

    static MzAxis linear(double lo, double hi, std::size_t points);
    std::size_t size() const { return values.size(); }
    double min() const { return values.front(); }
    double max() const { return values.back(); }
    /// Fractional sample index of an m/z value by linear interpolation.
    double fractional_index(double mz) const;
    void validate() const;
};

enum class ProfileKind { kBacterial, kProtein, kPeakless };

struct ClassTemplate {
    std::uint8_t class_id = 0;
    ProfileKind kind = ProfileKind::kPeakless;
    std::vector<double> centers;     // Da
    std::vector<double> widths;      // Gaussian sigma, Da
    std::vector<double> amplitudes;  // > 0
};

/// Shot-to-shot variability. All fields zero except the baseline gives a
/// deterministic, template-exact spectrum.
struct NoiseParams {
    double noise_sigma = 0.15;         // additive white noise
    double baseline_amplitude = 1.5;   // mean baseline height at axis start
    double baseline_jitter = 0.45;     // relative std of the baseline height
    double baseline_decay = 2500.0;    // Da
    double amplitude_jitter = 0.35;    // log-normal sigma per peak
    double shot_scale_sigma = 0.5;     // log-normal sigma of overall shot intensity
    double peak_dropout = 0.15;        // probability a template peak is missing
    double mz_jitter = 2.0;            // Da, per-shot calibration shift
    double spurious_rate = 2.0;        // mean count of random peaks per shot
    double spurious_amplitude = 1.2;   // mean amplitude of random peaks

    static NoiseParams noiseless();
};

struct Spectrum {
    std::vector<float> intensities;
    std::uint8_t label = 0;
};

struct Dataset {
    MzAxis axis;
    std::vector<Spectrum> spectra;

    std::array<std::size_t, kNumClasses> class_counts() const;
    void validate() const;
};

/// Per-patch ground truth for one class: bit j is set iff a template peak
/// center lies in window j.
struct PeakVector {
    std::uint8_t class_id = 0;
    std::vector<std::uint8_t> bits;

    std::size_t set_count() const;
};

struct TemplateOptions {
    std::size_t patch_width = 40;  // samples per patch, used for peak spacing
    std::size_t bacterial_peaks = 6;
    std::size_t protein_peaks_min = 2;
    std::size_t protein_peaks_max = 3;
};

std::vector<ClassTemplate> default_templates(const MzAxis& axis, std::uint64_t seed,
                                             const TemplateOptions& options = {});

/// Noise-free intensities of a template (peaks only, no baseline).
std::vector<float> template_profile(const ClassTemplate& tmpl, const MzAxis& axis);

double baseline_at(const NoiseParams& noise, const MzAxis& axis, double mz, double height);

Spectrum synthesize_spectrum(const ClassTemplate& tmpl, const MzAxis& axis, const NoiseParams& noise,
                             std::uint64_t seed);

/// Counts per class id 1..5.
using ClassCounts = std::array<std::size_t, kNumClasses>;
ClassCounts desk_counts();
ClassCounts paper_proportion_counts();

Dataset generate_dataset(const MzAxis& axis, const std::vector<ClassTemplate>& templates, const ClassCounts& counts,
                         const NoiseParams& noise, std::uint64_t seed);

/// Stratified split; throws ConfigError when a present class has < 2 spectra.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed);

PeakVector peak_ground_truth(const ClassTemplate& tmpl, const MzAxis& axis, std::size_t width, std::size_t stride);

std::vector<std::uint8_t> encode_dataset(const Dataset& ds);
Dataset decode_dataset(const std::vector<std::uint8_t>& bytes);
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

}  // namespace msdg
