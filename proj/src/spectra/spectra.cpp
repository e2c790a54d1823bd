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

#include "spectra/spectra.hpp"

#include <algorithm>
#include <cmath>

#include "common/errors.hpp"
#include "common/random.hpp"
#include "numcore/ops.hpp"

namespace msdg {

const char* class_name(std::uint8_t class_id) {
    switch (class_id) {
        case 1: return "dust";
        case 2: return "bacterial-a";
        case 3: return "bacterial-b";
        case 4: return "protein-a";
        case 5: return "protein-b";
        default: return "unknown";
    }
}

MzAxis MzAxis::linear(double lo, double hi, std::size_t points) {
    if (points < 2 || !(hi > lo)) throw ConfigError("m/z axis needs at least 2 points and hi > lo");
    MzAxis axis;
    axis.values.resize(points);
    for (std::size_t i = 0; i < points; ++i) {
        axis.values[i] = static_cast<float>(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
    }
    return axis;
}

double MzAxis::fractional_index(double mz) const {
    if (mz <= values.front()) return 0.0;
    if (mz >= values.back()) return static_cast<double>(values.size() - 1);
    const auto it = std::upper_bound(values.begin(), values.end(), mz,
                                     [](double v, float e) { return v < static_cast<double>(e); });
    const auto hi = static_cast<std::size_t>(it - values.begin());
    const std::size_t lo = hi - 1;
    const double a = values[lo], b = values[hi];
    return static_cast<double>(lo) + (mz - a) / (b - a);
}

void MzAxis::validate() const {
    if (values.size() < 2) throw ConfigError("m/z axis must have at least 2 points");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) throw ConfigError("m/z axis contains a non-finite value");
        if (i && !(values[i] > values[i - 1])) throw ConfigError("m/z axis must be strictly increasing");
    }
}

NoiseParams NoiseParams::noiseless() {
    NoiseParams p;
    p.noise_sigma = 0;
    p.baseline_jitter = 0;
    p.amplitude_jitter = 0;
    p.shot_scale_sigma = 0;
    p.peak_dropout = 0;
    p.mz_jitter = 0;
    p.spurious_rate = 0;
    p.spurious_amplitude = 0;
    return p;
}

std::array<std::size_t, kNumClasses> Dataset::class_counts() const {
    std::array<std::size_t, kNumClasses> counts{};
    for (const auto& s : spectra) {
        if (s.label >= 1 && s.label <= kNumClasses) ++counts[s.label - 1];
    }
    return counts;
}

void Dataset::validate() const {
    axis.validate();
    for (std::size_t i = 0; i < spectra.size(); ++i) {
        if (spectra[i].intensities.size() != axis.size()) {
            throw ConfigError("spectrum " + std::to_string(i) + " length does not match the m/z axis");
        }
        if (spectra[i].label < 1 || spectra[i].label > kNumClasses) {
            throw ConfigError("spectrum " + std::to_string(i) + " has class id outside 1..5");
        }
    }
}

std::size_t PeakVector::set_count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::vector<ClassTemplate> default_templates(const MzAxis& axis, std::uint64_t seed, const TemplateOptions& options) {
    axis.validate();
    const std::size_t l = axis.size();
    const std::size_t pw = options.patch_width;
    // Peaks sit on slots 4 patch widths apart with at most half a patch of
    // jitter, so any two peaks of different classes are >= 3 patch widths
    // apart.
    const std::size_t spacing = 4 * pw;
    const std::size_t margin = 2 * pw;
    const std::size_t slots = l > 2 * margin ? (l - 2 * margin) / spacing : 0;

    Rng rng(seed);
    std::vector<std::size_t> protein_counts(2);
    for (auto& c : protein_counts) {
        c = options.protein_peaks_min + rng.below(options.protein_peaks_max - options.protein_peaks_min + 1);
    }
    const std::size_t needed = 2 * options.bacterial_peaks + protein_counts[0] + protein_counts[1];
    if (slots < needed) {
        throw ConfigError("m/z axis of " + std::to_string(l) + " points is too short to place " +
                          std::to_string(needed) + " separated peaks (have " + std::to_string(slots) + " slots)");
    }
    std::vector<std::size_t> slot_ids(slots);
    for (std::size_t i = 0; i < slots; ++i) slot_ids[i] = i;
    rng.shuffle(slot_ids);

    const double spacing_da = (axis.max() - axis.min()) / static_cast<double>(l - 1);
    std::size_t next_slot = 0;
    auto place = [&](ClassTemplate& t, std::size_t count, double amp_lo, double amp_hi) {
        std::vector<std::size_t> mine(slot_ids.begin() + static_cast<std::ptrdiff_t>(next_slot),
                                      slot_ids.begin() + static_cast<std::ptrdiff_t>(next_slot + count));
        next_slot += count;
        std::sort(mine.begin(), mine.end());
        for (auto s : mine) {
            const double offset = rng.uniform(-0.5, 0.5) * static_cast<double>(pw);
            const double idx = static_cast<double>(margin + s * spacing + spacing / 2) + offset;
            t.centers.push_back(axis.min() + idx * spacing_da);
            t.widths.push_back(rng.uniform(1.5, 3.0) * spacing_da);
            t.amplitudes.push_back(rng.uniform(amp_lo, amp_hi));
        }
    };

    std::vector<ClassTemplate> out(kNumClasses);
    for (int c = 0; c < kNumClasses; ++c) out[c].class_id = static_cast<std::uint8_t>(c + 1);
    out[0].kind = ProfileKind::kPeakless;
    out[1].kind = out[2].kind = ProfileKind::kBacterial;
    out[3].kind = out[4].kind = ProfileKind::kProtein;
    place(out[1], options.bacterial_peaks, 0.6, 1.5);
    place(out[2], options.bacterial_peaks, 0.6, 1.5);
    place(out[3], protein_counts[0], 1.0, 2.0);
    place(out[4], protein_counts[1], 1.0, 2.0);
    return out;
}

namespace {

void add_gaussian(std::vector<double>& out, const MzAxis& axis, double center, double sigma, double amp) {
    const double lo = center - 6.0 * sigma, hi = center + 6.0 * sigma;
    auto first = std::lower_bound(axis.values.begin(), axis.values.end(), static_cast<float>(lo));
    for (auto it = first; it != axis.values.end() && *it <= hi; ++it) {
        const double d = (static_cast<double>(*it) - center) / sigma;
        out[static_cast<std::size_t>(it - axis.values.begin())] += amp * std::exp(-0.5 * d * d);
    }
}

std::size_t poisson(Rng& rng, double mean) {
    if (mean <= 0) return 0;
    const double limit = std::exp(-mean);
    std::size_t k = 0;
    double p = rng.uniform();
    while (p > limit) {
        ++k;
        p *= rng.uniform();
    }
    return k;
}

}  // namespace

std::vector<float> template_profile(const ClassTemplate& tmpl, const MzAxis& axis) {
    std::vector<double> acc(axis.size(), 0.0);
    for (std::size_t p = 0; p < tmpl.centers.size(); ++p) {
        add_gaussian(acc, axis, tmpl.centers[p], tmpl.widths[p], tmpl.amplitudes[p]);
    }
    return {acc.begin(), acc.end()};
}

double baseline_at(const NoiseParams& noise, const MzAxis& axis, double mz, double height) {
    if (noise.baseline_decay <= 0) return 0.0;
    return height * std::exp(-(mz - axis.min()) / noise.baseline_decay);
}

Spectrum synthesize_spectrum(const ClassTemplate& tmpl, const MzAxis& axis, const NoiseParams& noise,
                             std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t l = axis.size();
    std::vector<double> acc(l, 0.0);

    const double shot_scale = std::exp(noise.shot_scale_sigma * rng.normal());
    const double shift = noise.mz_jitter * rng.normal();
    for (std::size_t p = 0; p < tmpl.centers.size(); ++p) {
        if (noise.peak_dropout > 0 && rng.uniform() < noise.peak_dropout) continue;
        const double amp = tmpl.amplitudes[p] * std::exp(noise.amplitude_jitter * rng.normal()) * shot_scale;
        add_gaussian(acc, axis, tmpl.centers[p] + shift, tmpl.widths[p], amp);
    }

    const std::size_t spurious = poisson(rng, noise.spurious_rate);
    const double spacing_da = (axis.max() - axis.min()) / static_cast<double>(l - 1);
    for (std::size_t i = 0; i < spurious; ++i) {
        const double center = rng.uniform(axis.min(), axis.max());
        const double width = rng.uniform(1.5, 3.0) * spacing_da;
        const double amp = noise.spurious_amplitude * std::exp(0.5 * rng.normal()) * shot_scale;
        add_gaussian(acc, axis, center, width, amp);
    }

    const double height = std::max(0.0, noise.baseline_amplitude * (1.0 + noise.baseline_jitter * rng.normal()));
    Spectrum s;
    s.label = tmpl.class_id;
    s.intensities.resize(l);
    for (std::size_t i = 0; i < l; ++i) {
        double v = acc[i] + baseline_at(noise, axis, axis.values[i], height);
        if (noise.noise_sigma > 0) v += noise.noise_sigma * rng.normal();
        s.intensities[i] = static_cast<float>(v);
    }
    return s;
}

ClassCounts desk_counts() { return {250, 250, 250, 250, 250}; }

ClassCounts paper_proportion_counts() { return {630, 1500, 1500, 1400, 1500}; }

Dataset generate_dataset(const MzAxis& axis, const std::vector<ClassTemplate>& templates, const ClassCounts& counts,
                         const NoiseParams& noise, std::uint64_t seed) {
    axis.validate();
    Dataset ds;
    ds.axis = axis;
    Rng rng(seed);
    for (int c = 0; c < kNumClasses; ++c) {
        if (counts[c] < 1) throw ConfigError("every class needs at least one spectrum");
        const auto id = static_cast<std::uint8_t>(c + 1);
        const auto it = std::find_if(templates.begin(), templates.end(),
                                     [id](const ClassTemplate& t) { return t.class_id == id; });
        if (it == templates.end()) throw ConfigError("no template for class " + std::to_string(id));
        for (std::size_t k = 0; k < counts[c]; ++k) ds.spectra.push_back(synthesize_spectrum(*it, axis, noise, rng.fork()));
    }
    rng.shuffle(ds.spectra);
    return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
    Rng rng(seed);
    std::vector<std::uint8_t> is_train(ds.spectra.size(), 0);
    for (int c = 1; c <= kNumClasses; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < ds.spectra.size(); ++i) {
            if (ds.spectra[i].label == c) members.push_back(i);
        }
        if (members.empty()) continue;
        if (members.size() < 2) {
            throw ConfigError(std::string("cannot split class ") + class_name(static_cast<std::uint8_t>(c)) +
                              " with fewer than 2 spectra");
        }
        rng.shuffle(members);
        auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
        for (std::size_t k = 0; k < n_train; ++k) is_train[members[k]] = 1;
    }
    Dataset train, test;
    train.axis = test.axis = ds.axis;
    for (std::size_t i = 0; i < ds.spectra.size(); ++i) (is_train[i] ? train : test).spectra.push_back(ds.spectra[i]);
    return {std::move(train), std::move(test)};
}

PeakVector peak_ground_truth(const ClassTemplate& tmpl, const MzAxis& axis, std::size_t width, std::size_t stride) {
    const std::size_t n = window_count(axis.size(), width, stride);
    PeakVector pv;
    pv.class_id = tmpl.class_id;
    pv.bits.assign(n, 0);
    for (double center : tmpl.centers) {
        const double x = axis.fractional_index(center);
        // Windows are half-open in sample coordinates: [stride*j, stride*j + width).
        for (std::size_t j = 0; j < n; ++j) {
            const double start = static_cast<double>(stride * j);
            if (x >= start && x < start + static_cast<double>(width)) pv.bits[j] = 1;
        }
    }
    return pv;
}

}  // namespace msdg
