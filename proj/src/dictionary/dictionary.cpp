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

#include "dictionary/dictionary.hpp"

#include <algorithm>
#include <set>

#include "common/errors.hpp"
#include "common/random.hpp"
#include "numcore/svd.hpp"

namespace msdg {

std::vector<std::uint8_t> default_dictionary_classes() { return {2, 3, 4, 5}; }

RawDictionary build_dictionary(const Dataset& train, std::size_t per_class, const std::vector<std::uint8_t>& classes,
                               std::uint64_t seed) {
    if (per_class == 0) throw ConfigError("dictionary needs at least one spectrum per class");
    if (classes.empty()) throw ConfigError("dictionary needs at least one class");
    std::set<std::uint8_t> seen;
    for (auto c : classes) {
        if (c == kDustClass) throw ConfigError("the peakless dust class cannot form a sub-dictionary");
        if (c < 1 || c > kNumClasses) throw ConfigError("dictionary class id " + std::to_string(c) + " outside 1..5");
        if (!seen.insert(c).second) throw ConfigError("dictionary class " + std::to_string(c) + " listed twice");
    }

    RawDictionary raw;
    raw.classes = classes;
    raw.per_class = per_class;
    raw.length = train.axis.size();
    raw.rows.reserve(raw.alpha() * raw.length);
    Rng rng(seed);
    for (auto c : classes) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < train.spectra.size(); ++i) {
            if (train.spectra[i].label == c) members.push_back(i);
        }
        if (members.size() < per_class) {
            throw ConfigError(std::string("class ") + class_name(c) + " has " + std::to_string(members.size()) +
                              " training spectra, dictionary needs " + std::to_string(per_class));
        }
        rng.shuffle(members);
        for (std::size_t k = 0; k < per_class; ++k) {
            const auto& s = train.spectra[members[k]].intensities;
            raw.rows.insert(raw.rows.end(), s.begin(), s.end());
        }
    }
    return raw;
}

namespace {

DenoisedDictionary denoise_blocks(const std::vector<std::uint8_t>& classes, std::size_t per_class, std::size_t length,
                                  const std::vector<float>& rows, std::size_t rank) {
    if (rank < 1 || rank > std::min(per_class, length)) {
        throw ConfigError("denoising rank " + std::to_string(rank) + " must lie in [1, " +
                          std::to_string(std::min(per_class, length)) + "]");
    }
    DenoisedDictionary out;
    out.classes = classes;
    out.per_class = per_class;
    out.length = length;
    out.rank = rank;
    out.rows.resize(rows.size());
    const auto pc = static_cast<Eigen::Index>(per_class), len = static_cast<Eigen::Index>(length);
    for (std::size_t b = 0; b < classes.size(); ++b) {
        Eigen::MatrixXd block(pc, len);
        const float* src = rows.data() + b * per_class * length;
        for (Eigen::Index i = 0; i < pc; ++i) {
            for (Eigen::Index j = 0; j < len; ++j) block(i, j) = src[i * len + j];
        }
        SvdResultF64 svd;
        try {
            svd = thin_svd(block);
        } catch (const NumericError& e) {
            throw NumericError("denoising sub-dictionary " + std::to_string(b) + " (class " +
                               std::to_string(classes[b]) + "): " + e.what());
        }
        const Eigen::MatrixXd approx = low_rank_approximation(svd, static_cast<Eigen::Index>(rank));
        float* dst = out.rows.data() + b * per_class * length;
        for (Eigen::Index i = 0; i < pc; ++i) {
            for (Eigen::Index j = 0; j < len; ++j) dst[i * len + j] = static_cast<float>(approx(i, j));
        }
        for (Eigen::Index i = 0; i < svd.s.size(); ++i) out.singular_values.push_back(svd.s(i));
    }
    return out;
}

}  // namespace

DenoisedDictionary denoise(const RawDictionary& raw, std::size_t rank) {
    if (raw.rows.size() != raw.alpha() * raw.length) throw ConfigError("raw dictionary payload size mismatch");
    return denoise_blocks(raw.classes, raw.per_class, raw.length, raw.rows, rank);
}

DenoisedDictionary denoise(const DenoisedDictionary& dict, std::size_t rank) {
    return denoise_blocks(dict.classes, dict.per_class, dict.length, dict.rows, rank);
}

}  // namespace msdg
