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
#include <vector>

#include "spectra/spectra.hpp"

namespace msdg {

/// Training spectra stored as rows, grouped contiguously by class: block i
/// holds rows [i*per_class, (i+1)*per_class).
struct RawDictionary {
    std::vector<std::uint8_t> classes;
    std::size_t per_class = 0;
    std::size_t length = 0;
    std::vector<float> rows;  // [alpha x length]

    std::size_t alpha() const { return classes.size() * per_class; }
    std::size_t block_count() const { return classes.size(); }
};

/// Each block replaced by its best rank-r approximation. Same layout as the
/// raw dictionary; `singular_values` keeps every block's full spectrum
/// (min(per_class, length) values per block) for provenance.
struct DenoisedDictionary {
    std::vector<std::uint8_t> classes;
    std::size_t per_class = 0;
    std::size_t length = 0;
    std::size_t rank = 0;
    std::vector<float> rows;
    std::vector<double> singular_values;

    std::size_t alpha() const { return classes.size() * per_class; }
    std::size_t block_count() const { return classes.size(); }
};

/// Positive (non-dust) classes, in id order.
std::vector<std::uint8_t> default_dictionary_classes();

/// Seeded per-class selection of the first `per_class` members after a
/// shuffle. Dust is rejected; insufficient members raise ConfigError.
RawDictionary build_dictionary(const Dataset& train, std::size_t per_class, const std::vector<std::uint8_t>& classes,
                               std::uint64_t seed);

DenoisedDictionary denoise(const RawDictionary& raw, std::size_t rank);

/// Re-denoise an already denoised dictionary (idempotence checks).
DenoisedDictionary denoise(const DenoisedDictionary& dict, std::size_t rank);

}  // namespace msdg
