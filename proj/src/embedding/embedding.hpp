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

#include <string>

#include "numcore/init.hpp"
#include "numcore/ops.hpp"
#include "spectra/spectra.hpp"

namespace msdg {

/// h convolution kernels of width rho plus one bias per channel.
struct ConvWeights {
    Tensor kernels;  // [h x rho]
    Tensor bias;     // [h]

    static ConvWeights init(std::size_t hidden, std::size_t width, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out) const;
};

enum class Pathway { kInput, kDictionary };

/// Input and dictionary convolutions are distinct parameters; the m/z
/// projection is shared by both pathways. The dictionary conv is left
/// undefined in models without a dictionary pathway.
struct EmbeddingWeights {
    ConvWeights input;
    ConvWeights dictionary;
    ConvWeights positional;  // W [h x rho], b [h]; M^pe = M W^T + b

    static EmbeddingWeights init(std::size_t hidden, std::size_t width, bool with_dictionary, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out) const;
};

/// Convolutional patch embedding of one spectrum [l] or a batch [B x l],
/// returning [B*N x h].
Tensor patchify_embed(const Tensor& spectra, Pathway which, const EmbeddingWeights& w, std::size_t stride);

/// Patches the m/z axis with the same window/stride and projects each patch
/// to h dimensions: [N x h].
Tensor mz_positional(const MzAxis& axis, const EmbeddingWeights& w, std::size_t stride);

/// The m/z axis, min-max scaled to [0, 1], as the positional input.
Tensor axis_tensor(const MzAxis& axis);

}  // namespace msdg
