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

#include "embedding/embedding.hpp"

#include <cmath>

namespace msdg {

ConvWeights ConvWeights::init(std::size_t hidden, std::size_t width, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(width));
    return {uniform_parameter({hidden, width}, bound, rng), constant_parameter({hidden}, 0)};
}

void ConvWeights::collect(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".kernels", kernels);
    out.emplace_back(prefix + ".bias", bias);
}

EmbeddingWeights EmbeddingWeights::init(std::size_t hidden, std::size_t width, bool with_dictionary, Rng& rng) {
    EmbeddingWeights w;
    w.input = ConvWeights::init(hidden, width, rng);
    if (with_dictionary) w.dictionary = ConvWeights::init(hidden, width, rng);
    w.positional = ConvWeights::init(hidden, width, rng);
    return w;
}

void EmbeddingWeights::collect(const std::string& prefix, NamedTensors& out) const {
    input.collect(prefix + ".input", out);
    if (dictionary.kernels.defined()) dictionary.collect(prefix + ".dictionary", out);
    positional.collect(prefix + ".positional", out);
}

Tensor patchify_embed(const Tensor& spectra, Pathway which, const EmbeddingWeights& w, std::size_t stride) {
    const ConvWeights& conv = which == Pathway::kInput ? w.input : w.dictionary;
    if (!conv.kernels.defined()) throw ConfigError("model has no dictionary embedding");
    return conv1d(spectra, conv.kernels, conv.bias, stride);
}

Tensor axis_tensor(const MzAxis& axis) {
    // Min-max scaled to [0, 1]; an affine change the projection can absorb,
    // but it keeps the initial positional term on the scale of the spectra.
    const double lo = axis.min(), span = axis.max() - axis.min();
    std::vector<Real> values(axis.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = static_cast<Real>((static_cast<double>(axis.values[i]) - lo) / span);
    }
    return Tensor::from({axis.size()}, std::move(values));
}

Tensor mz_positional(const MzAxis& axis, const EmbeddingWeights& w, std::size_t stride) {
    // Same windowing as the spectra, so the affine map M W^T + b is a conv.
    return conv1d(axis_tensor(axis), w.positional.kernels, w.positional.bias, stride);
}

}  // namespace msdg
