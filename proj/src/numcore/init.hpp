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
#include <utility>
#include <vector>

#include "common/random.hpp"
#include "numcore/tensor.hpp"

namespace msdg {

/// Ordered (name, tensor) list; order defines checkpoint and optimizer layout.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline Tensor uniform_parameter(Shape shape, double bound, Rng& rng) {
    std::vector<Real> values(shape_numel(shape));
    for (auto& v : values) v = static_cast<Real>(rng.uniform(-bound, bound));
    return Tensor::from(std::move(shape), std::move(values), true);
}

inline Tensor normal_parameter(Shape shape, double stddev, Rng& rng) {
    std::vector<Real> values(shape_numel(shape));
    for (auto& v : values) v = static_cast<Real>(stddev * rng.normal());
    return Tensor::from(std::move(shape), std::move(values), true);
}

inline Tensor constant_parameter(Shape shape, Real value) { return Tensor::full(std::move(shape), value, true); }

}  // namespace msdg
