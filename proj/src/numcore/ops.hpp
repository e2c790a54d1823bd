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
#include <span>
#include <vector>

#include "common/random.hpp"
#include "numcore/tensor.hpp"

namespace msdg {

// Differentiable operations. Matrix-shaped ops view a tensor as
// [rows() x cols()] where cols() is the last extent.

/// [a x k] * [k x b].
Tensor matmul(const Tensor& a, const Tensor& b);
/// [a x k] * [b x k]^T.
Tensor matmul_bt(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Real factor);
/// x + bias broadcast over rows; bias has x.cols() elements.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);
/// x is k stacked blocks of tile.rows() rows; tile is added to every block.
Tensor add_tiled(const Tensor& x, const Tensor& tile);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Real eps);

/// Same payload under a new shape with equal element count.
Tensor reshape(const Tensor& x, Shape shape);
/// out[r] = x[index[r]]; backward scatter-adds.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);
Tensor concat_rows(const Tensor& a, const Tensor& b);

/// Number of windows a length-l signal yields; throws DimensionError when
/// l < width or the stride does not tile the tail exactly.
std::size_t window_count(std::size_t length, std::size_t width, std::size_t stride);
/// Overlapping windows of a [l] or [batch x l] signal -> [batch*N x width].
Tensor unfold1d(const Tensor& signal, std::size_t width, std::size_t stride);
/// Valid 1-D convolution with h output channels: [l] or [batch x l] signal,
/// kernels [h x width], bias [h] -> [batch*N x h].
Tensor conv1d(const Tensor& signal, const Tensor& kernels, const Tensor& bias, std::size_t stride);

/// Inverted dropout; identity when rate == 0 or !training.
Tensor dropout(const Tensor& x, Real rate, bool training, Rng& rng);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Mean binary cross-entropy of probabilities against fixed targets.
Tensor binary_cross_entropy(const Tensor& probs, std::span<const Real> targets);
/// Same loss evaluated from logits (sigmoid folded in for stability).
Tensor binary_cross_entropy_with_logits(const Tensor& logits, std::span<const Real> targets);

/// Grouped multi-head scaled dot-product attention. Queries are laid out as
/// [groups*queries x h], keys and values as [groups*keys x h]; each query
/// attends only to the keys of its own group.
struct AttentionLayout {
    std::size_t groups = 1;
    std::size_t queries = 1;
    std::size_t keys = 1;
    std::size_t heads = 1;
};

/// Optional sink for attention probabilities, laid out [group][head][query][key].
struct AttentionProbs {
    AttentionLayout layout;
    std::vector<Real> values;
};

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionLayout& layout,
                 AttentionProbs* probs = nullptr);

}  // namespace msdg
