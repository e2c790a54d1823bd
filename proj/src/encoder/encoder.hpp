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
#include <string>
#include <vector>

#include "numcore/init.hpp"
#include "numcore/ops.hpp"

namespace msdg {

/// y = x W + b with W [in x out].
struct LinearWeights {
    Tensor weight;
    Tensor bias;

    static LinearWeights init(std::size_t in, std::size_t out, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out) const;
};

Tensor linear(const Tensor& x, const LinearWeights& w);

/// Multi-head attention projections; heads * d_k == h so every projection
/// is h x h.
struct AttentionWeights {
    LinearWeights query, key, value, output;

    static AttentionWeights init(std::size_t hidden, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out) const;
};

struct EncoderLayerWeights {
    Tensor norm1_gain, norm1_bias;
    AttentionWeights attention;
    Tensor norm2_gain, norm2_bias;
    LinearWeights mlp_in, mlp_out;

    static EncoderLayerWeights init(std::size_t hidden, std::size_t mlp_dim, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out) const;
};

struct EncoderStack {
    std::vector<EncoderLayerWeights> layers;

    static EncoderStack init(std::size_t depth, std::size_t hidden, std::size_t mlp_dim, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out) const;
};

/// Per-call knobs shared by every block of a forward pass.
struct BlockContext {
    std::size_t heads = 1;
    Real dropout = 0;
    bool training = false;
    Real eps = Real{1e-5};
    Rng* rng = nullptr;  // required when training with dropout > 0
};

/// Attention projections + grouped attention + output projection.
Tensor multi_head_attention(const Tensor& queries_from, const Tensor& keys_from, const AttentionWeights& w,
                            const AttentionLayout& layout, AttentionProbs* probs = nullptr);

/// Pre-norm residual block: x + Drop(MHA(LN(x))), then + Drop(MLP(LN(.))).
/// `groups` x `tokens` rows; tokens attend within their own group.
Tensor encoder_block(const Tensor& x, const EncoderLayerWeights& w, std::size_t groups, std::size_t tokens,
                     const BlockContext& ctx, AttentionProbs* probs = nullptr);

/// L stacked blocks over `batch` sequences of N patch tokens ([batch*N x h]).
Tensor encode_input(const Tensor& x, const EncoderStack& stack, std::size_t batch, const BlockContext& ctx);

/// Slice-wise dictionary encoding. `dictionary` holds the c sub-dictionary
/// embeddings as [c * per_class * N x h] (member-major, then position);
/// `tokens` holds the c learnable sequences as [c * N x h]. For every class
/// and patch position the per_class + 1 tokens at that position run through
/// the stack together; the enriched learnable token rows come back as
/// [c * N x h], class-major. `slice_probs`, when given, receives the last
/// layer's attention.
Tensor encode_subdictionaries(const Tensor& dictionary, const Tensor& tokens, std::size_t classes,
                              std::size_t per_class, std::size_t patches, const EncoderStack& stack,
                              const BlockContext& ctx, AttentionProbs* slice_probs = nullptr);

/// Single sub-dictionary form: [per_class * N x h] block plus its [N x h]
/// token -> enriched token [N x h].
Tensor encode_subdictionary(const Tensor& block, const Tensor& token, std::size_t per_class, std::size_t patches,
                            const EncoderStack& stack, const BlockContext& ctx);

/// Reorders [c * N x h] class-major token rows to position-major [N * c x h].
Tensor tokens_position_major(const Tensor& class_major, std::size_t classes, std::size_t patches);

/// Cross-attention: at each patch position the `batch` input tokens query the
/// c enriched sub-dictionary tokens at that position; residual to the input.
/// `encoded` is [batch*N x h] (sequence-major), `tokens` [N*c x h]
/// (position-major). Returns [batch*N x h].
Tensor selection_attention(const Tensor& encoded, const Tensor& tokens, const AttentionWeights& w,
                           std::size_t batch, std::size_t patches, std::size_t classes, const BlockContext& ctx,
                           AttentionProbs* probs = nullptr);

/// Head-averaged selection map for sequence b: [N x c] row-major.
std::vector<double> selection_map(const AttentionProbs& probs, std::size_t batch_index);

}  // namespace msdg
