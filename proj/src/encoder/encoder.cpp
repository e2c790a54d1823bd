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

#include "encoder/encoder.hpp"

#include <cmath>

namespace msdg {

LinearWeights LinearWeights::init(std::size_t in, std::size_t out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    return {uniform_parameter({in, out}, bound, rng), constant_parameter({out}, 0)};
}

void LinearWeights::collect(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
}

Tensor linear(const Tensor& x, const LinearWeights& w) { return add_row_bias(matmul(x, w.weight), w.bias); }

AttentionWeights AttentionWeights::init(std::size_t hidden, Rng& rng) {
    AttentionWeights w;
    w.query = LinearWeights::init(hidden, hidden, rng);
    w.key = LinearWeights::init(hidden, hidden, rng);
    w.value = LinearWeights::init(hidden, hidden, rng);
    w.output = LinearWeights::init(hidden, hidden, rng);
    return w;
}

void AttentionWeights::collect(const std::string& prefix, NamedTensors& out) const {
    query.collect(prefix + ".query", out);
    key.collect(prefix + ".key", out);
    value.collect(prefix + ".value", out);
    output.collect(prefix + ".output", out);
}

EncoderLayerWeights EncoderLayerWeights::init(std::size_t hidden, std::size_t mlp_dim, Rng& rng) {
    EncoderLayerWeights w;
    w.norm1_gain = constant_parameter({hidden}, 1);
    w.norm1_bias = constant_parameter({hidden}, 0);
    w.attention = AttentionWeights::init(hidden, rng);
    w.norm2_gain = constant_parameter({hidden}, 1);
    w.norm2_bias = constant_parameter({hidden}, 0);
    w.mlp_in = LinearWeights::init(hidden, mlp_dim, rng);
    w.mlp_out = LinearWeights::init(mlp_dim, hidden, rng);
    return w;
}

void EncoderLayerWeights::collect(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".norm1.gain", norm1_gain);
    out.emplace_back(prefix + ".norm1.bias", norm1_bias);
    attention.collect(prefix + ".attention", out);
    out.emplace_back(prefix + ".norm2.gain", norm2_gain);
    out.emplace_back(prefix + ".norm2.bias", norm2_bias);
    mlp_in.collect(prefix + ".mlp_in", out);
    mlp_out.collect(prefix + ".mlp_out", out);
}

EncoderStack EncoderStack::init(std::size_t depth, std::size_t hidden, std::size_t mlp_dim, Rng& rng) {
    EncoderStack s;
    for (std::size_t i = 0; i < depth; ++i) s.layers.push_back(EncoderLayerWeights::init(hidden, mlp_dim, rng));
    return s;
}

void EncoderStack::collect(const std::string& prefix, NamedTensors& out) const {
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + "." + std::to_string(i), out);
}

namespace {

Tensor maybe_dropout(const Tensor& x, const BlockContext& ctx) {
    if (!ctx.training || ctx.dropout <= 0) return x;
    if (!ctx.rng) throw UsageError("training with dropout requires a random generator");
    return dropout(x, ctx.dropout, true, *ctx.rng);
}

}  // namespace

Tensor multi_head_attention(const Tensor& queries_from, const Tensor& keys_from, const AttentionWeights& w,
                            const AttentionLayout& layout, AttentionProbs* probs) {
    const Tensor q = linear(queries_from, w.query);
    const Tensor k = linear(keys_from, w.key);
    const Tensor v = linear(keys_from, w.value);
    return linear(attention(q, k, v, layout, probs), w.output);
}

Tensor encoder_block(const Tensor& x, const EncoderLayerWeights& w, std::size_t groups, std::size_t tokens,
                     const BlockContext& ctx, AttentionProbs* probs) {
    if (tokens == 0) throw DimensionError("encoder_block: sequences must have at least one token");
    const AttentionLayout layout{groups, tokens, tokens, ctx.heads};
    const Tensor normed = layer_norm(x, w.norm1_gain, w.norm1_bias, ctx.eps);
    const Tensor attended = multi_head_attention(normed, normed, w.attention, layout, probs);
    const Tensor mid = add(x, maybe_dropout(attended, ctx));
    const Tensor normed2 = layer_norm(mid, w.norm2_gain, w.norm2_bias, ctx.eps);
    const Tensor mlp = linear(relu(linear(normed2, w.mlp_in)), w.mlp_out);
    return add(mid, maybe_dropout(mlp, ctx));
}

Tensor encode_input(const Tensor& x, const EncoderStack& stack, std::size_t batch, const BlockContext& ctx) {
    if (batch == 0 || x.rows() % batch != 0) throw DimensionError("encode_input: rows do not split into the batch");
    const std::size_t n = x.rows() / batch;
    Tensor out = x;
    for (const auto& layer : stack.layers) out = encoder_block(out, layer, batch, n, ctx);
    return out;
}

Tensor encode_subdictionaries(const Tensor& dictionary, const Tensor& tokens, std::size_t classes,
                              std::size_t per_class, std::size_t patches, const EncoderStack& stack,
                              const BlockContext& ctx, AttentionProbs* slice_probs) {
    const std::size_t h = tokens.cols();
    if (tokens.rows() != classes * patches) {
        throw ConfigError("learnable tokens have " + std::to_string(tokens.rows()) + " rows, expected " +
                          std::to_string(classes * patches));
    }
    if (dictionary.rows() != classes * per_class * patches || (dictionary.rows() > 0 && dictionary.cols() != h)) {
        throw ConfigError("dictionary embeddings have shape " + shape_string(dictionary.shape()) + ", expected [" +
                          std::to_string(classes * per_class * patches) + "x" + std::to_string(h) + "]");
    }
    const std::size_t seq = per_class + 1;
    const std::size_t token_base = classes * per_class * patches;
    // Row order of the stacked input: (class, position, member), with the
    // learnable token as the last member of each slice.
    std::vector<std::size_t> slice_index(classes * patches * seq);
    for (std::size_t i = 0; i < classes; ++i) {
        for (std::size_t j = 0; j < patches; ++j) {
            const std::size_t base = (i * patches + j) * seq;
            for (std::size_t t = 0; t < per_class; ++t) slice_index[base + t] = (i * per_class + t) * patches + j;
            slice_index[base + per_class] = token_base + i * patches + j;
        }
    }
    const Tensor stacked = dictionary.rows() > 0 ? concat_rows(dictionary, tokens) : tokens;
    Tensor x = gather_rows(stacked, slice_index);
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        AttentionProbs* sink = (slice_probs && l + 1 == stack.layers.size()) ? slice_probs : nullptr;
        x = encoder_block(x, stack.layers[l], classes * patches, seq, ctx, sink);
    }
    std::vector<std::size_t> token_rows(classes * patches);
    for (std::size_t r = 0; r < token_rows.size(); ++r) token_rows[r] = r * seq + per_class;
    return gather_rows(x, token_rows);
}

Tensor encode_subdictionary(const Tensor& block, const Tensor& token, std::size_t per_class, std::size_t patches,
                            const EncoderStack& stack, const BlockContext& ctx) {
    return encode_subdictionaries(block, token, 1, per_class, patches, stack, ctx);
}

Tensor tokens_position_major(const Tensor& class_major, std::size_t classes, std::size_t patches) {
    std::vector<std::size_t> index(classes * patches);
    for (std::size_t j = 0; j < patches; ++j) {
        for (std::size_t i = 0; i < classes; ++i) index[j * classes + i] = i * patches + j;
    }
    return gather_rows(class_major, index);
}

Tensor selection_attention(const Tensor& encoded, const Tensor& tokens, const AttentionWeights& w,
                           std::size_t batch, std::size_t patches, std::size_t classes, const BlockContext& ctx,
                           AttentionProbs* probs) {
    if (classes == 0) throw ConfigError("selection attention needs at least one sub-dictionary");
    if (encoded.rows() != batch * patches) throw DimensionError("selection_attention: encoded rows mismatch");
    if (tokens.rows() != patches * classes) throw DimensionError("selection_attention: token rows mismatch");
    // Queries regrouped by position so each group is one patch position.
    std::vector<std::size_t> to_position(batch * patches), to_sequence(batch * patches);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < patches; ++j) {
            to_position[j * batch + b] = b * patches + j;
            to_sequence[b * patches + j] = j * batch + b;
        }
    }
    const Tensor queries = gather_rows(encoded, to_position);
    const AttentionLayout layout{patches, batch, classes, ctx.heads};
    const Tensor q = linear(queries, w.query);
    const Tensor k = linear(tokens, w.key);
    const Tensor v = linear(tokens, w.value);
    const Tensor mixed = gather_rows(attention(q, k, v, layout, probs), to_sequence);
    return add(encoded, maybe_dropout(linear(mixed, w.output), ctx));
}

std::vector<double> selection_map(const AttentionProbs& probs, std::size_t batch_index) {
    const auto& L = probs.layout;
    std::vector<double> out(L.groups * L.keys, 0.0);
    for (std::size_t j = 0; j < L.groups; ++j) {
        for (std::size_t hd = 0; hd < L.heads; ++hd) {
            const Real* row = probs.values.data() + ((j * L.heads + hd) * L.queries + batch_index) * L.keys;
            for (std::size_t i = 0; i < L.keys; ++i) out[j * L.keys + i] += row[i] / static_cast<double>(L.heads);
        }
    }
    return out;
}

}  // namespace msdg
