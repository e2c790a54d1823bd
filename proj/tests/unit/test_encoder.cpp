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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "encoder/encoder.hpp"

using namespace msdg;

namespace {

Tensor random(Shape shape, Rng& rng, bool grad = false) {
    std::vector<Real> v(shape_numel(shape));
    for (auto& x : v) x = static_cast<Real>(rng.normal());
    return Tensor::from(std::move(shape), std::move(v), grad);
}

BlockContext context(std::size_t heads) {
    BlockContext ctx;
    ctx.heads = heads;
    return ctx;
}

void check_rows_stochastic(const AttentionProbs& p) {
    const std::size_t rows = p.values.size() / p.layout.keys;
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0;
        for (std::size_t k = 0; k < p.layout.keys; ++k) {
            CHECK(p.values[r * p.layout.keys + k] >= 0);
            s += p.values[r * p.layout.keys + k];
        }
        CHECK(std::abs(s - 1.0) < 1e-6);
    }
}

Tensor rows_of(const Tensor& x, const std::vector<std::size_t>& index) {
    NoGradGuard guard;
    return gather_rows(x, index);
}

}  // namespace

TEST_SUITE("encoder") {

TEST_CASE("single token attends to itself") {
    Rng rng(1);
    const auto w = AttentionWeights::init(8, rng);
    const auto x = random({1, 8}, rng);
    const auto out = multi_head_attention(x, x, w, {1, 1, 1, 2});
    const auto want = linear(linear(x, w.value), w.output);
    for (std::size_t i = 0; i < 8; ++i) CHECK(out.at(i) == doctest::Approx(want.at(i)).epsilon(1e-6));
}

TEST_CASE("dropout zero makes training and eval agree") {
    Rng rng(2);
    const auto w = EncoderLayerWeights::init(8, 16, rng);
    const auto x = random({5, 8}, rng);
    auto train_ctx = context(2);
    train_ctx.training = true;
    train_ctx.dropout = 0;
    const auto a = encoder_block(x, w, 1, 5, train_ctx);
    const auto b = encoder_block(x, w, 1, 5, context(2));
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.at(i) == b.at(i));
}

TEST_CASE("dropout needs a generator") {
    Rng rng(3);
    const auto w = EncoderLayerWeights::init(8, 16, rng);
    auto ctx = context(2);
    ctx.training = true;
    ctx.dropout = 0.1f;
    CHECK_THROWS_AS(encoder_block(random({2, 8}, rng), w, 1, 2, ctx), UsageError);
}

TEST_CASE("self-attention rows are distributions") {
    Rng rng(4);
    const auto w = EncoderLayerWeights::init(16, 32, rng);
    AttentionProbs probs;
    encoder_block(random({3 * 7, 16}, rng), w, 3, 7, context(4), &probs);
    CHECK(probs.values.size() == 3 * 4 * 7 * 7);
    check_rows_stochastic(probs);
}

TEST_CASE("heads must divide the width") {
    Rng rng(5);
    const auto w = EncoderLayerWeights::init(10, 16, rng);
    CHECK_THROWS_AS(encoder_block(random({2, 10}, rng), w, 1, 2, context(4)), ConfigError);
}

TEST_CASE("zero layers is the identity") {
    Rng rng(6);
    const auto x = random({12, 8}, rng);
    const auto y = encode_input(x, EncoderStack{}, 2, context(2));
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.at(i) == x.at(i));
}

TEST_CASE("encoder keeps the shape for any length") {
    Rng rng(7);
    const auto stack = EncoderStack::init(2, 8, 16, rng);
    for (std::size_t n : {1u, 3u, 17u}) CHECK(encode_input(random({2 * n, 8}, rng), stack, 2, context(2)).shape() == Shape{2 * n, 8});
}

TEST_CASE("self-attention is permutation equivariant") {
    Rng rng(8);
    const auto stack = EncoderStack::init(2, 8, 16, rng);
    const std::size_t n = 9;
    const auto x = random({n, 8}, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    const auto y = encode_input(x, stack, 1, context(2));
    const auto yp = encode_input(rows_of(x, perm), stack, 1, context(2));
    const auto py = rows_of(y, perm);
    for (std::size_t i = 0; i < py.numel(); ++i) CHECK(yp.at(i) == doctest::Approx(py.at(i)).epsilon(1e-5));
}

TEST_CASE("sub-dictionary with no members transforms the token alone") {
    Rng rng(9);
    const auto stack = EncoderStack::init(1, 8, 16, rng);
    const auto token = random({4, 8}, rng);
    const auto out = encode_subdictionary(Tensor::zeros({0, 8}), token, 0, 4, stack, context(2));
    CHECK(out.shape() == Shape{4, 8});
    const auto alone = encoder_block(token, stack.layers[0], 4, 1, context(2));
    for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out.at(i) == doctest::Approx(alone.at(i)).epsilon(1e-6));
}

TEST_CASE("sub-dictionary output shape") {
    Rng rng(10);
    const auto stack = EncoderStack::init(2, 8, 16, rng);
    for (std::size_t members : {1u, 2u, 5u}) {
        const auto out = encode_subdictionary(random({members * 6, 8}, rng), random({6, 8}, rng), members, 6, stack,
                                              context(2));
        CHECK(out.shape() == Shape{6, 8});
    }
    CHECK_THROWS_AS(encode_subdictionary(random({5, 8}, rng), random({6, 8}, rng), 1, 6, stack, context(2)),
                    ConfigError);
}

TEST_CASE("identical dictionary patches give identical enriched tokens") {
    Rng rng(11);
    const auto stack = EncoderStack::init(2, 8, 16, rng);
    const std::size_t members = 3, n = 5;
    const auto row = random({1, 8}, rng);
    std::vector<std::size_t> same(members * n, 0);
    const auto block = rows_of(row, same);
    const auto out = encode_subdictionary(block, Tensor::zeros({n, 8}), members, n, stack, context(2));
    for (std::size_t j = 1; j < n; ++j)
        for (std::size_t c = 0; c < 8; ++c) CHECK(out.at(j * 8 + c) == out.at(c));
}

TEST_CASE("slice attention mixes only within a position") {
    Rng rng(12);
    const auto stack = EncoderStack::init(1, 8, 16, rng);
    const std::size_t members = 2, n = 4;
    auto block = random({members * n, 8}, rng);
    const auto token = random({n, 8}, rng);
    const auto before = encode_subdictionary(block, token, members, n, stack, context(2));
    // Change member 1 at position 2 only (member-major, then position).
    for (std::size_t c = 0; c < 8; ++c) block.mutable_data()[(1 * n + 2) * 8 + c] += 1;
    const auto after = encode_subdictionary(block, token, members, n, stack, context(2));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t c = 0; c < 8; ++c) {
            if (j == 2) continue;
            CHECK(after.at(j * 8 + c) == before.at(j * 8 + c));
        }
    bool moved = false;
    for (std::size_t c = 0; c < 8; ++c) moved |= after.at(2 * 8 + c) != before.at(2 * 8 + c);
    CHECK(moved);
}

TEST_CASE("batched sub-dictionaries share one stack") {
    Rng rng(13);
    const auto stack = EncoderStack::init(2, 8, 16, rng);
    const std::size_t classes = 3, members = 2, n = 4;
    const auto dict = random({classes * members * n, 8}, rng);
    const auto tokens = random({classes * n, 8}, rng);
    AttentionProbs slice;
    const auto all = encode_subdictionaries(dict, tokens, classes, members, n, stack, context(2), &slice);
    check_rows_stochastic(slice);
    CHECK(slice.layout.groups == classes * n);
    CHECK(slice.layout.keys == members + 1);
    for (std::size_t i = 0; i < classes; ++i) {
        std::vector<std::size_t> drows(members * n), trows(n);
        std::iota(drows.begin(), drows.end(), i * members * n);
        std::iota(trows.begin(), trows.end(), i * n);
        const auto one = encode_subdictionary(rows_of(dict, drows), rows_of(tokens, trows), members, n, stack,
                                              context(2));
        for (std::size_t k = 0; k < one.numel(); ++k)
            CHECK(all.at(i * n * 8 + k) == doctest::Approx(one.at(k)).epsilon(1e-6));
    }
}

TEST_CASE("gradients stay within their own sub-dictionary") {
    Rng rng(14);
    const auto stack = EncoderStack::init(1, 8, 16, rng);
    const std::size_t classes = 3, members = 2, n = 4;
    auto tokens = random({classes * n, 8}, rng, true);
    const auto dict = random({classes * members * n, 8}, rng);
    const auto out = encode_subdictionaries(dict, tokens, classes, members, n, stack, context(2));
    std::vector<std::size_t> first(n);
    std::iota(first.begin(), first.end(), 0);
    backward(sum(gather_rows(out, first)));
    for (std::size_t r = n; r < classes * n; ++r)
        for (std::size_t c = 0; c < 8; ++c) CHECK(tokens.grad()[r * 8 + c] == 0);
    double own = 0;
    for (std::size_t r = 0; r < n * 8; ++r) own += std::abs(tokens.grad()[r]);
    CHECK(own > 0);
}

TEST_CASE("position-major reorder") {
    const auto t = Tensor::from({6, 1}, {0, 1, 2, 10, 11, 12});  // 2 classes x 3 positions
    const auto p = tokens_position_major(t, 2, 3);
    const std::vector<Real> want{0, 10, 1, 11, 2, 12};
    for (std::size_t i = 0; i < 6; ++i) CHECK(p.at(i) == want[i]);
}

TEST_CASE("selection with one sub-dictionary") {
    Rng rng(15);
    const auto w = AttentionWeights::init(8, rng);
    AttentionProbs probs;
    selection_attention(random({2 * 5, 8}, rng), random({5, 8}, rng), w, 2, 5, 1, context(2), &probs);
    for (auto p : probs.values) CHECK(p == 1);
}

TEST_CASE("selection residual") {
    Rng rng(16);
    auto w = AttentionWeights::init(8, rng);
    const auto encoded = random({3 * 4, 8}, rng);
    const auto tokens = random({4 * 2, 8}, rng);
    const auto with = selection_attention(encoded, tokens, w, 3, 4, 2, context(2));
    bool differs = false;
    for (std::size_t i = 0; i < with.numel(); ++i) differs |= with.at(i) != encoded.at(i);
    CHECK(differs);
    w.output.weight = Tensor::zeros({8, 8});
    const auto without = selection_attention(encoded, tokens, w, 3, 4, 2, context(2));
    for (std::size_t i = 0; i < without.numel(); ++i) CHECK(without.at(i) == encoded.at(i));
}

TEST_CASE("selection rows and head-averaged map") {
    Rng rng(17);
    const auto w = AttentionWeights::init(8, rng);
    const std::size_t batch = 2, n = 6, classes = 4;
    AttentionProbs probs;
    selection_attention(random({batch * n, 8}, rng), random({n * classes, 8}, rng), w, batch, n, classes, context(2),
                        &probs);
    check_rows_stochastic(probs);
    for (std::size_t b = 0; b < batch; ++b) {
        const auto map = selection_map(probs, b);
        REQUIRE(map.size() == n * classes);
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0;
            for (std::size_t i = 0; i < classes; ++i) s += map[j * classes + i];
            CHECK(std::abs(s - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("selection sequences are independent") {
    Rng rng(18);
    const auto w = AttentionWeights::init(8, rng);
    const std::size_t n = 3, classes = 2;
    const auto tokens = random({n * classes, 8}, rng);
    const auto a = random({n, 8}, rng);
    const auto b = random({n, 8}, rng);
    const auto both = selection_attention(concat_rows(a, b), tokens, w, 2, n, classes, context(2));
    const auto only_b = selection_attention(b, tokens, w, 1, n, classes, context(2));
    for (std::size_t i = 0; i < only_b.numel(); ++i)
        CHECK(both.at(n * 8 + i) == doctest::Approx(only_b.at(i)).epsilon(1e-6));
}

}  // TEST_SUITE
