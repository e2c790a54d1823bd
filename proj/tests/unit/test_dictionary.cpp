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

#include <Eigen/SVD>
#include <map>

#include "dictionary/dictionary.hpp"
#include "doctest.h"
#include "model/config.hpp"
#include "support/fixtures.hpp"

using namespace msdg;

namespace {

Eigen::MatrixXd block(const std::vector<float>& rows, std::size_t index, std::size_t per_class, std::size_t length) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(per_class), static_cast<Eigen::Index>(length));
    for (std::size_t r = 0; r < per_class; ++r)
        for (std::size_t j = 0; j < length; ++j) m(r, j) = rows[(index * per_class + r) * length + j];
    return m;
}

RawDictionary random_raw(Rng& rng, std::size_t classes, std::size_t per_class, std::size_t length) {
    RawDictionary raw;
    for (std::size_t c = 0; c < classes; ++c) raw.classes.push_back(static_cast<std::uint8_t>(c + 2));
    raw.per_class = per_class;
    raw.length = length;
    raw.rows.resize(classes * per_class * length);
    for (auto& v : raw.rows) v = static_cast<float>(rng.normal());
    return raw;
}

const GeneratedData& desk_like() {
    static const GeneratedData g = [] {
        auto cfg = DataConfig::from_preset("desk");
        cfg.counts = {20, 20, 20, 20, 20};
        return generate(cfg, 7);
    }();
    return g;
}

}  // namespace

TEST_SUITE("dictionary") {

TEST_CASE("dictionary sizes") {
    const auto& ds = desk_like().dataset;
    const auto desk = build_dictionary(ds, 2, default_dictionary_classes(), 1);
    CHECK(desk.alpha() == 8);
    CHECK(desk.rows.size() == 8 * 4000);
    const auto paper = build_dictionary(ds, 8, default_dictionary_classes(), 1);
    CHECK(paper.alpha() == 32);
    CHECK(paper.block_count() == 4);
    CHECK(default_dictionary_classes() == std::vector<std::uint8_t>{2, 3, 4, 5});
    CHECK(ModelConfig::paper().alpha == 32);
}

TEST_CASE("dictionary members come from their class") {
    const auto& ds = desk_like().dataset;
    std::map<std::vector<float>, std::uint8_t> label_of;
    for (const auto& s : ds.spectra) label_of[s.intensities] = s.label;
    const auto raw = build_dictionary(ds, 3, {2, 3, 4, 5}, 5);
    for (std::size_t b = 0; b < 4; ++b)
        for (std::size_t r = 0; r < 3; ++r) {
            const auto first = raw.rows.begin() + static_cast<std::ptrdiff_t>((b * 3 + r) * raw.length);
            const std::vector<float> row(first, first + static_cast<std::ptrdiff_t>(raw.length));
            REQUIRE(label_of.count(row));
            CHECK(label_of[row] == raw.classes[b]);
        }
}

TEST_CASE("dictionary selection is seeded") {
    const auto& ds = desk_like().dataset;
    CHECK(build_dictionary(ds, 2, {2, 3, 4, 5}, 3).rows == build_dictionary(ds, 2, {2, 3, 4, 5}, 3).rows);
    CHECK(build_dictionary(ds, 2, {2, 3, 4, 5}, 3).rows != build_dictionary(ds, 2, {2, 3, 4, 5}, 4).rows);
}

TEST_CASE("dictionary errors") {
    const auto& ds = desk_like().dataset;
    CHECK_THROWS_AS(build_dictionary(ds, 2, {1, 2}, 1), ConfigError);
    CHECK_THROWS_AS(build_dictionary(ds, 21, {2, 3}, 1), ConfigError);
    CHECK_THROWS_AS(build_dictionary(ds, 0, {2, 3}, 1), ConfigError);
}

TEST_CASE("rank-one block is kept") {
    RawDictionary raw;
    raw.classes = {2};
    raw.per_class = 3;
    raw.length = 5;
    const float u[3] = {1, -2, 0.5f};
    const float v[5] = {0.25f, 1, 2, -1, 4};
    for (float a : u)
        for (float b : v) raw.rows.push_back(a * b);
    const auto d = denoise(raw, 1);
    for (std::size_t i = 0; i < raw.rows.size(); ++i) CHECK(d.rows[i] == doctest::Approx(raw.rows[i]).epsilon(1e-6));
}

TEST_CASE("full rank is the identity") {
    Rng rng(2);
    const auto raw = random_raw(rng, 3, 4, 30);
    const auto d = denoise(raw, 4);
    for (std::size_t i = 0; i < raw.rows.size(); ++i)
        CHECK(d.rows[i] == doctest::Approx(raw.rows[i]).epsilon(1e-5).scale(1));
}

TEST_CASE("residual equals tail energy") {
    const auto& ds = desk_like().dataset;
    const auto raw = build_dictionary(ds, 8, {2, 3, 4, 5}, 2);
    const auto d = denoise(raw, 2);
    REQUIRE(d.singular_values.size() == 4 * 8);
    for (std::size_t b = 0; b < 4; ++b) {
        const auto m = block(raw.rows, b, 8, raw.length);
        Eigen::BDCSVD<Eigen::MatrixXd> oracle(m);
        const auto s = oracle.singularValues();
        const double tail = s.tail(s.size() - 2).squaredNorm();
        const double resid = (m - block(d.rows, b, 8, raw.length)).squaredNorm();
        CHECK(std::abs(resid - tail) <= 1e-6 * tail);
        for (Eigen::Index i = 0; i < s.size(); ++i)
            CHECK(d.singular_values[b * 8 + i] == doctest::Approx(s(i)).epsilon(1e-9));
    }
}

TEST_CASE("denoised blocks have numerical rank r") {
    Rng rng(3);
    const auto d = denoise(random_raw(rng, 4, 6, 50), 2);
    for (std::size_t b = 0; b < 4; ++b) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(block(d.rows, b, 6, 50));
        const auto s = svd.singularValues();
        CHECK(s(2) < 1e-4 * s(0));
    }
}

TEST_CASE("no random rank-r matrix beats the truncation") {
    Rng rng(4);
    const auto raw = random_raw(rng, 1, 6, 20);
    const auto d = denoise(raw, 2);
    const auto m = block(raw.rows, 0, 6, 20);
    const double best = (m - block(d.rows, 0, 6, 20)).squaredNorm();
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::MatrixXd a(6, 2), b(2, 20);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
        for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
        // Least-squares fit of b given a gives each trial its best shot.
        const Eigen::MatrixXd fit = a * (a.colPivHouseholderQr().solve(m));
        CHECK((m - fit).squaredNorm() >= best * (1 - 1e-9));
        CHECK((m - a * b).squaredNorm() >= best);
    }
}

TEST_CASE("denoise is idempotent and keeps block order") {
    Rng rng(5);
    const auto raw = random_raw(rng, 4, 5, 40);
    const auto once = denoise(raw, 2);
    const auto twice = denoise(once, 2);
    CHECK(once.classes == raw.classes);
    CHECK(twice.classes == raw.classes);
    CHECK(once.per_class == 5);
    CHECK(once.rank == 2);
    for (std::size_t i = 0; i < once.rows.size(); ++i) CHECK(std::abs(once.rows[i] - twice.rows[i]) < 1e-5);
    // Each block stays closest to its own raw block.
    for (std::size_t b = 0; b < 4; ++b) {
        const auto own = (block(raw.rows, b, 5, 40) - block(once.rows, b, 5, 40)).norm();
        for (std::size_t o = 0; o < 4; ++o)
            if (o != b) CHECK(own < (block(raw.rows, o, 5, 40) - block(once.rows, b, 5, 40)).norm());
    }
}

TEST_CASE("rank bounds") {
    Rng rng(6);
    const auto raw = random_raw(rng, 2, 3, 10);
    CHECK_THROWS_AS(denoise(raw, 0), ConfigError);
    CHECK_THROWS_AS(denoise(raw, 4), ConfigError);
}

}  // TEST_SUITE
