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

#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "support/fixtures.hpp"
#include "training/training.hpp"

using namespace msdg;

namespace {

std::vector<std::vector<Real>> snapshot(const Model& m) {
    std::vector<std::vector<Real>> out;
    for (const auto& [name, t] : m.parameters()) out.emplace_back(t.data().begin(), t.data().end());
    return out;
}

TrainConfig quick(std::size_t epochs) {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = 4;
    tc.learning_rate = 1e-3;
    tc.dropout = 0;
    tc.seed = 5;
    return tc;
}

double entropy(double t) { return -(t * std::log(t) + (1 - t) * std::log(1 - t)); }

}  // namespace

TEST_SUITE("training") {

TEST_CASE("loss examples") {
    const PeakVector y{2, {1, 0, 1, 1, 0}};
    const auto half = Tensor::from({5}, std::vector<Real>(5, 0.5f));
    CHECK(bce_smoothed(half, y).item() == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    const auto opt = Tensor::from({5}, {0.9f, 0.1f, 0.9f, 0.9f, 0.1f});
    CHECK(bce_smoothed(opt, y).item() == doctest::Approx(0.3250830).epsilon(1e-5));
    CHECK(smoothed_entropy_floor(0.9, 0.1) == doctest::Approx(entropy(0.9)).epsilon(1e-12));
    CHECK(smoothed_entropy_floor(0.9, 0.1) == doctest::Approx(0.3250830).epsilon(1e-6));
    CHECK(smoothed_targets(y, 0.9, 0.1) == std::vector<Real>{0.9f, 0.1f, 0.9f, 0.9f, 0.1f});
    const PeakVector short_y{2, {1, 0}};
    CHECK_THROWS(bce_smoothed(half, short_y));
}

TEST_CASE("smoothed loss is minimized at the target") {
    const PeakVector y{2, {1}};
    double best = 1e9, arg = 0;
    for (int i = 1; i < 1000; ++i) {
        const double p = i / 1000.0;
        const double loss = bce_smoothed(Tensor::from({1}, {static_cast<Real>(p)}), y).item();
        if (loss < best) best = loss, arg = p;
        CHECK(loss >= smoothed_entropy_floor(0.9, 0.1) - 1e-6);
    }
    CHECK(arg == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("learning rate schedule") {
    TrainConfig tc;
    tc.learning_rate = 2e-3;
    tc.warmup_fraction = 0.1;
    const std::size_t total = 1000, warm = 100;
    CHECK(lr_at(0, total, tc) == 0);
    CHECK(lr_at(warm, total, tc) == doctest::Approx(2e-3).epsilon(1e-12));
    CHECK(lr_at(total, total, tc) == doctest::Approx(0).scale(1));
    CHECK(lr_at(warm + (total - warm) / 2, total, tc) == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(lr_at(50, total, tc) == doctest::Approx(1e-3).epsilon(1e-12));
    // Continuity at the junction and monotone decay after it.
    CHECK(std::abs(lr_at(warm - 1, total, tc) - lr_at(warm, total, tc)) <= 2e-3 / warm + 1e-12);
    CHECK(std::abs(lr_at(warm + 1, total, tc) - lr_at(warm, total, tc)) <= 2e-3 / warm);
    for (std::size_t s = warm; s < total; ++s) CHECK(lr_at(s + 1, total, tc) <= lr_at(s, total, tc));
    // Warmup uses the ceiling of the fraction.
    CHECK(lr_at(1, 11, tc) == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(lr_at(2, 11, tc) == doctest::Approx(2e-3).epsilon(1e-12));
}

TEST_CASE("train config parsing") {
    auto kv = KeyValueConfig::parse("epochs=3\nbatch_size=2\nlearning_rate=0.01\nseed=9\n");
    const auto tc = TrainConfig::from_keyvalue(kv);
    CHECK(tc.epochs == 3);
    CHECK(tc.batch_size == 2);
    CHECK(tc.learning_rate == 0.01);
    CHECK(tc.seed == 9);
    CHECK(tc.warmup_fraction == 0.10);
    auto unknown = KeyValueConfig::parse("epochs=3\nmomentum=0.9\n");
    CHECK_THROWS_AS(TrainConfig::from_keyvalue(unknown), ConfigError);
    auto bad_warmup = KeyValueConfig::parse("warmup_fraction=1\n");
    CHECK_THROWS_AS(TrainConfig::from_keyvalue(bad_warmup), ConfigError);
    auto bad_smooth = KeyValueConfig::parse("smooth_high=0.1\nsmooth_low=0.9\n");
    CHECK_THROWS_AS(TrainConfig::from_keyvalue(bad_smooth), ConfigError);
    const TrainConfig defaults;
    CHECK(defaults.epochs == 300);
    CHECK(defaults.batch_size == 8);
    CHECK(defaults.learning_rate == 1e-4);
}

TEST_CASE("targets per label") {
    const auto s = fixtures::tiny_setup();
    const auto dust = target_for(s.refs, kDustClass, 8);
    CHECK(dust.set_count() == 0);
    CHECK(target_for(s.refs, 3, 8).bits == s.refs.positives[1].bits);
    CHECK_THROWS_AS(target_for(s.refs, 9, 8), ConfigError);
}

TEST_CASE("zero epochs leave the initialization") {
    const auto s = fixtures::tiny_setup();
    auto m = fixtures::tiny_model(s, ModelKind::kFull);
    const auto before = snapshot(m);
    const auto h = fit(m, s.data.dataset, quick(0));
    CHECK(h.loss.empty());
    CHECK(snapshot(m) == before);
}

TEST_CASE("one epoch touches only trainable tensors") {
    const auto s = fixtures::tiny_setup();
    auto m = fixtures::tiny_model(s, ModelKind::kFull);
    const auto before = snapshot(m);
    const auto axis = m.axis().values;
    const auto dict = m.dictionary()->rows;
    const auto data_before = s.data.dataset.spectra.front().intensities;
    const auto h = fit(m, s.data.dataset, quick(1));
    CHECK(h.loss.size() == 1);
    CHECK(h.lr.size() == 1);
    CHECK(h.test_f1.size() == 1);
    CHECK(m.axis().values == axis);
    CHECK(m.dictionary()->rows == dict);
    CHECK(s.data.dataset.spectra.front().intensities == data_before);
    const auto after = snapshot(m);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < after.size(); ++i) changed += after[i] != before[i];
    CHECK(changed == after.size());
}

TEST_CASE("identical seeds give identical histories") {
    const auto s = fixtures::tiny_setup();
    auto tc = quick(3);
    tc.dropout = 0.1;
    tc.eval_every = 1;
    auto a = fixtures::tiny_model(s, ModelKind::kFull);
    auto b = fixtures::tiny_model(s, ModelKind::kFull);
    const auto ha = fit(a, s.data.dataset, tc, &s.data.dataset);
    const auto hb = fit(b, s.data.dataset, tc, &s.data.dataset);
    CHECK(ha == hb);
    CHECK(ha.test_f1.back().has_value());
    CHECK(snapshot(a) == snapshot(b));
    tc.seed = 6;
    auto c = fixtures::tiny_model(s, ModelKind::kFull);
    CHECK(fit(c, s.data.dataset, tc) != ha);
}

TEST_CASE("history csv") {
    TrainHistory h;
    h.loss = {0.5, 0.4};
    h.test_f1 = {std::nullopt, 0.75};
    h.lr = {1e-4, 0};
    const auto csv = h.to_csv();
    CHECK(csv.find("epoch") == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("0.75") != std::string::npos);
}

TEST_CASE("non-finite loss aborts with coordinates") {
    const auto s = fixtures::tiny_setup();
    auto m = fixtures::tiny_model(s, ModelKind::kMsFormer);
    m.weights().head.output.bias.mutable_data()[0] = std::numeric_limits<Real>::quiet_NaN();
    try {
        fit(m, s.data.dataset, quick(1));
        FAIL("expected a numeric error");
    } catch (const NumericError& e) {
        const std::string what = e.what();
        CHECK(what.find("epoch 1") != std::string::npos);
        CHECK(what.find("batch 1") != std::string::npos);
    }
}

TEST_CASE("overfit probe on noise-free spectra") {
    auto s = fixtures::tiny_setup();
    const auto clean = generate_dataset(s.data.dataset.axis, s.data.templates, {4, 4, 4, 4, 4},
                                        NoiseParams::noiseless(), 21);
    REQUIRE(clean.spectra.size() == 20);
    auto m = fixtures::tiny_model(s, ModelKind::kFull);
    auto tc = quick(50);
    const auto h = fit(m, clean, tc);
    const double floor = smoothed_entropy_floor(0.9, 0.1);
    INFO("final loss " << h.loss.back());
    CHECK(h.loss.back() < floor + 0.05);
    for (double l : h.loss) CHECK(l >= floor - 1e-6);
}

TEST_CASE("run_training shares the split across variants") {
    const auto s = fixtures::tiny_setup(3, 10);
    auto tc = quick(1);
    const auto full = run_training(s.data.dataset, s.data.templates, s.cfg, ModelKind::kFull, tc);
    const auto ablation = run_training(s.data.dataset, s.data.templates, s.cfg, ModelKind::kMsFormer, tc);
    CHECK(full.train.spectra.size() == 40);
    CHECK(full.test.spectra.size() == 10);
    REQUIRE(ablation.test.spectra.size() == full.test.spectra.size());
    for (std::size_t i = 0; i < full.test.spectra.size(); ++i)
        CHECK(full.test.spectra[i].intensities == ablation.test.spectra[i].intensities);
    CHECK(ablation.model.kind() == ModelKind::kMsFormer);
    CHECK_FALSE(ablation.model.config().dictionary_enabled);
    CHECK(full.model.dictionary() != nullptr);
}

}  // TEST_SUITE
