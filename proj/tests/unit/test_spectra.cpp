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

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "doctest.h"
#include "numcore/ops.hpp"
#include "numcore/svd.hpp"
#include "spectra/data_config.hpp"
#include "support/fixtures.hpp"

using namespace msdg;

namespace {

const MzAxis& desk_axis() {
    static const MzAxis axis = MzAxis::linear(500, 10000, 4000);
    return axis;
}

Eigen::MatrixXd stack(const std::vector<Spectrum>& spectra) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(spectra.size()),
                      static_cast<Eigen::Index>(spectra.front().intensities.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = spectra[i].intensities[j];
    return m;
}

std::vector<Spectrum> shots(const ClassTemplate& t, const NoiseParams& noise, std::size_t n, std::uint64_t seed) {
    std::vector<Spectrum> out;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) out.push_back(synthesize_spectrum(t, desk_axis(), noise, rng.fork()));
    return out;
}

}  // namespace

TEST_SUITE("spectra") {

TEST_CASE("axis") {
    const auto& axis = desk_axis();
    CHECK(axis.size() == 4000);
    CHECK(axis.min() == 500);
    CHECK(axis.max() == 10000);
    for (std::size_t i = 1; i < axis.size(); ++i) REQUIRE(axis.values[i] > axis.values[i - 1]);
    CHECK(axis.fractional_index(500) == doctest::Approx(0));
    CHECK(axis.fractional_index(10000) == doctest::Approx(3999));

    MzAxis bad;
    bad.values = {1, 3, 2};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("templates") {
    const auto t = default_templates(desk_axis(), 5);
    REQUIRE(t.size() == 5);
    CHECK(t[0].kind == ProfileKind::kPeakless);
    CHECK(t[0].centers.empty());
    CHECK(t[1].kind == ProfileKind::kBacterial);
    CHECK(t[2].kind == ProfileKind::kBacterial);
    CHECK(t[3].kind == ProfileKind::kProtein);
    CHECK(t[4].kind == ProfileKind::kProtein);
    for (const auto& c : t) {
        CHECK(c.centers.size() == c.widths.size());
        CHECK(c.centers.size() == c.amplitudes.size());
        for (double a : c.amplitudes) CHECK(a > 0);
        for (double x : c.centers) {
            CHECK(x >= desk_axis().min());
            CHECK(x <= desk_axis().max());
        }
        if (c.kind == ProfileKind::kBacterial) CHECK(c.centers.size() >= 6);
        if (c.kind == ProfileKind::kProtein) {
            CHECK(c.centers.size() >= 1);
            CHECK(c.centers.size() <= 3);
        }
    }
}

TEST_CASE("templates are seeded") {
    const auto a = default_templates(desk_axis(), 9);
    const auto b = default_templates(desk_axis(), 9);
    const auto c = default_templates(desk_axis(), 10);
    for (int k = 0; k < 5; ++k) {
        CHECK(a[k].centers == b[k].centers);
        CHECK(a[k].amplitudes == b[k].amplitudes);
    }
    CHECK(a[1].centers != c[1].centers);
}

TEST_CASE("peaks of different classes are at least three patches apart") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto t = default_templates(desk_axis(), seed);
        const double patch_da = 40 * (desk_axis().max() - desk_axis().min()) / 3999.0;
        for (int i = 0; i < 5; ++i)
            for (int j = i + 1; j < 5; ++j)
                for (double a : t[i].centers)
                    for (double b : t[j].centers) CHECK(std::abs(a - b) >= 3 * patch_da - 1e-9);
    }
}

TEST_CASE("short axis is rejected") {
    CHECK_THROWS_AS(default_templates(MzAxis::linear(500, 10000, 300), 1), ConfigError);
}

TEST_CASE("noiseless peakless spectrum is the baseline") {
    const auto t = default_templates(desk_axis(), 1);
    const auto noise = NoiseParams::noiseless();
    const auto s = synthesize_spectrum(t[0], desk_axis(), noise, 3);
    CHECK(s.label == 1);
    for (std::size_t i = 0; i < s.intensities.size(); i += 97) {
        const double want = baseline_at(noise, desk_axis(), desk_axis().values[i], noise.baseline_amplitude);
        CHECK(s.intensities[i] == doctest::Approx(want).epsilon(1e-6));
    }
}

TEST_CASE("noiseless single peak") {
    const auto& axis = desk_axis();
    ClassTemplate t;
    t.class_id = 4;
    t.kind = ProfileKind::kProtein;
    const std::size_t at = 1234;
    t.centers = {axis.values[at]};
    t.widths = {6.0};
    t.amplitudes = {2.5};
    auto noise = NoiseParams::noiseless();
    noise.baseline_amplitude = 0.3;
    const auto s = synthesize_spectrum(t, axis, noise, 0);
    const auto top = std::max_element(s.intensities.begin(), s.intensities.end()) - s.intensities.begin();
    CHECK(static_cast<std::size_t>(top) == at);
    CHECK(s.intensities[at] ==
          doctest::Approx(2.5 + baseline_at(noise, axis, axis.values[at], 0.3)).epsilon(1e-6));
}

TEST_CASE("synthesis is seeded") {
    const auto t = default_templates(desk_axis(), 1);
    const auto a = synthesize_spectrum(t[2], desk_axis(), {}, 77);
    const auto b = synthesize_spectrum(t[2], desk_axis(), {}, 77);
    const auto c = synthesize_spectrum(t[2], desk_axis(), {}, 78);
    CHECK(a.intensities == b.intensities);
    CHECK(a.intensities != c.intensities);
    for (float v : a.intensities) CHECK(std::isfinite(v));
}

TEST_CASE("same-class shots are close to rank two") {
    const auto t = default_templates(desk_axis(), 7);
    for (int c = 1; c < 5; ++c) {
        const auto m = stack(shots(t[c], {}, 200, 100 + c));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m * m.transpose(), Eigen::EigenvaluesOnly);
        const Eigen::VectorXd ev = eig.eigenvalues().reverse();
        const double energy = (ev(0) + ev(1)) / ev.sum();
        INFO("class " << c + 1 << " rank-2 energy " << energy);
        CHECK(energy >= 0.9);
    }
}

TEST_CASE("rank-two reconstruction is closer to the clean template than raw shots") {
    const auto t = default_templates(desk_axis(), 7);
    const auto noise = NoiseParams{};
    for (int c = 1; c < 5; ++c) {
        const auto raw = shots(t[c], noise, 120, 300 + c);
        const auto m = stack(raw);
        const auto clean = template_profile(t[c], desk_axis());
        Eigen::RowVectorXd ideal(m.cols());
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            ideal(j) = clean[j] + baseline_at(noise, desk_axis(), desk_axis().values[j], noise.baseline_amplitude);
        const auto svd = thin_svd(m);
        const Eigen::MatrixXd r2 = low_rank_approximation(svd, 2);
        const double raw_msd = (m.rowwise() - ideal).squaredNorm() / static_cast<double>(m.size());
        const double r2_msd = (r2.rowwise() - ideal).squaredNorm() / static_cast<double>(m.size());
        INFO("class " << c + 1 << ": raw " << raw_msd << ", rank-2 " << r2_msd);
        CHECK(r2_msd < raw_msd);
    }
}

TEST_CASE("dataset counts") {
    const auto t = default_templates(desk_axis(), 2);
    const auto ones = generate_dataset(desk_axis(), t, {1, 1, 1, 1, 1}, {}, 4);
    CHECK(ones.spectra.size() == 5);
    CHECK(desk_counts() == ClassCounts{250, 250, 250, 250, 250});
    CHECK(paper_proportion_counts() == ClassCounts{630, 1500, 1500, 1400, 1500});

    const auto ds = generate_dataset(desk_axis(), t, {3, 4, 5, 6, 7}, {}, 4);
    CHECK(ds.class_counts() == ClassCounts{3, 4, 5, 6, 7});
    for (const auto& s : ds.spectra) CHECK(s.intensities.size() == desk_axis().size());
    CHECK_THROWS_AS(generate_dataset(desk_axis(), t, {0, 1, 1, 1, 1}, {}, 4), ConfigError);
}

TEST_CASE("dataset is shuffled") {
    const auto t = default_templates(desk_axis(), 2);
    const auto ds = generate_dataset(desk_axis(), t, {10, 10, 10, 10, 10}, {}, 4);
    bool sorted = std::is_sorted(ds.spectra.begin(), ds.spectra.end(),
                                 [](const Spectrum& a, const Spectrum& b) { return a.label < b.label; });
    CHECK_FALSE(sorted);
}

TEST_CASE("desk presets") {
    const auto desk = DataConfig::from_preset("desk");
    CHECK(desk.counts == ClassCounts{250, 250, 250, 250, 250});
    CHECK(desk.length == 4000);
    const auto paper = DataConfig::from_preset("paper-proportion");
    CHECK(paper.counts == ClassCounts{630, 1500, 1500, 1400, 1500});
    CHECK_THROWS_AS(DataConfig::from_preset("huge"), ConfigError);

    auto kv = KeyValueConfig::parse("preset=desk\ncount_1=3\nnoise_sigma=0.2\n");
    const auto cfg = DataConfig::from_keyvalue(kv);
    CHECK(cfg.counts[0] == 3);
    CHECK(cfg.noise.noise_sigma == 0.2);
    auto bad = KeyValueConfig::parse("colour=blue\n");
    CHECK_THROWS_AS(DataConfig::from_keyvalue(bad), ConfigError);
}

TEST_CASE("generation is byte-identical for a seed") {
    const auto cfg = fixtures::tiny_data_config(4);
    const auto a = generate(cfg, 11);
    const auto b = generate(cfg, 11);
    CHECK(encode_dataset(a.dataset) == encode_dataset(b.dataset));
    CHECK(templates_csv(a.templates) == templates_csv(b.templates));
    CHECK(encode_dataset(generate(cfg, 12).dataset) != encode_dataset(a.dataset));
}

TEST_CASE("stratified split") {
    const auto t = default_templates(desk_axis(), 2);
    const auto ds = generate_dataset(MzAxis::linear(500, 10000, 4000), t, {1500, 2, 9, 10, 11}, NoiseParams::noiseless(), 4);
    const auto [train, test] = split_dataset(ds, 0.8, 5);
    const auto tr = train.class_counts();
    const auto te = test.class_counts();
    CHECK(tr[0] == 1200);
    CHECK(te[0] == 300);
    const auto all = ds.class_counts();
    for (int c = 0; c < 5; ++c) {
        CHECK(tr[c] + te[c] == all[c]);
        CHECK(std::abs(static_cast<double>(tr[c]) - 0.8 * static_cast<double>(all[c])) <= 1.0);
    }
}

TEST_CASE("split of two per class") {
    const auto t = default_templates(desk_axis(), 2);
    const auto ds = generate_dataset(desk_axis(), t, {2, 2, 2, 2, 2}, {}, 4);
    const auto [train, test] = split_dataset(ds, 0.5, 1);
    CHECK(train.class_counts() == ClassCounts{1, 1, 1, 1, 1});
    CHECK(test.class_counts() == ClassCounts{1, 1, 1, 1, 1});
}

TEST_CASE("split is a partition for any seed") {
    const auto setup = generate(fixtures::tiny_data_config(7), 1);
    const auto& ds = setup.dataset;
    // Intensity vectors identify spectra uniquely here.
    std::set<std::vector<float>> whole;
    for (const auto& s : ds.spectra) whole.insert(s.intensities);
    REQUIRE(whole.size() == ds.spectra.size());
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto [train, test] = split_dataset(ds, 0.7, seed);
        CHECK(train.spectra.size() + test.spectra.size() == ds.spectra.size());
        std::set<std::vector<float>> seen;
        for (const auto& s : train.spectra) seen.insert(s.intensities);
        for (const auto& s : test.spectra) CHECK(seen.insert(s.intensities).second);
        CHECK(seen == whole);
    }
}

TEST_CASE("split errors") {
    const auto t = default_templates(desk_axis(), 2);
    const auto ds = generate_dataset(desk_axis(), t, {1, 2, 2, 2, 2}, {}, 4);
    CHECK_THROWS_AS(split_dataset(ds, 0.5, 1), ConfigError);
    const auto ok = generate_dataset(desk_axis(), t, {2, 2, 2, 2, 2}, {}, 4);
    CHECK_THROWS_AS(split_dataset(ok, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(split_dataset(ok, 1.0, 1), ConfigError);
}

TEST_CASE("peak ground truth") {
    const auto axis = MzAxis::linear(0, 249, 250);  // one Dalton per sample
    ClassTemplate none;
    none.class_id = 1;
    const auto zero = peak_ground_truth(none, axis, 100, 50);
    CHECK(zero.bits == std::vector<std::uint8_t>(4, 0));
    CHECK(zero.set_count() == 0);

    // Windows are [50j, 50j + 100). A center at 150 lies in windows 2 and 3.
    ClassTemplate t;
    t.class_id = 2;
    t.centers = {150};
    t.widths = {1};
    t.amplitudes = {1};
    CHECK(peak_ground_truth(t, axis, 100, 50).bits == std::vector<std::uint8_t>{0, 0, 1, 1});

    t.centers = {125};
    CHECK(peak_ground_truth(t, axis, 100, 50).bits == std::vector<std::uint8_t>{0, 1, 1, 0});

    t.centers = {100};
    CHECK(peak_ground_truth(t, axis, 100, 50).bits == std::vector<std::uint8_t>{0, 1, 1, 0});
    t.centers = {99.5};
    CHECK(peak_ground_truth(t, axis, 100, 50).bits == std::vector<std::uint8_t>{1, 1, 0, 0});

    // Center of the fifth patch [200, 300) is also the start of the sixth.
    const auto longer = MzAxis::linear(0, 499, 500);
    t.centers = {250};
    const auto bits = peak_ground_truth(t, longer, 100, 50).bits;
    REQUIRE(bits.size() == 9);
    CHECK(bits == std::vector<std::uint8_t>{0, 0, 0, 0, 1, 1, 0, 0, 0});
}

TEST_CASE("peak ground truth matches a window coverage oracle") {
    const auto t = default_templates(desk_axis(), 3);
    for (const auto& c : t) {
        const auto pv = peak_ground_truth(c, desk_axis(), 40, 20);
        REQUIRE(pv.bits.size() == 199);
        for (std::size_t j = 0; j < 199; ++j) {
            bool covered = false;
            for (double x : c.centers) {
                const double idx = desk_axis().fractional_index(x);
                covered |= idx >= 20.0 * j && idx < 20.0 * j + 40;
            }
            CHECK(pv.bits[j] == covered);
        }
        if (c.kind != ProfileKind::kPeakless) CHECK(pv.set_count() > 0);
    }
}

TEST_CASE("dataset round trip") {
    const auto data = generate(fixtures::tiny_data_config(3), 2).dataset;
    const auto bytes = encode_dataset(data);
    const auto back = decode_dataset(bytes);
    CHECK(encode_dataset(back) == bytes);
    REQUIRE(back.spectra.size() == data.spectra.size());
    CHECK(back.axis.values == data.axis.values);
    for (std::size_t i = 0; i < data.spectra.size(); ++i) {
        CHECK(back.spectra[i].label == data.spectra[i].label);
        CHECK(back.spectra[i].intensities == data.spectra[i].intensities);
    }

    fixtures::TempDir dir("ds");
    save_dataset(dir.file("a.mspc"), data);
    const auto loaded = load_dataset(dir.file("a.mspc"));
    save_dataset(dir.file("b.mspc"), loaded);
    std::ifstream fa(dir.file("a.mspc"), std::ios::binary), fb(dir.file("b.mspc"), std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(sa == sb);
    CHECK(sa.substr(0, 4) == "MSPC");
}

TEST_CASE("dataset layout") {
    Dataset ds;
    ds.axis = MzAxis::linear(500, 600, 3);
    ds.spectra.push_back({{1.0f, 2.0f, 3.0f}, 4});
    const auto b = encode_dataset(ds);
    // magic + version + n + l + axis + (label + intensities)
    CHECK(b.size() == 4 + 4 + 8 + 8 + 3 * 4 + 1 + 3 * 4);
    CHECK(b[8] == 1);   // n, little-endian
    CHECK(b[16] == 3);  // l
    CHECK(b[36] == 4);  // first label after the axis
}

TEST_CASE("empty dataset") {
    Dataset ds;
    ds.axis = MzAxis::linear(500, 10000, 16);
    const auto back = decode_dataset(encode_dataset(ds));
    CHECK(back.spectra.empty());
    CHECK(back.axis.size() == 16);
}

TEST_CASE("corrupt datasets") {
    const auto data = generate(fixtures::tiny_data_config(2), 2).dataset;
    auto bytes = encode_dataset(data);

    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_dataset(bad_magic), FormatError);

    auto bad_version = bytes;
    bad_version[4] = 99;
    CHECK_THROWS_AS(decode_dataset(bad_version), FormatError);

    auto truncated = bytes;
    truncated.resize(bytes.size() - 5);
    try {
        decode_dataset(truncated);
        FAIL("truncated file decoded");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }

    auto bad_label = bytes;
    bad_label[4 + 4 + 8 + 8 + data.axis.size() * 4] = 9;
    CHECK_THROWS_AS(decode_dataset(bad_label), FormatError);

    CHECK_THROWS_AS(load_dataset("/nonexistent/dir/file.mspc"), IoError);
}

TEST_CASE("peak table sidecar") {
    const auto t = default_templates(desk_axis(), 4);
    const auto text = templates_csv(t);
    CHECK(text.rfind("class_id,center_mz,width_mz,amplitude\n", 0) == 0);
    const auto back = parse_templates_csv(text);
    REQUIRE(back.size() == 5);
    CHECK(back[0].centers.empty());
    for (int c = 0; c < 5; ++c) {
        CHECK(back[c].class_id == t[c].class_id);
        REQUIRE(back[c].centers.size() == t[c].centers.size());
        for (std::size_t p = 0; p < t[c].centers.size(); ++p) CHECK(back[c].centers[p] == t[c].centers[p]);
    }
    CHECK(templates_csv(back) == text);
    CHECK_THROWS_AS(parse_templates_csv("nope\n"), FormatError);
    CHECK_THROWS_AS(parse_templates_csv("class_id,center_mz,width_mz,amplitude\n1,,,\n"), FormatError);
}

}  // TEST_SUITE
