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

#include <cstdlib>
#include <filesystem>
#include <string>

#include "dictionary/dictionary.hpp"
#include "model/model.hpp"
#include "spectra/data_config.hpp"

namespace fixtures {

// N = (180 - 40) / 20 + 1 = 8 patches, h = 16, one layer, two members per
// sub-dictionary.
inline msdg::ModelConfig tiny_config() {
    msdg::ModelConfig cfg;
    cfg.length = 180;
    cfg.window = 40;
    cfg.stride = 20;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.head_dim = 8;
    cfg.layers = 1;
    cfg.mlp_dim = 32;
    cfg.peak_mlp_dim = 16;
    cfg.alpha = 8;
    cfg.rank = 2;
    cfg.dropout = 0.0;
    return cfg;
}

inline msdg::DataConfig tiny_data_config(std::size_t per_class = 6) {
    msdg::DataConfig d = msdg::DataConfig::from_preset("desk");
    d.length = 180;
    d.templates.patch_width = 2;
    d.counts = {per_class, per_class, per_class, per_class, per_class};
    return d;
}

struct TinySetup {
    msdg::GeneratedData data;
    msdg::ModelConfig cfg;
    msdg::ClassReference refs;
    msdg::DenoisedDictionary dictionary;
};

inline TinySetup tiny_setup(std::uint64_t seed = 3, std::size_t per_class = 6) {
    TinySetup s{msdg::generate(tiny_data_config(per_class), seed), tiny_config(), {}, {}};
    s.refs = msdg::ClassReference::from_templates(s.data.templates, s.cfg.positive_classes, s.data.dataset.axis,
                                                  s.cfg.window, s.cfg.stride);
    s.dictionary = msdg::denoise(
        msdg::build_dictionary(s.data.dataset, s.cfg.per_class(), s.cfg.positive_classes, seed), s.cfg.rank);
    return s;
}

inline msdg::Model tiny_model(const TinySetup& s, msdg::ModelKind kind, std::uint64_t seed = 11) {
    msdg::ModelConfig cfg = s.cfg;
    cfg.dictionary_enabled = kind != msdg::ModelKind::kMsFormer;
    return msdg::Model::create(cfg, kind, s.data.dataset.axis, s.refs,
                               kind == msdg::ModelKind::kFull ? std::optional(s.dictionary) : std::nullopt, seed);
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("msdg_test_" + tag + "_" + std::to_string(std::rand()) + "_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace fixtures
