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

#include "model/config.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "common/errors.hpp"
#include "numcore/ops.hpp"

namespace msdg {

ModelConfig ModelConfig::desk() { return {}; }

ModelConfig ModelConfig::paper() {
    ModelConfig c;
    c.length = 88300;
    c.window = 100;
    c.stride = 50;
    c.hidden = 256;
    c.heads = 8;
    c.head_dim = 32;
    c.layers = 3;
    c.mlp_dim = 2048;
    c.peak_mlp_dim = 512;
    c.alpha = 32;
    c.rank = 2;
    c.dropout = 0.1;
    return c;
}

namespace {

std::vector<std::uint8_t> parse_class_list(const std::string& text) {
    std::vector<std::uint8_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            const int v = std::stoi(item);
            if (v < 1 || v > 5) throw std::out_of_range("class");
            out.push_back(static_cast<std::uint8_t>(v));
        } catch (const std::exception&) {
            throw ConfigError("classes: '" + item + "' is not a class id in 1..5");
        }
    }
    return out;
}

}  // namespace

ModelConfig ModelConfig::from_keyvalue(KeyValueConfig& kv) {
    ModelConfig c = kv.take_string("preset", "desk") == "paper" ? paper() : desk();
    c.length = kv.take_u64("length", c.length);
    c.window = kv.take_u64("window", c.window);
    c.stride = kv.take_u64("stride", c.stride);
    c.hidden = kv.take_u64("hidden", c.hidden);
    c.heads = kv.take_u64("heads", c.heads);
    c.head_dim = kv.take_u64("head_dim", c.head_dim);
    c.layers = kv.take_u64("layers", c.layers);
    c.mlp_dim = kv.take_u64("mlp_dim", c.mlp_dim);
    c.peak_mlp_dim = kv.take_u64("peak_mlp_dim", c.peak_mlp_dim);
    c.alpha = kv.take_u64("alpha", c.alpha);
    c.rank = kv.take_u64("rank", c.rank);
    c.dropout = kv.take_double("dropout", c.dropout);
    c.dictionary_enabled = kv.take_bool("dictionary_enabled", c.dictionary_enabled);
    c.dust_threshold = kv.take_double("dust_threshold", c.dust_threshold);
    c.layer_norm_eps = kv.take_double("layer_norm_eps", c.layer_norm_eps);
    if (kv.has("classes")) c.positive_classes = parse_class_list(kv.take_string("classes", ""));
    kv.finish();
    c.validate();
    return c;
}

ModelConfig ModelConfig::load(const std::string& path) {
    auto kv = KeyValueConfig::load(path);
    return from_keyvalue(kv);
}

std::size_t ModelConfig::patches() const {
    try {
        return window_count(length, window, stride);
    } catch (const DimensionError& e) {
        throw ConfigError(e.what());
    }
}

void ModelConfig::validate() const {
    patches();
    if (hidden == 0 || heads == 0 || head_dim == 0) throw ConfigError("hidden, heads and head_dim must be positive");
    if (heads * head_dim != hidden) {
        throw ConfigError("hidden size " + std::to_string(hidden) + " must equal heads (" + std::to_string(heads) +
                          ") x head_dim (" + std::to_string(head_dim) + ")");
    }
    if (hidden < 2) throw ConfigError("hidden size must be at least 2 for layer normalization");
    if (mlp_dim == 0 || peak_mlp_dim == 0) throw ConfigError("MLP widths must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (!(layer_norm_eps > 0.0)) throw ConfigError("layer_norm_eps must be positive");
    if (positive_classes.empty()) throw ConfigError("at least one positive class is required");
    std::set<std::uint8_t> seen(positive_classes.begin(), positive_classes.end());
    if (seen.size() != positive_classes.size()) throw ConfigError("positive classes must be distinct");
    if (seen.count(dust_class)) throw ConfigError("the dust class cannot be a positive class");
    if (dictionary_enabled) {
        if (alpha % class_count() != 0) {
            throw ConfigError("alpha " + std::to_string(alpha) + " is not divisible by " +
                              std::to_string(class_count()) + " classes");
        }
        if (rank < 1 || rank > per_class()) {
            throw ConfigError("rank " + std::to_string(rank) + " must lie in [1, alpha/c = " +
                              std::to_string(per_class()) + "]");
        }
    }
}

}  // namespace msdg
