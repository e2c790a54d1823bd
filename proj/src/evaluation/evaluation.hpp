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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "model/model.hpp"

namespace msdg {

using Confusion = std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses>;  // [true][predicted]

struct ClassMetrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    std::uint64_t support = 0;
};

/// Per-class scores are one-vs-rest with 0/0 taken as 0. Macro scores are
/// unweighted means over all five classes; balanced accuracy is the mean
/// per-class recall, plain accuracy the diagonal fraction.
struct MetricsReport {
    Confusion confusion{};
    std::array<ClassMetrics, kNumClasses> per_class{};
    std::array<double, kNumClasses> micro_f1{};
    double macro_precision = 0;
    double macro_recall = 0;
    double macro_f1 = 0;
    double balanced_accuracy = 0;
    double accuracy = 0;

    static MetricsReport from_confusion(const Confusion& confusion);
    std::uint64_t total() const;
    std::string to_csv() const;
    std::string to_table() const;
};

struct Prediction {
    std::uint8_t label = 0;
    std::uint8_t predicted = 0;
    double best_similarity = 0;
};

/// Batched inference over a dataset; no graph is recorded.
std::vector<Prediction> predict_dataset(const Model& model, const Dataset& ds, std::size_t batch_size = 16);

MetricsReport evaluate(const Model& model, const Dataset& ds);
MetricsReport metrics_from_predictions(const std::vector<Prediction>& predictions);

struct BenchRow {
    std::string model;
    std::size_t batch = 0;
    double mean_ms = 0;
    double std_ms = 0;
    double spectra_per_s = 0;
};

struct BenchOptions {
    std::vector<std::size_t> batches{1, 4, 8};
    std::size_t warmup = 10;
    std::size_t runs = 100;
    std::uint64_t seed = 0;
};

/// Inputs are generated before timing; each timed region is one forward.
std::vector<BenchRow> benchmark(const Model& model, const BenchOptions& options = {});
std::string bench_csv(const std::vector<BenchRow>& rows);

/// Head-averaged last-layer attention of one spectrum.
struct AttentionDump {
    std::vector<std::uint8_t> classes;
    std::size_t patches = 0;
    std::size_t members = 0;  // per_class + 1; the token is the last member
    /// Per class: [N x members] rows of the learnable token's slice attention.
    /// Empty for models without a dictionary pathway.
    std::vector<std::vector<double>> slice;
    std::vector<double> selection;  // [N x c]
};

AttentionDump dump_attention(const Model& model, const Spectrum& s);

/// Column means of the selection map.
std::vector<double> selection_column_means(const AttentionDump& dump);

/// Writes slice_class<id>.csv per class and selection.csv into `directory`;
/// returns the written paths.
std::vector<std::string> write_attention_csv(const AttentionDump& dump, const std::string& directory);

}  // namespace msdg
