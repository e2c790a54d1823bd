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

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "common/keyvalue.hpp"
#include "model/model.hpp"
#include "spectra/spectra.hpp"

namespace msdg {

struct TrainConfig {
    std::size_t epochs = 300;
    std::size_t batch_size = 8;
    double learning_rate = 1e-4;
    double warmup_fraction = 0.10;
    double smooth_high = 0.9;
    double smooth_low = 0.1;
    double dropout = 0.1;
    std::uint64_t seed = 0;
    std::size_t eval_every = 0;  // test macro-F1 every k epochs; 0 disables

    static TrainConfig from_keyvalue(KeyValueConfig& kv);
    static TrainConfig load(const std::string& path);
    void validate() const;
};

struct TrainHistory {
    std::vector<double> loss;                     // per-epoch mean batch loss
    std::vector<std::optional<double>> test_f1;   // per epoch, when evaluated
    std::vector<double> lr;                       // lr of the epoch's last step

    std::string to_csv() const;
    bool operator==(const TrainHistory&) const = default;
};

/// Smoothed per-bit targets: 1 -> high, 0 -> low.
std::vector<Real> smoothed_targets(const PeakVector& y, double high, double low);

/// Mean BCE of probabilities against smoothed targets.
Tensor bce_smoothed(const Tensor& probs, const PeakVector& y, double high = 0.9, double low = 0.1);

/// Per-bit minimum of the smoothed loss: the entropy of the smoothed target.
double smoothed_entropy_floor(double high, double low);

/// Linear warmup over ceil(fraction * total) steps, then cosine decay to 0.
double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& tc);

/// Ground-truth peak vector for a label; dust maps to all zeros.
PeakVector target_for(const ClassReference& refs, std::uint8_t label, std::size_t patches);

struct EpochReport {
    std::size_t epoch = 0;
    double loss = 0;
    double lr = 0;
    std::optional<double> test_f1;
};

using EpochCallback = std::function<void(const EpochReport&)>;

/// Adam over all trainable tensors of `model`, in place. A non-finite loss
/// or activation aborts with a NumericError naming the epoch and batch.
TrainHistory fit(Model& model, const Dataset& train, const TrainConfig& tc, const Dataset* test = nullptr,
                 const EpochCallback& on_epoch = {});

struct TrainRun {
    Model model;
    TrainHistory history;
    Dataset train;
    Dataset test;  // empty when train_fraction is 1
};

/// Split, dictionary selection and denoising, model creation and fit, all
/// seeded from tc.seed. Full and ablation runs with the same seed share the
/// split. The ablation kind forces dictionary_enabled off.
TrainRun run_training(const Dataset& data, const std::vector<ClassTemplate>& templates, ModelConfig cfg,
                      ModelKind kind, const TrainConfig& tc, double train_fraction = 0.8,
                      const EpochCallback& on_epoch = {});

}  // namespace msdg
