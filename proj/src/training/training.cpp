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

#include "training/training.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <tuple>

#include "dictionary/dictionary.hpp"
#include "evaluation/evaluation.hpp"
#include "numcore/adam.hpp"

namespace msdg {

TrainConfig TrainConfig::from_keyvalue(KeyValueConfig& kv) {
    TrainConfig tc;
    tc.epochs = kv.take_u64("epochs", tc.epochs);
    tc.batch_size = kv.take_u64("batch_size", tc.batch_size);
    tc.learning_rate = kv.take_double("learning_rate", tc.learning_rate);
    tc.warmup_fraction = kv.take_double("warmup_fraction", tc.warmup_fraction);
    tc.smooth_high = kv.take_double("smooth_high", tc.smooth_high);
    tc.smooth_low = kv.take_double("smooth_low", tc.smooth_low);
    tc.dropout = kv.take_double("dropout", tc.dropout);
    tc.seed = kv.take_u64("seed", tc.seed);
    tc.eval_every = kv.take_u64("eval_every", tc.eval_every);
    kv.finish();
    tc.validate();
    return tc;
}

TrainConfig TrainConfig::load(const std::string& path) {
    KeyValueConfig kv = KeyValueConfig::load(path);
    return from_keyvalue(kv);
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
    if (!(warmup_fraction >= 0 && warmup_fraction < 1)) throw ConfigError("warmup_fraction must lie in [0, 1)");
    if (!(smooth_high > smooth_low)) throw ConfigError("smooth_high must exceed smooth_low");
    if (!(smooth_low >= 0 && smooth_high <= 1)) throw ConfigError("smoothing targets must lie in [0, 1]");
    if (!(dropout >= 0 && dropout < 1)) throw ConfigError("dropout must lie in [0, 1)");
}

std::string TrainHistory::to_csv() const {
    std::ostringstream out;
    out << "epoch,loss,lr,test_macro_f1\n";
    char buf[128];
    for (std::size_t e = 0; e < loss.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.8f,%.6e,", e + 1, loss[e], lr[e]);
        out << buf;
        if (test_f1[e]) {
            std::snprintf(buf, sizeof buf, "%.6f", *test_f1[e]);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

std::vector<Real> smoothed_targets(const PeakVector& y, double high, double low) {
    std::vector<Real> t(y.bits.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<Real>(y.bits[i] ? high : low);
    return t;
}

Tensor bce_smoothed(const Tensor& probs, const PeakVector& y, double high, double low) {
    if (probs.numel() != y.bits.size()) {
        throw DimensionError("prediction has " + std::to_string(probs.numel()) + " patches, target has " +
                             std::to_string(y.bits.size()));
    }
    return binary_cross_entropy(probs, smoothed_targets(y, high, low));
}

double smoothed_entropy_floor(double high, double low) {
    auto entropy = [](double t) {
        double h = 0;
        if (t > 0) h -= t * std::log(t);
        if (t < 1) h -= (1 - t) * std::log1p(-t);
        return h;
    };
    // Every bit is either high or low; the floor is the smaller entropy.
    return std::min(entropy(high), entropy(low));
}

double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& tc) {
    if (total_steps == 0) return 0.0;
    step = std::min(step, total_steps);
    const auto warmup = static_cast<std::size_t>(std::ceil(tc.warmup_fraction * static_cast<double>(total_steps)));
    if (step < warmup) return tc.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
    const std::size_t decay = total_steps - warmup;
    if (decay == 0) return tc.learning_rate;
    const double progress = static_cast<double>(step - warmup) / static_cast<double>(decay);
    return tc.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

PeakVector target_for(const ClassReference& refs, std::uint8_t label, std::size_t patches) {
    if (label == refs.dust_class) return {label, std::vector<std::uint8_t>(patches, 0)};
    for (const auto& p : refs.positives) {
        if (p.class_id == label) return p;
    }
    throw ConfigError("no reference peak vector for class " + std::to_string(label));
}

TrainHistory fit(Model& model, const Dataset& train, const TrainConfig& tc, const Dataset* test,
                 const EpochCallback& on_epoch) {
    tc.validate();
    if (model.kind() == ModelKind::kEfficient) throw UsageError("the efficient model cannot be trained");
    if (train.spectra.empty()) throw UsageError("training set is empty");
    if (train.axis.size() != model.config().length) {
        throw ConfigError("training spectra have " + std::to_string(train.axis.size()) +
                          " samples, model expects " + std::to_string(model.config().length));
    }
    const std::size_t n = model.config().patches();
    std::vector<std::vector<Real>> targets(kNumClasses + 1);
    for (const auto& s : train.spectra) {
        if (targets[s.label].empty()) {
            targets[s.label] = smoothed_targets(target_for(model.references(), s.label, n), tc.smooth_high,
                                                tc.smooth_low);
        }
    }

    std::vector<Tensor> params;
    for (auto& [name, t] : model.parameters()) params.push_back(t);
    AdamState adam;
    Rng root(tc.seed);
    Rng shuffle_rng(root.fork());
    Rng dropout_rng(root.fork());

    const std::size_t batches_per_epoch = (train.spectra.size() + tc.batch_size - 1) / tc.batch_size;
    const std::size_t total_steps = tc.epochs * batches_per_epoch;
    std::vector<std::size_t> order(train.spectra.size());
    std::size_t step = 0;

    TrainHistory history;
    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle_rng.shuffle(order);
        double epoch_loss = 0;
        double lr = 0;
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            const std::size_t start = b * tc.batch_size;
            const std::size_t end = std::min(order.size(), start + tc.batch_size);
            std::vector<const Spectrum*> batch;
            std::vector<Real> batch_targets;
            for (std::size_t i = start; i < end; ++i) {
                const Spectrum& s = train.spectra[order[i]];
                batch.push_back(&s);
                batch_targets.insert(batch_targets.end(), targets[s.label].begin(), targets[s.label].end());
            }
            try {
                ForwardOptions options;
                options.training = true;
                options.rng = &dropout_rng;
                options.dropout = tc.dropout;
                const ForwardOutput out = model.forward(batch_tensor(batch), options);
                // Equal patch counts per row: the flat mean is the mean of row means.
                const Tensor loss = binary_cross_entropy_with_logits(out.logits, batch_targets);
                const double value = loss.item();
                if (!std::isfinite(value)) throw NumericError("loss is not finite");
                backward(loss);
                lr = lr_at(step + 1, total_steps, tc);
                adam_step(params, adam, lr);
                zero_grads(params);
                epoch_loss += value;
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch + 1) + ", batch " +
                                   std::to_string(b + 1) + ": " + e.what());
            }
            ++step;
        }
        history.loss.push_back(epoch_loss / static_cast<double>(batches_per_epoch));
        history.lr.push_back(lr);
        std::optional<double> f1;
        if (test && tc.eval_every > 0 && ((epoch + 1) % tc.eval_every == 0 || epoch + 1 == tc.epochs)) {
            f1 = evaluate(model, *test).macro_f1;
        }
        history.test_f1.push_back(f1);
        if (on_epoch) on_epoch({epoch + 1, history.loss.back(), lr, f1});
    }
    return history;
}

TrainRun run_training(const Dataset& data, const std::vector<ClassTemplate>& templates, ModelConfig cfg,
                      ModelKind kind, const TrainConfig& tc, double train_fraction, const EpochCallback& on_epoch) {
    tc.validate();
    if (kind == ModelKind::kEfficient) throw UsageError("the efficient model is produced by export");
    if (!(train_fraction > 0 && train_fraction <= 1)) throw ConfigError("train fraction must lie in (0, 1]");
    cfg.dictionary_enabled = kind == ModelKind::kFull;
    cfg.validate();
    if (data.axis.size() != cfg.length) {
        throw ConfigError("dataset has " + std::to_string(data.axis.size()) + " samples per spectrum, model expects " +
                          std::to_string(cfg.length));
    }
    Rng root(tc.seed);
    const std::uint64_t split_seed = root.next_u64();
    const std::uint64_t dictionary_seed = root.next_u64();
    const std::uint64_t init_seed = root.next_u64();
    TrainConfig fit_cfg = tc;
    fit_cfg.seed = root.next_u64();

    Dataset train, test;
    if (train_fraction < 1) {
        std::tie(train, test) = split_dataset(data, train_fraction, split_seed);
    } else {
        train = data;
        test.axis = data.axis;
    }
    const ClassReference refs =
        ClassReference::from_templates(templates, cfg.positive_classes, data.axis, cfg.window, cfg.stride);
    std::optional<DenoisedDictionary> dictionary;
    if (kind == ModelKind::kFull) {
        dictionary = denoise(build_dictionary(train, cfg.per_class(), cfg.positive_classes, dictionary_seed), cfg.rank);
    }
    Model model = Model::create(cfg, kind, data.axis, refs, std::move(dictionary), init_seed);
    TrainHistory history = fit(model, train, fit_cfg, test.spectra.empty() ? nullptr : &test, on_epoch);
    return {std::move(model), std::move(history), std::move(train), std::move(test)};
}

}  // namespace msdg
