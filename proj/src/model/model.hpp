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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dictionary/dictionary.hpp"
#include "embedding/embedding.hpp"
#include "encoder/encoder.hpp"
#include "model/config.hpp"
#include "spectra/spectra.hpp"

namespace msdg {

enum class ModelKind : std::uint32_t {
    kFull = 0,       // dictionary-guided model with the dictionary pathway
    kEfficient = 1,  // inference export: cached enriched tokens, no dictionary pathway
    kMsFormer = 2,   // ablation: input pathway and peak head only
};

const char* model_kind_name(ModelKind kind);

/// y = sigmoid(ReLU(P W1 + b1) W2 + b2), one logit per patch.
struct PeakHeadWeights {
    LinearWeights hidden;  // [h x phi]
    LinearWeights output;  // [phi x 1]

    static PeakHeadWeights init(std::size_t hidden_dim, std::size_t phi, Rng& rng);
    void collect(const std::string& prefix, NamedTensors& out) const;
};

struct ModelWeights {
    EmbeddingWeights embedding;
    EncoderStack input_encoder;
    EncoderStack dictionary_encoder;  // full model only
    Tensor tokens;                    // full model only: [c*N x h], class-major
    AttentionWeights selection;       // full and efficient
    PeakHeadWeights head;
};

/// Fresh weights for the given variant, drawn in canonical order.
ModelWeights initial_weights(const ModelConfig& cfg, ModelKind kind, Rng& rng);
/// Canonical (name, tensor) order; undefined members are skipped.
void collect_weights(const ModelWeights& w, NamedTensors& out);
/// Deep copy; the copy's tensors are fresh trainable leaves.
ModelWeights clone_weights(const ModelWeights& w);

/// Per-class ground-truth peak vectors used by the cosine classifier.
struct ClassReference {
    std::vector<PeakVector> positives;
    std::uint8_t dust_class = kDustClass;

    static ClassReference from_templates(const std::vector<ClassTemplate>& templates,
                                         const std::vector<std::uint8_t>& positive_classes, const MzAxis& axis,
                                         std::size_t window, std::size_t stride);
};

struct Classification {
    std::uint8_t class_id = 0;
    double best_similarity = 0;
    std::vector<double> similarities;  // per positive class, reference order
};

/// Cosine similarity against each positive reference; argmax wins when it
/// reaches `threshold`, otherwise dust. A zero vector (or zero reference)
/// has similarity 0.
Classification classify(std::span<const double> yhat, const ClassReference& refs, double threshold);

struct ParameterItem {
    std::string name;
    std::uint64_t count = 0;
    bool learnable_sequence = false;  // the c learnable token sequences
    bool buffer = false;              // stored but not trained (cached tokens)
};

struct ParameterCount {
    std::vector<ParameterItem> items;

    /// Network weights: everything except learnable sequences and buffers.
    std::uint64_t network() const;
    /// All trainable scalars, learnable sequences included.
    std::uint64_t trainable() const;
    std::uint64_t buffers() const;
};

/// Analytic count, a pure function of the configuration.
ParameterCount count_parameters(const ModelConfig& cfg, ModelKind kind);

struct ForwardOptions {
    bool training = false;
    Rng* rng = nullptr;
    bool capture_attention = false;
    double dropout = -1;  // overrides the configured rate when >= 0
};

struct ForwardOutput {
    Tensor logits;  // [B x N]
    Tensor probs;   // [B x N], strictly inside (0, 1)
    AttentionProbs selection;  // layout groups=N, queries=B, keys=c
    AttentionProbs slice;      // last dictionary-encoder layer, full model only
};

class Model {
public:
    /// Fresh model with initialized weights. The dictionary is required for
    /// the full model and ignored otherwise.
    static Model create(const ModelConfig& cfg, ModelKind kind, const MzAxis& axis, ClassReference refs,
                        std::optional<DenoisedDictionary> dictionary, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ModelKind kind() const { return kind_; }
    const MzAxis& axis() const { return axis_; }
    const ClassReference& references() const { return refs_; }
    const DenoisedDictionary* dictionary() const { return dictionary_ ? &*dictionary_ : nullptr; }
    ModelWeights& weights() { return weights_; }
    const ModelWeights& weights() const { return weights_; }
    const Tensor& cached_tokens() const { return cached_tokens_; }

    /// Trainable tensors in canonical order.
    NamedTensors parameters() const;
    /// Non-trainable stored tensors (efficient model's cached tokens).
    NamedTensors buffers() const;
    /// Count from the live tensors, itemized like count_parameters().
    ParameterCount parameter_count() const;

    /// Batch forward; `spectra` is [B x l] (or [l]).
    ForwardOutput forward(const Tensor& spectra, const ForwardOptions& options = {}) const;

    /// Enriched learnable tokens, position-major [N*c x h]. Computed through
    /// the dictionary pathway for the full model, read from the cache for
    /// the efficient model.
    Tensor enriched_tokens(const BlockContext& ctx, AttentionProbs* slice_probs = nullptr) const;

    /// Inference helpers (no graph recording).
    std::vector<double> predict(const Spectrum& s) const;
    Classification classify(const Spectrum& s) const;

    /// Assembles a model from parts; used by checkpoint loading and export.
    static Model assemble(ModelConfig cfg, ModelKind kind, MzAxis axis, ClassReference refs,
                          std::optional<DenoisedDictionary> dictionary, ModelWeights weights, Tensor cached_tokens);

private:
    Model() = default;
    void check_consistency() const;
    BlockContext context(const ForwardOptions& options) const;

    ModelConfig cfg_;
    ModelKind kind_ = ModelKind::kFull;
    MzAxis axis_;
    ClassReference refs_;
    std::optional<DenoisedDictionary> dictionary_;
    ModelWeights weights_;
    Tensor cached_tokens_;  // [N x c x h]
    Tensor dictionary_tensor_;
};

Tensor batch_tensor(std::span<const Spectrum* const> spectra);

/// Drops the dictionary pathway: runs it once, caches the c enriched token
/// sequences, and keeps copies of the remaining weights. Exporting an
/// efficient model returns an identical copy.
Model export_efficient(const Model& model);

std::vector<std::uint8_t> encode_checkpoint(const Model& model);
Model decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace msdg
