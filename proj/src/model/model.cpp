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

#include "model/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace msdg {

const char* model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::kFull: return "ms-dgformer";
        case ModelKind::kEfficient: return "efficient";
        case ModelKind::kMsFormer: return "ms-former";
    }
    return "unknown";
}

PeakHeadWeights PeakHeadWeights::init(std::size_t hidden_dim, std::size_t phi, Rng& rng) {
    return {LinearWeights::init(hidden_dim, phi, rng), LinearWeights::init(phi, 1, rng)};
}

void PeakHeadWeights::collect(const std::string& prefix, NamedTensors& out) const {
    hidden.collect(prefix + ".hidden", out);
    output.collect(prefix + ".output", out);
}

ModelWeights initial_weights(const ModelConfig& cfg, ModelKind kind, Rng& rng) {
    const bool full = kind == ModelKind::kFull;
    const std::size_t h = cfg.hidden;
    ModelWeights w;
    w.embedding = EmbeddingWeights::init(h, cfg.window, full, rng);
    w.input_encoder = EncoderStack::init(cfg.layers, h, cfg.mlp_dim, rng);
    if (full) {
        w.dictionary_encoder = EncoderStack::init(cfg.layers, h, cfg.mlp_dim, rng);
        w.tokens = normal_parameter({cfg.class_count() * cfg.patches(), h}, 0.02, rng);
    }
    if (kind != ModelKind::kMsFormer) w.selection = AttentionWeights::init(h, rng);
    w.head = PeakHeadWeights::init(h, cfg.peak_mlp_dim, rng);
    return w;
}

void collect_weights(const ModelWeights& w, NamedTensors& out) {
    w.embedding.collect("embedding", out);
    w.input_encoder.collect("input_encoder", out);
    w.dictionary_encoder.collect("dictionary_encoder", out);
    if (w.tokens.defined()) out.emplace_back("tokens", w.tokens);
    if (w.selection.query.weight.defined()) w.selection.collect("selection", out);
    w.head.collect("head", out);
}

namespace {

Tensor clone(const Tensor& t) {
    if (!t.defined()) return t;
    Tensor c = t.detach();
    c.set_requires_grad(true);
    return c;
}

LinearWeights clone(const LinearWeights& w) { return {clone(w.weight), clone(w.bias)}; }
ConvWeights clone(const ConvWeights& w) { return {clone(w.kernels), clone(w.bias)}; }

AttentionWeights clone(const AttentionWeights& w) {
    return {clone(w.query), clone(w.key), clone(w.value), clone(w.output)};
}

EncoderStack clone(const EncoderStack& s) {
    EncoderStack out;
    for (const auto& l : s.layers) {
        EncoderLayerWeights c;
        c.norm1_gain = clone(l.norm1_gain);
        c.norm1_bias = clone(l.norm1_bias);
        c.attention = clone(l.attention);
        c.norm2_gain = clone(l.norm2_gain);
        c.norm2_bias = clone(l.norm2_bias);
        c.mlp_in = clone(l.mlp_in);
        c.mlp_out = clone(l.mlp_out);
        out.layers.push_back(std::move(c));
    }
    return out;
}

// Top-level grouping used in parameter counts: "embedding.input",
// "input_encoder", "tokens", ...
std::string count_group(const std::string& name) {
    const auto first = name.find('.');
    if (first == std::string::npos) return name;
    if (name.compare(0, first, "embedding") == 0) return name.substr(0, name.find('.', first + 1));
    return name.substr(0, first);
}

}  // namespace

ModelWeights clone_weights(const ModelWeights& w) {
    ModelWeights c;
    c.embedding.input = clone(w.embedding.input);
    c.embedding.dictionary = clone(w.embedding.dictionary);
    c.embedding.positional = clone(w.embedding.positional);
    c.input_encoder = clone(w.input_encoder);
    c.dictionary_encoder = clone(w.dictionary_encoder);
    c.tokens = clone(w.tokens);
    c.selection = clone(w.selection);
    c.head = {clone(w.head.hidden), clone(w.head.output)};
    return c;
}

ClassReference ClassReference::from_templates(const std::vector<ClassTemplate>& templates,
                                              const std::vector<std::uint8_t>& positive_classes, const MzAxis& axis,
                                              std::size_t window, std::size_t stride) {
    ClassReference refs;
    for (std::uint8_t id : positive_classes) {
        const auto it = std::find_if(templates.begin(), templates.end(),
                                     [id](const ClassTemplate& t) { return t.class_id == id; });
        if (it == templates.end()) throw ConfigError("no template for class " + std::to_string(id));
        refs.positives.push_back(peak_ground_truth(*it, axis, window, stride));
    }
    return refs;
}

Classification classify(std::span<const double> yhat, const ClassReference& refs, double threshold) {
    Classification out;
    out.class_id = refs.dust_class;
    double norm_y = 0;
    for (double v : yhat) norm_y += v * v;
    norm_y = std::sqrt(norm_y);
    double best = -1;
    std::size_t best_index = 0;
    for (std::size_t i = 0; i < refs.positives.size(); ++i) {
        const auto& bits = refs.positives[i].bits;
        if (bits.size() != yhat.size()) {
            throw DimensionError("reference for class " + std::to_string(refs.positives[i].class_id) + " has " +
                                 std::to_string(bits.size()) + " patches, prediction has " +
                                 std::to_string(yhat.size()));
        }
        double dot = 0, norm_r = 0;
        for (std::size_t j = 0; j < bits.size(); ++j) {
            dot += yhat[j] * bits[j];
            norm_r += bits[j];
        }
        const double sim = (norm_y > 0 && norm_r > 0) ? dot / (norm_y * std::sqrt(norm_r)) : 0.0;
        out.similarities.push_back(sim);
        if (sim > best) {
            best = sim;
            best_index = i;
        }
    }
    out.best_similarity = std::max(best, 0.0);
    if (!refs.positives.empty() && best >= threshold) out.class_id = refs.positives[best_index].class_id;
    return out;
}

std::uint64_t ParameterCount::network() const {
    std::uint64_t n = 0;
    for (const auto& it : items) {
        if (!it.learnable_sequence && !it.buffer) n += it.count;
    }
    return n;
}

std::uint64_t ParameterCount::trainable() const {
    std::uint64_t n = 0;
    for (const auto& it : items) {
        if (!it.buffer) n += it.count;
    }
    return n;
}

std::uint64_t ParameterCount::buffers() const {
    std::uint64_t n = 0;
    for (const auto& it : items) {
        if (it.buffer) n += it.count;
    }
    return n;
}

ParameterCount count_parameters(const ModelConfig& cfg, ModelKind kind) {
    cfg.validate();
    const std::uint64_t h = cfg.hidden, rho = cfg.window, m = cfg.mlp_dim, phi = cfg.peak_mlp_dim;
    const std::uint64_t n = cfg.patches(), c = cfg.class_count();
    const std::uint64_t conv = h * rho + h;
    const std::uint64_t attn = 4 * (h * h + h);
    const std::uint64_t layer = 2 * 2 * h + attn + (h * m + m) + (m * h + h);
    const std::uint64_t stack = cfg.layers * layer;
    const std::uint64_t head = (h * phi + phi) + (phi + 1);

    ParameterCount pc;
    pc.items.push_back({"embedding.input", conv});
    if (kind == ModelKind::kFull) pc.items.push_back({"embedding.dictionary", conv});
    pc.items.push_back({"embedding.positional", conv});
    pc.items.push_back({"input_encoder", stack});
    if (kind == ModelKind::kFull) {
        pc.items.push_back({"dictionary_encoder", stack});
        pc.items.push_back({"tokens", c * n * h, true, false});
    }
    if (kind != ModelKind::kMsFormer) pc.items.push_back({"selection", attn});
    pc.items.push_back({"head", head});
    if (kind == ModelKind::kEfficient) pc.items.push_back({"cached_tokens", n * c * h, false, true});
    return pc;
}

Model Model::create(const ModelConfig& cfg, ModelKind kind, const MzAxis& axis, ClassReference refs,
                    std::optional<DenoisedDictionary> dictionary, std::uint64_t seed) {
    if (kind == ModelKind::kEfficient) throw UsageError("efficient models are produced by export, not created");
    cfg.validate();
    Rng rng(seed);
    ModelWeights w = initial_weights(cfg, kind, rng);
    if (kind != ModelKind::kFull) dictionary.reset();
    return assemble(cfg, kind, axis, std::move(refs), std::move(dictionary), std::move(w), Tensor());
}

Model Model::assemble(ModelConfig cfg, ModelKind kind, MzAxis axis, ClassReference refs,
                      std::optional<DenoisedDictionary> dictionary, ModelWeights weights, Tensor cached_tokens) {
    Model m;
    m.cfg_ = std::move(cfg);
    m.kind_ = kind;
    m.axis_ = std::move(axis);
    m.refs_ = std::move(refs);
    m.refs_.dust_class = m.cfg_.dust_class;
    m.dictionary_ = std::move(dictionary);
    m.weights_ = std::move(weights);
    m.cached_tokens_ = std::move(cached_tokens);
    if (m.dictionary_) {
        std::vector<Real> rows(m.dictionary_->rows.begin(), m.dictionary_->rows.end());
        m.dictionary_tensor_ = Tensor::from({m.dictionary_->alpha(), m.dictionary_->length}, std::move(rows));
    }
    m.check_consistency();
    return m;
}

void Model::check_consistency() const {
    cfg_.validate();
    axis_.validate();
    if (axis_.size() != cfg_.length) {
        throw ConfigError("m/z axis has " + std::to_string(axis_.size()) + " points, configuration expects " +
                          std::to_string(cfg_.length));
    }
    const std::size_t n = cfg_.patches(), c = cfg_.class_count();
    if (refs_.positives.size() != c) {
        throw ConfigError("expected " + std::to_string(c) + " class references, got " +
                          std::to_string(refs_.positives.size()));
    }
    for (std::size_t i = 0; i < c; ++i) {
        if (refs_.positives[i].class_id != cfg_.positive_classes[i] || refs_.positives[i].bits.size() != n) {
            throw ConfigError("class reference " + std::to_string(i) + " does not match the configuration");
        }
    }
    if (kind_ == ModelKind::kFull) {
        if (!cfg_.dictionary_enabled) throw ConfigError("full model requires dictionary_enabled = true");
        if (!dictionary_) throw ConfigError("full model requires a denoised dictionary");
        const auto& d = *dictionary_;
        if (d.classes != cfg_.positive_classes || d.per_class != cfg_.per_class() || d.length != cfg_.length) {
            throw ConfigError("dictionary (alpha " + std::to_string(d.alpha()) + ", length " +
                              std::to_string(d.length) + ") does not match the configuration (alpha " +
                              std::to_string(cfg_.alpha) + ", length " + std::to_string(cfg_.length) + ")");
        }
    } else if (kind_ == ModelKind::kEfficient) {
        if (!cached_tokens_.defined() || cached_tokens_.shape() != Shape{n, c, cfg_.hidden}) {
            throw ConfigError("efficient model needs cached tokens of shape [" + std::to_string(n) + "x" +
                              std::to_string(c) + "x" + std::to_string(cfg_.hidden) + "]");
        }
    } else if (cfg_.dictionary_enabled) {
        throw ConfigError("ablation model requires dictionary_enabled = false");
    }
}

NamedTensors Model::parameters() const {
    NamedTensors out;
    collect_weights(weights_, out);
    return out;
}

NamedTensors Model::buffers() const {
    NamedTensors out;
    if (cached_tokens_.defined()) out.emplace_back("cached_tokens", cached_tokens_);
    return out;
}

ParameterCount Model::parameter_count() const {
    ParameterCount pc;
    std::map<std::string, std::size_t> index;
    auto add = [&](const std::string& name, std::uint64_t count, bool sequence, bool buffer) {
        const std::string group = count_group(name);
        auto it = index.find(group);
        if (it == index.end()) {
            index.emplace(group, pc.items.size());
            pc.items.push_back({group, count, sequence, buffer});
        } else {
            pc.items[it->second].count += count;
        }
    };
    for (const auto& [name, t] : parameters()) add(name, t.numel(), name == "tokens", false);
    for (const auto& [name, t] : buffers()) add(name, t.numel(), false, true);
    return pc;
}

BlockContext Model::context(const ForwardOptions& options) const {
    BlockContext ctx;
    ctx.heads = cfg_.heads;
    ctx.dropout = static_cast<Real>(options.dropout >= 0 ? options.dropout : cfg_.dropout);
    ctx.training = options.training;
    ctx.eps = static_cast<Real>(cfg_.layer_norm_eps);
    ctx.rng = options.rng;
    return ctx;
}

namespace {

Tensor embed_dropout(const Tensor& x, const BlockContext& ctx) {
    if (!ctx.training || ctx.dropout <= 0) return x;
    if (!ctx.rng) throw UsageError("training with dropout requires a random generator");
    return dropout(x, ctx.dropout, true, *ctx.rng);
}

}  // namespace

Tensor Model::enriched_tokens(const BlockContext& ctx, AttentionProbs* slice_probs) const {
    const std::size_t n = cfg_.patches(), c = cfg_.class_count();
    if (kind_ == ModelKind::kEfficient) return reshape(cached_tokens_, {n * c, cfg_.hidden});
    if (kind_ != ModelKind::kFull) throw ConfigError("model has no dictionary pathway");
    Tensor d = patchify_embed(dictionary_tensor_, Pathway::kDictionary, weights_.embedding, cfg_.stride);
    d = add_tiled(d, mz_positional(axis_, weights_.embedding, cfg_.stride));
    d = embed_dropout(d, ctx);
    const Tensor class_major = encode_subdictionaries(d, weights_.tokens, c, cfg_.per_class(), n,
                                                      weights_.dictionary_encoder, ctx, slice_probs);
    return tokens_position_major(class_major, c, n);
}

ForwardOutput Model::forward(const Tensor& spectra, const ForwardOptions& options) const {
    if (!spectra.defined() || spectra.rank() == 0 || spectra.rank() > 2) {
        throw DimensionError("forward expects a spectrum [l] or a batch [B x l]");
    }
    if (spectra.cols() != cfg_.length) {
        throw DimensionError("spectra have " + std::to_string(spectra.cols()) + " samples, model expects " +
                             std::to_string(cfg_.length));
    }
    if (options.training && kind_ == ModelKind::kEfficient) {
        throw UsageError("the efficient model is inference-only");
    }
    const std::size_t batch = spectra.rows();
    const std::size_t n = cfg_.patches();
    const BlockContext ctx = context(options);

    Tensor x = patchify_embed(spectra, Pathway::kInput, weights_.embedding, cfg_.stride);
    x = add_tiled(x, mz_positional(axis_, weights_.embedding, cfg_.stride));
    x = embed_dropout(x, ctx);
    x = encode_input(x, weights_.input_encoder, batch, ctx);

    ForwardOutput out;
    if (kind_ != ModelKind::kMsFormer) {
        const bool capture = options.capture_attention;
        const Tensor tokens = enriched_tokens(ctx, capture && kind_ == ModelKind::kFull ? &out.slice : nullptr);
        x = selection_attention(x, tokens, weights_.selection, batch, n, cfg_.class_count(), ctx,
                                capture ? &out.selection : nullptr);
    }
    const Tensor hidden = relu(linear(x, weights_.head.hidden));
    out.logits = reshape(linear(hidden, weights_.head.output), {batch, n});
    out.probs = sigmoid(out.logits);
    return out;
}

std::vector<double> Model::predict(const Spectrum& s) const {
    NoGradGuard guard;
    std::vector<Real> values(s.intensities.begin(), s.intensities.end());
    const std::size_t length = values.size();
    const auto out = forward(Tensor::from({length}, std::move(values)));
    return {out.probs.data().begin(), out.probs.data().end()};
}

Classification Model::classify(const Spectrum& s) const {
    const auto yhat = predict(s);
    return msdg::classify(yhat, refs_, cfg_.dust_threshold);
}

Tensor batch_tensor(std::span<const Spectrum* const> spectra) {
    if (spectra.empty()) throw UsageError("empty batch");
    const std::size_t l = spectra.front()->intensities.size();
    std::vector<Real> values;
    values.reserve(spectra.size() * l);
    for (const Spectrum* s : spectra) {
        if (s->intensities.size() != l) throw DimensionError("spectra in a batch differ in length");
        values.insert(values.end(), s->intensities.begin(), s->intensities.end());
    }
    return Tensor::from({spectra.size(), l}, std::move(values));
}

Model export_efficient(const Model& model) {
    if (model.kind() == ModelKind::kMsFormer) throw ConfigError("model has no dictionary pathway to export");
    ModelWeights w;
    const ModelWeights& src = model.weights();
    w.embedding.input = src.embedding.input;
    w.embedding.positional = src.embedding.positional;
    w.input_encoder = src.input_encoder;
    w.selection = src.selection;
    w.head = src.head;
    w = clone_weights(w);

    const ModelConfig& cfg = model.config();
    Tensor cached;
    {
        NoGradGuard guard;
        BlockContext ctx;
        ctx.heads = cfg.heads;
        ctx.eps = static_cast<Real>(cfg.layer_norm_eps);
        const Tensor tokens = model.enriched_tokens(ctx);
        std::vector<Real> values(tokens.data().begin(), tokens.data().end());
        cached = Tensor::from({cfg.patches(), cfg.class_count(), cfg.hidden}, std::move(values));
    }
    return Model::assemble(cfg, ModelKind::kEfficient, model.axis(), model.references(), std::nullopt, std::move(w),
                           std::move(cached));
}

}  // namespace msdg
