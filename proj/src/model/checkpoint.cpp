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

// MSDG checkpoint:
//   "MSDG" | version u32 | kind u32 | config block | tensor count u32 |
//   per tensor: name_len u16, name, rank u8, rank x u64 extents, f32 data
// Config block, in order: length, window, stride, hidden, heads, head_dim,
// layers, mlp_dim, peak_mlp_dim, alpha, rank (u64 each); dropout f32;
// dictionary_enabled u8; dust_threshold f32; layer_norm_eps f32;
// class count u8 + ids; dust id u8.
// Buffers follow the weights: buffer.mz_axis, buffer.class_refs, and
// buffer.dictionary / buffer.dictionary_singular_values (full model) or
// buffer.cached_tokens (efficient model).

#include <cmath>

#include "common/binary_io.hpp"
#include "model/model.hpp"

namespace msdg {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
    std::string name;
    Shape shape;
    std::vector<Real> data;
};

void write_tensor(ByteWriter& w, const std::string& name, const Shape& shape, std::span<const Real> data) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name);
    w.u8(static_cast<std::uint8_t>(shape.size()));
    for (auto e : shape) w.u64(e);
    for (Real v : data) w.f32(static_cast<float>(v));
}

StoredTensor read_tensor(ByteReader& r) {
    StoredTensor t;
    const std::uint16_t len = r.u16();
    t.name = r.raw(len);
    const std::uint8_t rank = r.u8();
    if (rank > 4) r.fail("tensor '" + t.name + "' has unsupported rank " + std::to_string(rank));
    std::uint64_t numel = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
        const std::uint64_t e = r.u64();
        if (e != 0 && numel > r.remaining() / e) r.fail("tensor '" + t.name + "' extents exceed the payload");
        numel *= e;
        t.shape.push_back(e);
    }
    r.need(numel * 4, t.name.c_str());
    t.data.resize(numel);
    for (auto& v : t.data) v = static_cast<Real>(r.f32());
    return t;
}

ModelConfig read_config(ByteReader& r) {
    ModelConfig cfg;
    cfg.length = r.u64();
    cfg.window = r.u64();
    cfg.stride = r.u64();
    cfg.hidden = r.u64();
    cfg.heads = r.u64();
    cfg.head_dim = r.u64();
    cfg.layers = r.u64();
    cfg.mlp_dim = r.u64();
    cfg.peak_mlp_dim = r.u64();
    cfg.alpha = r.u64();
    cfg.rank = r.u64();
    cfg.dropout = r.f32();
    cfg.dictionary_enabled = r.u8() != 0;
    cfg.dust_threshold = r.f32();
    cfg.layer_norm_eps = r.f32();
    const std::uint8_t c = r.u8();
    cfg.positive_classes.clear();
    for (std::uint8_t i = 0; i < c; ++i) cfg.positive_classes.push_back(r.u8());
    cfg.dust_class = r.u8();
    return cfg;
}

void write_config(ByteWriter& w, const ModelConfig& cfg) {
    for (std::size_t v : {cfg.length, cfg.window, cfg.stride, cfg.hidden, cfg.heads, cfg.head_dim, cfg.layers,
                          cfg.mlp_dim, cfg.peak_mlp_dim, cfg.alpha, cfg.rank}) {
        w.u64(v);
    }
    w.f32(static_cast<float>(cfg.dropout));
    w.u8(cfg.dictionary_enabled ? 1 : 0);
    w.f32(static_cast<float>(cfg.dust_threshold));
    w.f32(static_cast<float>(cfg.layer_norm_eps));
    w.u8(static_cast<std::uint8_t>(cfg.positive_classes.size()));
    for (auto id : cfg.positive_classes) w.u8(id);
    w.u8(cfg.dust_class);
}

// Sequential cursor over the stored tensors that checks names and shapes.
class TensorCursor {
public:
    explicit TensorCursor(std::vector<StoredTensor> stored) : stored_(std::move(stored)) {}

    const StoredTensor& take(const std::string& name, const Shape& shape) {
        if (next_ >= stored_.size()) throw FormatError("checkpoint is missing tensor '" + name + "'");
        const StoredTensor& t = stored_[next_];
        if (t.name != name) {
            throw FormatError("checkpoint tensor " + std::to_string(next_) + " is '" + t.name + "', expected '" +
                              name + "'");
        }
        if (t.shape != shape) {
            throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_string(t.shape) + ", expected " +
                              shape_string(shape));
        }
        ++next_;
        return t;
    }

    void finish() const {
        if (next_ != stored_.size()) throw FormatError("unexpected checkpoint tensor '" + stored_[next_].name + "'");
    }

private:
    std::vector<StoredTensor> stored_;
    std::size_t next_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
    const ModelConfig& cfg = model.config();
    ByteWriter w;
    w.raw("MSDG");
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(model.kind()));
    write_config(w, cfg);

    NamedTensors params = model.parameters();
    std::size_t count = params.size() + 2;
    if (model.kind() == ModelKind::kFull) count += 2;
    if (model.kind() == ModelKind::kEfficient) count += 1;
    w.u32(static_cast<std::uint32_t>(count));
    for (const auto& [name, t] : params) write_tensor(w, name, t.shape(), t.data());

    const auto& axis = model.axis().values;
    const std::vector<Real> axis_values(axis.begin(), axis.end());
    write_tensor(w, "buffer.mz_axis", {axis.size()}, axis_values);

    const auto& refs = model.references().positives;
    const std::size_t n = cfg.patches();
    std::vector<Real> bits;
    for (const auto& p : refs) bits.insert(bits.end(), p.bits.begin(), p.bits.end());
    write_tensor(w, "buffer.class_refs", {refs.size(), n}, bits);

    if (model.kind() == ModelKind::kFull) {
        const DenoisedDictionary& d = *model.dictionary();
        const std::vector<Real> rows(d.rows.begin(), d.rows.end());
        write_tensor(w, "buffer.dictionary", {d.alpha(), d.length}, rows);
        const std::vector<Real> sv(d.singular_values.begin(), d.singular_values.end());
        write_tensor(w, "buffer.dictionary_singular_values", {sv.size()}, sv);
    }
    if (model.kind() == ModelKind::kEfficient) {
        const Tensor& t = model.cached_tokens();
        write_tensor(w, "buffer.cached_tokens", t.shape(), t.data());
    }
    return w.bytes();
}

Model decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    if (r.raw(4) != "MSDG") throw FormatError("bad checkpoint magic (expected MSDG) at offset 0");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t kind_raw = r.u32();
    if (kind_raw > 2) r.fail("unknown model kind " + std::to_string(kind_raw));
    const auto kind = static_cast<ModelKind>(kind_raw);
    ModelConfig cfg = read_config(r);
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint configuration is invalid: ") + e.what());
    }

    const std::uint32_t count = r.u32();
    std::vector<StoredTensor> stored;
    for (std::uint32_t i = 0; i < count; ++i) stored.push_back(read_tensor(r));
    if (r.remaining() != 0) r.fail("trailing bytes after checkpoint payload");
    TensorCursor cursor(std::move(stored));

    // A throwaway initialization provides the expected names and shapes.
    Rng rng(0);
    ModelWeights weights = initial_weights(cfg, kind, rng);
    NamedTensors expected;
    collect_weights(weights, expected);
    for (auto& [name, t] : expected) {
        const StoredTensor& s = cursor.take(name, t.shape());
        std::copy(s.data.begin(), s.data.end(), t.mutable_data().begin());
    }

    const std::size_t n = cfg.patches(), c = cfg.class_count();
    MzAxis axis;
    for (Real v : cursor.take("buffer.mz_axis", {cfg.length}).data) axis.values.push_back(static_cast<float>(v));

    ClassReference refs;
    refs.dust_class = cfg.dust_class;
    const auto& bits = cursor.take("buffer.class_refs", {c, n}).data;
    for (std::size_t i = 0; i < c; ++i) {
        PeakVector p;
        p.class_id = cfg.positive_classes[i];
        for (std::size_t j = 0; j < n; ++j) {
            const Real b = bits[i * n + j];
            if (b != 0 && b != 1) throw FormatError("class reference bits must be 0 or 1");
            p.bits.push_back(static_cast<std::uint8_t>(b));
        }
        refs.positives.push_back(std::move(p));
    }

    std::optional<DenoisedDictionary> dictionary;
    Tensor cached;
    if (kind == ModelKind::kFull) {
        DenoisedDictionary d;
        d.classes = cfg.positive_classes;
        d.per_class = cfg.per_class();
        d.length = cfg.length;
        d.rank = cfg.rank;
        for (Real v : cursor.take("buffer.dictionary", {cfg.alpha, cfg.length}).data) {
            d.rows.push_back(static_cast<float>(v));
        }
        const std::size_t sv_count = c * std::min(d.per_class, d.length);
        for (Real v : cursor.take("buffer.dictionary_singular_values", {sv_count}).data) {
            d.singular_values.push_back(v);
        }
        dictionary = std::move(d);
    }
    if (kind == ModelKind::kEfficient) {
        auto& s = cursor.take("buffer.cached_tokens", {n, c, cfg.hidden});
        cached = Tensor::from(s.shape, s.data);
    }
    cursor.finish();
    try {
        return Model::assemble(cfg, kind, std::move(axis), std::move(refs), std::move(dictionary),
                               std::move(weights), std::move(cached));
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint is inconsistent: ") + e.what());
    }
}

void save_checkpoint(const std::string& path, const Model& model) {
    write_file_bytes(path, encode_checkpoint(model));
}

Model load_checkpoint(const std::string& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace msdg
