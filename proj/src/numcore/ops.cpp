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

#include "numcore/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>

namespace msdg {

namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

ConstMatMap view(const std::vector<Real>& v, std::size_t r, std::size_t c) {
    return ConstMatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

MatMap view(std::vector<Real>& v, std::size_t r, std::size_t c) {
    return MatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

void check_finite(const std::vector<Real>& values, const char* op) {
    for (Real x : values) {
        if (!std::isfinite(x)) throw NumericError(std::string("non-finite value produced by ") + op);
    }
}

/// Wraps freshly computed values into a result node, recording the graph
/// edge when any input needs a gradient and recording is enabled.
Tensor make_result(Shape shape, std::vector<Real> values, std::initializer_list<const Tensor*> inputs,
                   std::function<void(TensorNode&)> backward_fn, const char* op) {
    check_finite(values, op);
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    bool needs = false;
    if (grad_enabled()) {
        for (const Tensor* t : inputs) needs = needs || t->requires_grad();
    }
    if (needs) {
        node->requires_grad = true;
        for (const Tensor* t : inputs) node->parents.push_back(t->node_ptr());
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul: cannot multiply " + shape_string(a.shape()) + " by " + shape_string(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<Real> out(m * n);
    view(out, m, n).noalias() = view(a.node()->data, m, k) * view(b.node()->data, k, n);
    return make_result(
        {m, n}, std::move(out), {&a, &b},
        [m, k, n](TensorNode& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            auto g = view(static_cast<const std::vector<Real>&>(self.grad), m, n);
            if (pa.requires_grad) view(pa.ensure_grad(), m, k).noalias() += g * view(pb.data, k, n).transpose();
            if (pb.requires_grad) view(pb.ensure_grad(), k, n).noalias() += view(pa.data, m, k).transpose() * g;
        },
        "matmul");
}

Tensor matmul_bt(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
        throw DimensionError("matmul_bt: cannot multiply " + shape_string(a.shape()) + " by transpose of " +
                             shape_string(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    std::vector<Real> out(m * n);
    view(out, m, n).noalias() = view(a.node()->data, m, k) * view(b.node()->data, n, k).transpose();
    return make_result(
        {m, n}, std::move(out), {&a, &b},
        [m, k, n](TensorNode& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            auto g = view(static_cast<const std::vector<Real>&>(self.grad), m, n);
            if (pa.requires_grad) view(pa.ensure_grad(), m, k).noalias() += g * view(pb.data, n, k);
            if (pb.requires_grad) view(pb.ensure_grad(), n, k).noalias() += g.transpose() * view(pa.data, m, k);
        },
        "matmul_bt");
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<Real> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
    return make_result(
        a.shape(), std::move(out), {&a, &b},
        [](TensorNode& self) {
            for (auto& p : self.parents) {
                if (!p->requires_grad) continue;
                auto& g = p->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            }
        },
        "add");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<Real> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
    return make_result(
        a.shape(), std::move(out), {&a, &b},
        [](TensorNode& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                auto& g = pa.ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
            }
            if (pb.requires_grad) {
                auto& g = pb.ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
            }
        },
        "mul");
}

Tensor scale(const Tensor& x, Real factor) {
    std::vector<Real> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.at(i) * factor;
    return make_result(
        x.shape(), std::move(out), {&x},
        [factor](TensorNode& self) {
            auto& g = self.parents[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
        },
        "scale");
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
    const std::size_t r = x.rows(), c = x.cols();
    if (bias.numel() != c) {
        throw DimensionError("add_row_bias: bias of " + std::to_string(bias.numel()) + " values for " +
                             std::to_string(c) + " columns");
    }
    std::vector<Real> out(x.node()->data);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bias.at(j);
    }
    return make_result(
        x.shape(), std::move(out), {&x, &bias},
        [r, c](TensorNode& self) {
            auto& px = *self.parents[0];
            auto& pb = *self.parents[1];
            if (px.requires_grad) {
                auto& g = px.ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            }
            if (pb.requires_grad) {
                auto& g = pb.ensure_grad();
                for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < c; ++j) g[j] += self.grad[i * c + j];
                }
            }
        },
        "add_row_bias");
}

Tensor add_tiled(const Tensor& x, const Tensor& tile) {
    const std::size_t block = tile.numel();
    if (block == 0 || x.numel() % block != 0 || x.cols() != tile.cols()) {
        throw DimensionError("add_tiled: " + shape_string(x.shape()) + " is not a stack of " +
                             shape_string(tile.shape()));
    }
    const std::size_t copies = x.numel() / block;
    std::vector<Real> out(x.node()->data);
    for (std::size_t b = 0; b < copies; ++b) {
        for (std::size_t i = 0; i < block; ++i) out[b * block + i] += tile.at(i);
    }
    return make_result(
        x.shape(), std::move(out), {&x, &tile},
        [block, copies](TensorNode& self) {
            auto& px = *self.parents[0];
            auto& pt = *self.parents[1];
            if (px.requires_grad) {
                auto& g = px.ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            }
            if (pt.requires_grad) {
                auto& g = pt.ensure_grad();
                for (std::size_t b = 0; b < copies; ++b) {
                    for (std::size_t i = 0; i < block; ++i) g[i] += self.grad[b * block + i];
                }
            }
        },
        "add_tiled");
}

Tensor relu(const Tensor& x) {
    std::vector<Real> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(x.at(i), Real{0});
    return make_result(
        x.shape(), std::move(out), {&x},
        [](TensorNode& self) {
            auto& g = self.parents[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (self.data[i] > Real{0}) g[i] += self.grad[i];
            }
        },
        "relu");
}

Tensor sigmoid(const Tensor& x) {
    std::vector<Real> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const Real z = x.at(i);
        // Branch on sign so exp never overflows.
        if (z >= 0) {
            out[i] = Real{1} / (Real{1} + std::exp(-z));
        } else {
            const Real e = std::exp(z);
            out[i] = e / (Real{1} + e);
        }
        // Keep the codomain strictly inside (0, 1) at finite precision.
        out[i] = std::clamp(out[i], std::numeric_limits<Real>::min(),
                            Real{1} - std::numeric_limits<Real>::epsilon() / 2);
    }
    return make_result(
        x.shape(), std::move(out), {&x},
        [](TensorNode& self) {
            auto& g = self.parents[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                const Real s = self.data[i];
                g[i] += self.grad[i] * s * (Real{1} - s);
            }
        },
        "sigmoid");
}

namespace {

void softmax_inplace(Real* row, std::size_t n) {
    Real mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    Real total = 0;
    for (std::size_t j = 0; j < n; ++j) {
        row[j] = std::exp(row[j] - mx);
        total += row[j];
    }
    const Real inv = Real{1} / total;
    for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
}

}  // namespace

Tensor softmax_rows(const Tensor& x) {
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<Real> out(x.node()->data);
    for (std::size_t i = 0; i < r; ++i) softmax_inplace(out.data() + i * c, c);
    return make_result(
        x.shape(), std::move(out), {&x},
        [r, c](TensorNode& self) {
            auto& g = self.parents[0]->ensure_grad();
            for (std::size_t i = 0; i < r; ++i) {
                const Real* y = self.data.data() + i * c;
                const Real* dy = self.grad.data() + i * c;
                Real dot = 0;
                for (std::size_t j = 0; j < c; ++j) dot += y[j] * dy[j];
                for (std::size_t j = 0; j < c; ++j) g[i * c + j] += y[j] * (dy[j] - dot);
            }
        },
        "softmax_rows");
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, Real eps) {
    const std::size_t r = x.rows(), c = x.cols();
    if (c < 2) throw DimensionError("layer_norm: normalized extent must be at least 2");
    if (gain.numel() != c || bias.numel() != c) {
        throw DimensionError("layer_norm: gain/bias must have " + std::to_string(c) + " values");
    }
    std::vector<Real> out(x.numel());
    std::vector<Real> normalized(x.numel());
    std::vector<Real> inv_std(r);
    for (std::size_t i = 0; i < r; ++i) {
        const Real* row = x.node()->data.data() + i * c;
        Real mu = 0;
        for (std::size_t j = 0; j < c; ++j) mu += row[j];
        mu /= static_cast<Real>(c);
        Real var = 0;
        for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<Real>(c);
        const Real rs = Real{1} / std::sqrt(var + eps);
        inv_std[i] = rs;
        for (std::size_t j = 0; j < c; ++j) {
            const Real xh = (row[j] - mu) * rs;
            normalized[i * c + j] = xh;
            out[i * c + j] = xh * gain.at(j) + bias.at(j);
        }
    }
    return make_result(
        x.shape(), std::move(out), {&x, &gain, &bias},
        [r, c, normalized = std::move(normalized), inv_std = std::move(inv_std)](TensorNode& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            auto& pb = *self.parents[2];
            if (pg.requires_grad || pb.requires_grad) {
                auto& gg = pg.ensure_grad();
                auto& gb = pb.ensure_grad();
                for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                        gg[j] += self.grad[i * c + j] * normalized[i * c + j];
                        gb[j] += self.grad[i * c + j];
                    }
                }
            }
            if (px.requires_grad) {
                auto& gx = px.ensure_grad();
                const Real inv_c = Real{1} / static_cast<Real>(c);
                for (std::size_t i = 0; i < r; ++i) {
                    Real mean_d = 0, mean_dx = 0;
                    for (std::size_t j = 0; j < c; ++j) {
                        const Real d = self.grad[i * c + j] * pg.data[j];
                        mean_d += d;
                        mean_dx += d * normalized[i * c + j];
                    }
                    mean_d *= inv_c;
                    mean_dx *= inv_c;
                    for (std::size_t j = 0; j < c; ++j) {
                        const Real d = self.grad[i * c + j] * pg.data[j];
                        gx[i * c + j] += inv_std[i] * (d - mean_d - normalized[i * c + j] * mean_dx);
                    }
                }
            }
        },
        "layer_norm");
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw DimensionError("reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
    }
    return make_result(
        std::move(shape), x.node()->data, {&x},
        [](TensorNode& self) {
            auto& g = self.parents[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        },
        "reshape");
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<Real> out(index.size() * c);
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= r) throw DimensionError("gather_rows: row index out of range");
        std::copy_n(x.node()->data.data() + index[i] * c, c, out.data() + i * c);
    }
    return make_result(
        {index.size(), c}, std::move(out), {&x},
        [c, idx = std::vector<std::size_t>(index.begin(), index.end())](TensorNode& self) {
            auto& g = self.parents[0]->ensure_grad();
            for (std::size_t i = 0; i < idx.size(); ++i) {
                Real* dst = g.data() + idx[i] * c;
                const Real* src = self.grad.data() + i * c;
                for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
            }
        },
        "gather_rows");
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols()) throw DimensionError("concat_rows: column mismatch");
    const std::size_t na = a.numel();
    std::vector<Real> out;
    out.reserve(na + b.numel());
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    return make_result(
        {a.rows() + b.rows(), a.cols()}, std::move(out), {&a, &b},
        [na](TensorNode& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                auto& g = pa.ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            }
            if (pb.requires_grad) {
                auto& g = pb.ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[na + i];
            }
        },
        "concat_rows");
}

std::size_t window_count(std::size_t length, std::size_t width, std::size_t stride) {
    if (width == 0 || stride == 0) throw DimensionError("window width and stride must be positive");
    if (length < width) {
        throw DimensionError("signal length " + std::to_string(length) + " is shorter than window " +
                             std::to_string(width));
    }
    if ((length - width) % stride != 0) {
        throw DimensionError("signal length " + std::to_string(length) + " leaves a tail of " +
                             std::to_string((length - width) % stride) + " samples with window " +
                             std::to_string(width) + " and stride " + std::to_string(stride) +
                             "; (length - window) must be divisible by stride");
    }
    return (length - width) / stride + 1;
}

Tensor unfold1d(const Tensor& signal, std::size_t width, std::size_t stride) {
    if (signal.rank() != 1 && signal.rank() != 2) throw DimensionError("unfold1d: signal must be [l] or [batch x l]");
    const std::size_t batch = signal.rank() == 1 ? 1 : signal.dim(0);
    const std::size_t len = signal.cols();
    const std::size_t n = window_count(len, width, stride);
    std::vector<Real> out(batch * n * width);
    const Real* src = signal.node()->data.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
            std::copy_n(src + b * len + i * stride, width, out.data() + (b * n + i) * width);
        }
    }
    return make_result(
        {batch * n, width}, std::move(out), {&signal},
        [batch, len, n, width, stride](TensorNode& self) {
            auto& g = self.parents[0]->ensure_grad();
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t i = 0; i < n; ++i) {
                    Real* dst = g.data() + b * len + i * stride;
                    const Real* src_g = self.grad.data() + (b * n + i) * width;
                    for (std::size_t k = 0; k < width; ++k) dst[k] += src_g[k];
                }
            }
        },
        "unfold1d");
}

Tensor conv1d(const Tensor& signal, const Tensor& kernels, const Tensor& bias, std::size_t stride) {
    if (kernels.rank() != 2) throw DimensionError("conv1d: kernels must be [h x width]");
    if (bias.numel() != kernels.dim(0)) throw DimensionError("conv1d: bias must have one value per channel");
    return add_row_bias(matmul_bt(unfold1d(signal, kernels.dim(1), stride), kernels), bias);
}

Tensor dropout(const Tensor& x, Real rate, bool training, Rng& rng) {
    if (!training || rate <= Real{0}) return x;
    if (rate >= Real{1}) throw ConfigError("dropout rate must be below 1");
    const Real keep_scale = Real{1} / (Real{1} - rate);
    std::vector<Real> mask(x.numel());
    std::vector<Real> out(x.numel());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.uniform() < static_cast<double>(rate) ? Real{0} : keep_scale;
        out[i] = x.at(i) * mask[i];
    }
    return make_result(
        x.shape(), std::move(out), {&x},
        [mask = std::move(mask)](TensorNode& self) {
            auto& g = self.parents[0]->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
        },
        "dropout");
}

Tensor sum(const Tensor& x) {
    Real total = 0;
    for (Real v : x.data()) total += v;
    return make_result(
        {}, {total}, {&x},
        [](TensorNode& self) {
            auto& g = self.parents[0]->ensure_grad();
            for (auto& v : g) v += self.grad[0];
        },
        "sum");
}

Tensor mean(const Tensor& x) {
    if (x.numel() == 0) throw DimensionError("mean of empty tensor");
    return scale(sum(x), Real{1} / static_cast<Real>(x.numel()));
}

Tensor binary_cross_entropy(const Tensor& probs, std::span<const Real> targets) {
    if (targets.size() != probs.numel()) throw DimensionError("binary_cross_entropy: target length mismatch");
    const std::size_t n = probs.numel();
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = probs.at(i), t = targets[i];
        if (!(p > 0 && p < 1)) throw NumericError("binary_cross_entropy: probability outside (0,1)");
        total -= t * std::log(p) + (1 - t) * std::log1p(-p);
    }
    return make_result(
        {}, {static_cast<Real>(total / static_cast<double>(n))}, {&probs},
        [n, t = std::vector<Real>(targets.begin(), targets.end())](TensorNode& self) {
            auto& parent = *self.parents[0];
            auto& g = parent.ensure_grad();
            const Real s = self.grad[0] / static_cast<Real>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const Real p = parent.data[i];
                g[i] += s * (p - t[i]) / (p * (Real{1} - p));
            }
        },
        "binary_cross_entropy");
}

Tensor binary_cross_entropy_with_logits(const Tensor& logits, std::span<const Real> targets) {
    if (targets.size() != logits.numel()) {
        throw DimensionError("binary_cross_entropy_with_logits: target length mismatch");
    }
    const std::size_t n = logits.numel();
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = logits.at(i);
        // softplus(z) - t*z, written to avoid overflow for large |z|.
        total += std::max(z, 0.0) - targets[i] * z + std::log1p(std::exp(-std::abs(z)));
    }
    return make_result(
        {}, {static_cast<Real>(total / static_cast<double>(n))}, {&logits},
        [n, t = std::vector<Real>(targets.begin(), targets.end())](TensorNode& self) {
            auto& parent = *self.parents[0];
            auto& g = parent.ensure_grad();
            const Real s = self.grad[0] / static_cast<Real>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const Real z = parent.data[i];
                const Real sig = z >= 0 ? Real{1} / (Real{1} + std::exp(-z)) : std::exp(z) / (Real{1} + std::exp(z));
                g[i] += s * (sig - t[i]);
            }
        },
        "binary_cross_entropy_with_logits");
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionLayout& layout,
                 AttentionProbs* probs_out) {
    const std::size_t G = layout.groups, TQ = layout.queries, TK = layout.keys, H = layout.heads;
    const std::size_t h = q.cols();
    if (H == 0 || h % H != 0) {
        throw ConfigError("attention: hidden size " + std::to_string(h) + " not divisible by " + std::to_string(H) +
                          " heads");
    }
    if (q.rows() != G * TQ || k.rows() != G * TK || v.rows() != G * TK || k.cols() != h || v.cols() != h) {
        throw DimensionError("attention: layout does not match q " + shape_string(q.shape()) + ", k " +
                             shape_string(k.shape()) + ", v " + shape_string(v.shape()));
    }
    const std::size_t dk = h / H;
    const Real inv_sqrt = Real{1} / std::sqrt(static_cast<Real>(dk));
    const auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(h));
    const auto tq = static_cast<Eigen::Index>(TQ), tk = static_cast<Eigen::Index>(TK),
               edk = static_cast<Eigen::Index>(dk);
    const bool small = TQ * TK <= 256;

    std::vector<Real> probs(G * H * TQ * TK);
    std::vector<Real> out(G * TQ * h);
    const Real* qd = q.node()->data.data();
    const Real* kd = k.node()->data.data();
    const Real* vd = v.node()->data.data();
    for (std::size_t g = 0; g < G; ++g) {
        for (std::size_t hd = 0; hd < H; ++hd) {
            ConstStridedMap Q(qd + g * TQ * h + hd * dk, tq, edk, stride);
            ConstStridedMap K(kd + g * TK * h + hd * dk, tk, edk, stride);
            ConstStridedMap V(vd + g * TK * h + hd * dk, tk, edk, stride);
            Real* p = probs.data() + (g * H + hd) * TQ * TK;
            MatMap P(p, tq, tk);
            if (small) {
                P = (Q.lazyProduct(K.transpose())) * inv_sqrt;
            } else {
                P.noalias() = (Q * K.transpose()) * inv_sqrt;
            }
            for (std::size_t i = 0; i < TQ; ++i) softmax_inplace(p + i * TK, TK);
            StridedMap O(out.data() + g * TQ * h + hd * dk, tq, edk, stride);
            if (small) {
                O = P.lazyProduct(V);
            } else {
                O.noalias() = P * V;
            }
        }
    }
    if (probs_out) {
        probs_out->layout = layout;
        probs_out->values = probs;
    }
    return make_result(
        {G * TQ, h}, std::move(out), {&q, &k, &v},
        [G, TQ, TK, H, h, dk, inv_sqrt, small, probs = std::move(probs)](TensorNode& self) {
            auto& pq = *self.parents[0];
            auto& pk = *self.parents[1];
            auto& pv = *self.parents[2];
            const auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(h));
            const auto tq = static_cast<Eigen::Index>(TQ), tk = static_cast<Eigen::Index>(TK),
                       edk = static_cast<Eigen::Index>(dk);
            Real* gq = pq.requires_grad ? pq.ensure_grad().data() : nullptr;
            Real* gk = pk.requires_grad ? pk.ensure_grad().data() : nullptr;
            Real* gv = pv.requires_grad ? pv.ensure_grad().data() : nullptr;
            RowMat dP(tq, tk);
            for (std::size_t g = 0; g < G; ++g) {
                for (std::size_t hd = 0; hd < H; ++hd) {
                    const std::size_t qoff = g * TQ * h + hd * dk;
                    const std::size_t koff = g * TK * h + hd * dk;
                    ConstStridedMap dO(self.grad.data() + qoff, tq, edk, stride);
                    ConstStridedMap Q(pq.data.data() + qoff, tq, edk, stride);
                    ConstStridedMap K(pk.data.data() + koff, tk, edk, stride);
                    ConstStridedMap V(pv.data.data() + koff, tk, edk, stride);
                    ConstMatMap P(probs.data() + (g * H + hd) * TQ * TK, tq, tk);
                    if (gv) {
                        StridedMap dV(gv + koff, tk, edk, stride);
                        if (small) dV += P.transpose().lazyProduct(dO);
                        else dV.noalias() += P.transpose() * dO;
                    }
                    if (small) dP = dO.lazyProduct(V.transpose());
                    else dP.noalias() = dO * V.transpose();
                    // Softmax Jacobian, then the 1/sqrt(dk) scale.
                    for (Eigen::Index i = 0; i < tq; ++i) {
                        const Real dot = P.row(i).dot(dP.row(i));
                        dP.row(i) = (P.row(i).array() * (dP.row(i).array() - dot)).matrix() * inv_sqrt;
                    }
                    if (gq) {
                        StridedMap dQ(gq + qoff, tq, edk, stride);
                        if (small) dQ += dP.lazyProduct(K);
                        else dQ.noalias() += dP * K;
                    }
                    if (gk) {
                        StridedMap dK(gk + koff, tk, edk, stride);
                        if (small) dK += dP.transpose().lazyProduct(Q);
                        else dK.noalias() += dP.transpose() * Q;
                    }
                }
            }
        },
        "attention");
}

}  // namespace msdg
