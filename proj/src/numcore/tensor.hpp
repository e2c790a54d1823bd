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

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "common/errors.hpp"

namespace msdg {

// The core is built at 32-bit by default; the gradient-check build defines
// MSDG_CORE_DOUBLE to get a 64-bit instance of the same code.
#ifdef MSDG_CORE_DOUBLE
using Real = double;
#else
using Real = float;
#endif

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct TensorNode {
    Shape shape;
    std::vector<Real> data;
    std::vector<Real> grad;
    bool requires_grad = false;
    // Recorded graph edge; cleared once backward has consumed it.
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    std::vector<Real>& ensure_grad();
};

/// Dense row-major tensor handle with value semantics for the payload and
/// shared ownership of the graph node. Copies alias the same node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, Real value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<Real> values, bool requires_grad = false);
    static Tensor scalar(Real value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t numel() const { return node_->data.size(); }
    /// Extent of the last axis (1 for scalars).
    std::size_t cols() const;
    /// Product of all leading extents.
    std::size_t rows() const;

    std::span<const Real> data() const { return node_->data; }
    /// In-place access for leaves (initialization, optimizer updates).
    std::span<Real> mutable_data() { return node_->data; }
    Real item() const;
    Real at(std::size_t flat) const { return node_->data.at(flat); }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool flag) { node_->requires_grad = flag; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const Real> grad() const { return node_->grad; }
    std::span<Real> mutable_grad() { return node_->ensure_grad(); }
    void zero_grad();

    /// Fresh leaf holding a copy of the values, detached from any graph.
    Tensor detach() const;

    TensorNode* node() const { return node_.get(); }
    const std::shared_ptr<TensorNode>& node_ptr() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

/// Reverse-mode sweep from a scalar. Leaf gradients accumulate across calls;
/// the recorded graph is released afterwards.
void backward(const Tensor& loss);

}  // namespace msdg
