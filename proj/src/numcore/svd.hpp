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

#include <Eigen/Core>

#include "numcore/tensor.hpp"

namespace msdg {

/// Thin factorization M = U diag(S) V^T with q = min(a, b) columns, singular
/// values nonincreasing.
struct SvdResult {
    Tensor u;  // [a x q]
    Tensor s;  // [q]
    Tensor v;  // [b x q]
};

struct SvdResultF64 {
    Eigen::MatrixXd u;
    Eigen::VectorXd s;
    Eigen::MatrixXd v;
};

/// One-sided Jacobi SVD, always computed in double precision. Not part of
/// the autodiff graph. Throws NumericError if the sweeps do not converge.
SvdResultF64 thin_svd(const Eigen::MatrixXd& m);
SvdResult thin_svd(const Tensor& m);

/// Best rank-r approximation U_r S_r V_r^T.
Eigen::MatrixXd low_rank_approximation(const SvdResultF64& svd, Eigen::Index rank);

}  // namespace msdg
