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

#include "numcore/svd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace msdg {

namespace {

constexpr int kMaxSweeps = 80;

/// Hestenes one-sided Jacobi for a tall (rows >= cols) matrix.
SvdResultF64 jacobi_tall(Eigen::MatrixXd a) {
    const Eigen::Index rows = a.rows(), cols = a.cols();
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(cols, cols);
    const double tol = std::numeric_limits<double>::epsilon() * static_cast<double>(rows);

    bool converged = cols < 2;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        bool rotated = false;
        for (Eigen::Index p = 0; p + 1 < cols; ++p) {
            for (Eigen::Index q = p + 1; q < cols; ++q) {
                const double alpha = a.col(p).squaredNorm();
                const double beta = a.col(q).squaredNorm();
                const double gamma = a.col(p).dot(a.col(q));
                if (alpha == 0.0 || beta == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (Eigen::Index i = 0; i < rows; ++i) {
                    const double ap = a(i, p), aq = a(i, q);
                    a(i, p) = c * ap - s * aq;
                    a(i, q) = s * ap + c * aq;
                }
                for (Eigen::Index i = 0; i < cols; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
        converged = !rotated;
    }
    if (!converged) {
        throw NumericError("thin_svd: Jacobi sweeps did not converge after " + std::to_string(kMaxSweeps) +
                           " iterations");
    }

    Eigen::VectorXd sigma(cols);
    for (Eigen::Index j = 0; j < cols; ++j) sigma(j) = a.col(j).norm();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(cols));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return sigma(x) > sigma(y); });

    SvdResultF64 out;
    out.u.resize(rows, cols);
    out.s.resize(cols);
    out.v.resize(cols, cols);
    const double floor = (cols > 0 ? sigma.maxCoeff() : 0.0) * tol;
    std::vector<Eigen::Index> deficient;
    for (Eigen::Index j = 0; j < cols; ++j) {
        const Eigen::Index src = order[static_cast<std::size_t>(j)];
        out.s(j) = sigma(src);
        out.v.col(j) = v.col(src);
        if (sigma(src) > floor && sigma(src) > 0.0) {
            out.u.col(j) = a.col(src) / sigma(src);
        } else {
            out.s(j) = sigma(src) > floor ? sigma(src) : 0.0;
            deficient.push_back(j);
        }
    }
    // Null directions: complete U with unit vectors orthogonalized against
    // the accepted columns.
    Eigen::Index candidate = 0;
    for (Eigen::Index j : deficient) {
        for (;; ++candidate) {
            if (candidate >= rows) throw NumericError("thin_svd: could not complete orthonormal basis");
            Eigen::VectorXd e = Eigen::VectorXd::Unit(rows, candidate);
            for (int pass = 0; pass < 2; ++pass) {
                for (Eigen::Index k = 0; k < cols; ++k) {
                    if (k == j || (std::find(deficient.begin(), deficient.end(), k) != deficient.end() && k > j)) continue;
                    e -= out.u.col(k).dot(e) * out.u.col(k);
                }
            }
            const double n = e.norm();
            if (n > 0.5) {
                out.u.col(j) = e / n;
                ++candidate;
                break;
            }
        }
    }
    return out;
}

}  // namespace

SvdResultF64 thin_svd(const Eigen::MatrixXd& m) {
    if (!m.allFinite()) throw NumericError("thin_svd: non-finite input");
    if (m.rows() >= m.cols()) return jacobi_tall(m);
    SvdResultF64 t = jacobi_tall(m.transpose());
    return {std::move(t.v), std::move(t.s), std::move(t.u)};
}

SvdResult thin_svd(const Tensor& m) {
    if (m.rank() != 2) throw DimensionError("thin_svd: expected a matrix, got " + shape_string(m.shape()));
    const auto a = static_cast<Eigen::Index>(m.dim(0)), b = static_cast<Eigen::Index>(m.dim(1));
    Eigen::MatrixXd md(a, b);
    for (Eigen::Index i = 0; i < a; ++i) {
        for (Eigen::Index j = 0; j < b; ++j) md(i, j) = static_cast<double>(m.at(static_cast<std::size_t>(i * b + j)));
    }
    const SvdResultF64 r = thin_svd(md);
    auto to_tensor = [](const Eigen::MatrixXd& x) {
        std::vector<Real> values(static_cast<std::size_t>(x.size()));
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            for (Eigen::Index j = 0; j < x.cols(); ++j) {
                values[static_cast<std::size_t>(i * x.cols() + j)] = static_cast<Real>(x(i, j));
            }
        }
        return Tensor::from({static_cast<std::size_t>(x.rows()), static_cast<std::size_t>(x.cols())}, std::move(values));
    };
    std::vector<Real> s(static_cast<std::size_t>(r.s.size()));
    for (Eigen::Index i = 0; i < r.s.size(); ++i) s[static_cast<std::size_t>(i)] = static_cast<Real>(r.s(i));
    const std::size_t q = s.size();
    return {to_tensor(r.u), Tensor::from({q}, std::move(s)), to_tensor(r.v)};
}

Eigen::MatrixXd low_rank_approximation(const SvdResultF64& svd, Eigen::Index rank) {
    rank = std::min(rank, svd.s.size());
    return svd.u.leftCols(rank) * svd.s.head(rank).asDiagonal() * svd.v.leftCols(rank).transpose();
}

}  // namespace msdg
