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

#include "numcore/adam.hpp"

#include <cmath>

namespace msdg {

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) {
            throw UsageError("adam_step: parameter " + std::to_string(i) + " has no gradient");
        }
    }
    if (state.first_moment.size() != params.size()) {
        state.first_moment.assign(params.size(), {});
        state.second_moment.assign(params.size(), {});
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.first_moment[i].assign(params[i].numel(), 0.0);
            state.second_moment[i].assign(params[i].numel(), 0.0);
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    // With beta == 0 the correction term is 1 - 0^t = 1.
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto values = params[i].mutable_data();
        auto grads = params[i].grad();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        if (m.size() != values.size()) throw UsageError("adam_step: moment buffer shape changed");
        for (std::size_t j = 0; j < values.size(); ++j) {
            const double g = static_cast<double>(grads[j]);
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            const double m_hat = m[j] / c1;
            const double v_hat = v[j] / c2;
            values[j] = static_cast<Real>(static_cast<double>(values[j]) - lr * m_hat / (std::sqrt(v_hat) + state.eps));
        }
    }
}

void zero_grads(std::vector<Tensor>& params) {
    for (auto& p : params) p.zero_grad();
}

}  // namespace msdg
