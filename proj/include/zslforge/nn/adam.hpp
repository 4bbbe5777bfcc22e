// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "zslforge/error.hpp"
#include "zslforge/nn/matrix.hpp"

namespace zslforge {

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

inline AdamState make_adam(double lr, double weight_decay) {
    AdamState s;
    s.lr = lr;
    s.weight_decay = weight_decay;
    return s;
}

/// In-place Adam update with bias correction. Weight decay enters as
/// lambda * theta added to the gradient before the moment updates.
template <class Params>
void adam_update(AdamState& state, Params& params, const Params& grads) {
    auto p = tensors(params);
    const auto g = tensors(grads);
    if (p.size() != g.size()) fail(ErrorCode::shape_mismatch, "adam: parameter/gradient tensor count differs");
    if (state.first_moment.empty()) {
        for (const auto& t : p) {
            state.first_moment.emplace_back(t.size(), 0.0);
            state.second_moment.emplace_back(t.size(), 0.0);
        }
    }
    if (state.first_moment.size() != p.size()) fail(ErrorCode::shape_mismatch, "adam: state does not match parameters");
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k].size() != g[k].size() || p[k].size() != state.first_moment[k].size()) {
            fail(ErrorCode::shape_mismatch, "adam: tensor size differs");
        }
    }

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < p.size(); ++k) {
        auto& m = state.first_moment[k];
        auto& v = state.second_moment[k];
        double* theta = p[k].data();
        const double* grad = g[k].data();
        for (std::size_t i = 0; i < p[k].size(); ++i) {
            const double gi = grad[i] + state.weight_decay * theta[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            theta[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

/// Value-semantics wrapper: returns the updated parameters and state.
template <class Params>
std::pair<Params, AdamState> adam_step(AdamState state, Params params, const Params& grads) {
    adam_update(state, params, grads);
    return {std::move(params), std::move(state)};
}

} // namespace zslforge
