// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>

#include "zslforge/nn/mlp.hpp"

namespace zslforge {

struct PenaltyResult {
    double value = 0.0;
    MlpParams grad;               // d value / d critic parameters
    Vector grad_norms;            // ||dD/dx_i|| over the penalized columns
    std::size_t degenerate_rows = 0;
};

namespace detail {

inline bool has_kink(const MlpParams& params, const ForwardCache& cache, Eigen::Index row) {
    for (std::size_t l = 0; l < cache.pre.size(); ++l) {
        if (params.activation_of(l) == Activation::linear) continue;
        if ((cache.pre[l].row(row).array() == 0.0).any()) return true;
    }
    return false;
}

} // namespace detail

/// alpha * mean_i (||grad_x D(x_i)|| - 1)^2 and its gradient with respect to
/// the critic's parameters.
///
/// Only the first `penalized_cols` input columns enter the norm (the feature
/// part of a conditional critic input). With piecewise-linear activations the
/// input gradient is a product of weight matrices and constant slope masks,
/// so differentiating it a second time is a reverse pass through that linear
/// chain with the masks held fixed; bias gradients vanish.
///
/// Rows whose input gradient norm is below 1e-12 still contribute (0-1)^2 to
/// the value but are skipped in the parameter gradient and counted in
/// `degenerate_rows`.
inline PenaltyResult gradient_penalty(const MlpParams& critic, const Matrix& x_hat, double alpha,
                                      std::size_t penalized_cols = std::numeric_limits<std::size_t>::max()) {
    if (critic.output_dim() != 1) fail(ErrorCode::not_scalar_output, "gradient_penalty requires a scalar-output critic");
    require_cols(x_hat, static_cast<Eigen::Index>(critic.input_dim()), "gradient_penalty");
    const auto n_pen = static_cast<Eigen::Index>(std::min(penalized_cols, critic.input_dim()));
    const Eigen::Index batch = x_hat.rows();
    const std::size_t L = critic.num_layers();

    Matrix x = x_hat;
    ForwardCache cache = mlp_forward(critic, x);
    for (int attempt = 0; attempt < 4; ++attempt) {
        bool moved = false;
        for (Eigen::Index i = 0; i < batch; ++i) {
            if (detail::has_kink(critic, cache, i)) {
                x.row(i).head(n_pen).array() += 1e-12;
                moved = true;
            }
        }
        if (!moved) break;
        cache = mlp_forward(critic, x);
    }

    std::vector<Matrix> masks(L);
    for (std::size_t l = 0; l < L; ++l) masks[l] = slope_mask(critic.activation_of(l), cache.pre[l]);

    // Forward sweep of the linear chain: u_L = mask_L, v_l = u_l W_l,
    // u_{l-1} = v_l .* mask_{l-1}; the input gradient is v_1.
    std::vector<Matrix> u(L);
    u[L - 1] = masks[L - 1];
    Matrix v;
    for (std::size_t l = L; l-- > 0;) {
        v = u[l] * critic.weights[l];
        if (l > 0) u[l - 1] = v.cwiseProduct(masks[l - 1]);
    }
    const Matrix g = v.leftCols(n_pen);

    PenaltyResult out;
    out.grad = critic.zeros_like();
    out.grad_norms = g.rowwise().norm();

    Matrix gv = Matrix::Zero(batch, static_cast<Eigen::Index>(critic.input_dim()));
    double total = 0.0;
    for (Eigen::Index i = 0; i < batch; ++i) {
        const double norm = out.grad_norms[i];
        total += (norm - 1.0) * (norm - 1.0);
        if (norm < 1e-12) {
            ++out.degenerate_rows;
            continue;
        }
        gv.row(i).head(n_pen) = (alpha / static_cast<double>(batch)) * 2.0 * (norm - 1.0) / norm * g.row(i);
    }
    out.value = alpha * total / static_cast<double>(batch);

    // Reverse sweep: dW_l = u_l^T Gv_l, Gu_l = Gv_l W_l^T, Gv_{l+1} = Gu_l .* mask_l.
    for (std::size_t l = 0; l < L; ++l) {
        out.grad.weights[l].noalias() = u[l].transpose() * gv;
        if (l + 1 < L) {
            Matrix gu = gv * critic.weights[l].transpose();
            gv = gu.cwiseProduct(masks[l]);
        }
    }
    return out;
}

} // namespace zslforge
