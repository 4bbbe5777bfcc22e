// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "zslforge/error.hpp"
#include "zslforge/nn/matrix.hpp"
#include "zslforge/nn/softmax.hpp"
#include "zslforge/random.hpp"
#include "zslforge/zsl/classifier.hpp"

namespace zslforge {

/// Margin ranking hinge, row-wise with one chosen negative per row:
///   mean_i max(0, delta - a_i . p_i + n_i . p_i)
/// `grad_pred`, when given, receives d loss / d a_pred.
inline double rank_hinge(const Matrix& a_true, const Matrix& a_pred, const Matrix& a_neg, double delta,
                         Matrix* grad_pred = nullptr) {
    require_same_shape(a_true, a_pred, "rank_loss");
    require_same_shape(a_neg, a_pred, "rank_loss negatives");
    const auto B = static_cast<double>(a_pred.rows());
    double total = 0.0;
    if (grad_pred) *grad_pred = Matrix::Zero(a_pred.rows(), a_pred.cols());
    for (Eigen::Index i = 0; i < a_pred.rows(); ++i) {
        const double margin = delta - a_true.row(i).dot(a_pred.row(i)) + a_neg.row(i).dot(a_pred.row(i));
        if (margin > 0.0) {
            total += margin;
            if (grad_pred) grad_pred->row(i) = (a_neg.row(i) - a_true.row(i)) / B;
        }
    }
    return total / B;
}

/// Single-row ranking loss: one negative drawn uniformly from the rows of
/// `negatives`.
inline double rank_loss(const Vector& a_true, const Vector& a_pred, const Matrix& negatives, double delta, Rng& rng) {
    if (negatives.rows() == 0) fail(ErrorCode::no_negatives, "rank_loss needs at least one negative embedding");
    const auto pick = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(negatives.rows())));
    return rank_hinge(a_true.transpose(), a_pred.transpose(), negatives.row(pick), delta);
}

/// Mean cross-entropy of generated features under a frozen classifier and
/// its gradient with respect to the features.
inline LossAndGrad cls_loss(const SoftmaxClassifier& classifier, const Matrix& x_gen, std::span<const std::size_t> labels) {
    if (!classifier.trained) fail(ErrorCode::untrained_classifier, "cls_loss: classifier has not been trained");
    auto ce = softmax_cross_entropy(classifier.logits(x_gen), labels);
    return {ce.value, ce.grad * classifier.weights};
}

struct MiLoss {
    double value = 0.0;
    Matrix grad_x;      // d value / d x_gen
    Matrix grad_critic; // d value / d M
};

/// Contrastive bound with a bilinear critic:
///   s_ij = x_i^T M a_j,  loss = -(1/B) sum_i [s_ii - logsumexp_j s_ij].
inline MiLoss mi_loss(const Matrix& critic, const Matrix& x_gen, const Matrix& a) {
    if (x_gen.rows() != a.rows() || x_gen.rows() == 0) fail(ErrorCode::shape_mismatch, "mi_loss: batch rows");
    require_cols(x_gen, critic.rows(), "mi_loss features");
    require_cols(a, critic.cols(), "mi_loss embeddings");
    const auto B = static_cast<double>(x_gen.rows());
    const Matrix am = a * critic.transpose(); // B x d_feat, row j = (M a_j)^T
    const Matrix s = x_gen * am.transpose();  // B x B
    const Vector lse = logsumexp_rows(s);
    MiLoss out;
    for (Eigen::Index i = 0; i < s.rows(); ++i) out.value += lse[i] - s(i, i);
    out.value /= B;
    Matrix ds = softmax_rows(s);
    ds.diagonal().array() -= 1.0;
    ds /= B;
    out.grad_x = ds * am;
    out.grad_critic = x_gen.transpose() * ds * a;
    return out;
}

} // namespace zslforge
