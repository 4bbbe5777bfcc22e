// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "zslforge/nn/matrix.hpp"

namespace zslforge {

/// Row-wise log(sum(exp(row))), shifted by the row max for stability.
inline Vector logsumexp_rows(const Matrix& z) {
    Vector out(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double m = z.row(i).maxCoeff();
        out[i] = m + std::log((z.row(i).array() - m).exp().sum());
    }
    return out;
}

inline Matrix softmax_rows(const Matrix& z) {
    const Vector lse = logsumexp_rows(z);
    Matrix p = z;
    for (Eigen::Index i = 0; i < z.rows(); ++i) p.row(i) = (z.row(i).array() - lse[i]).exp();
    return p;
}

/// Shannon entropy (nats) of softmax(z) for each row.
inline Vector softmax_entropy(const Matrix& z) {
    const Vector lse = logsumexp_rows(z);
    Vector h(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            const double logp = z(i, j) - lse[i];
            acc -= std::exp(logp) * logp;
        }
        h[i] = acc;
    }
    return h;
}

struct LossAndGrad {
    double value = 0.0;
    Matrix grad; // d value / d input
};

/// Mean cross-entropy of integer targets under softmax(logits).
inline LossAndGrad softmax_cross_entropy(const Matrix& logits, std::span<const std::size_t> targets) {
    if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) fail(ErrorCode::shape_mismatch, "cross entropy: target count");
    const double n = static_cast<double>(logits.rows());
    LossAndGrad out;
    out.grad = softmax_rows(logits);
    const Vector lse = logsumexp_rows(logits);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const auto t = static_cast<Eigen::Index>(targets[static_cast<std::size_t>(i)]);
        if (t >= logits.cols()) fail(ErrorCode::shape_mismatch, "cross entropy: target out of range");
        out.value += lse[i] - logits(i, t);
        out.grad(i, t) -= 1.0;
    }
    out.value /= n;
    out.grad /= n;
    return out;
}

/// Mean cross-entropy of soft target rows (each summing to one).
inline LossAndGrad softmax_cross_entropy(const Matrix& logits, const Matrix& targets) {
    require_same_shape(logits, targets, "soft cross entropy");
    const double n = static_cast<double>(logits.rows());
    LossAndGrad out;
    const Vector lse = logsumexp_rows(logits);
    const Matrix p = softmax_rows(logits);
    out.grad = Matrix(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double mass = targets.row(i).sum();
        out.value += mass * lse[i] - targets.row(i).dot(logits.row(i));
        out.grad.row(i) = mass * p.row(i) - targets.row(i);
    }
    out.value /= n;
    out.grad /= n;
    return out;
}

/// Index of the largest entry of each row; ties go to the lowest index.
inline std::vector<std::size_t> argmax_rows(const Matrix& z) {
    std::vector<std::size_t> out(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < z.cols(); ++j) {
            if (z(i, j) > z(i, best)) best = j;
        }
        out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
    }
    return out;
}

} // namespace zslforge
