// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "zslforge/error.hpp"

namespace zslforge {

/// Row-major dense matrix; rows are samples throughout the library.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_cols(const Matrix& m, Eigen::Index cols, const std::string& what) {
    if (m.cols() != cols) {
        fail(ErrorCode::shape_mismatch,
             what + ": expected " + std::to_string(cols) + " columns, got " + std::to_string(m.cols()));
    }
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const std::string& what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        fail(ErrorCode::shape_mismatch,
             what + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                 std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

/// Rows of `m` selected by `idx`, in order.
inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

inline Matrix hconcat(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) fail(ErrorCode::shape_mismatch, "hconcat: row counts differ");
    Matrix out(a.rows(), a.cols() + b.cols());
    out.leftCols(a.cols()) = a;
    out.rightCols(b.cols()) = b;
    return out;
}

/// Flat mutable/const views over every parameter tensor of a container.
/// Optimizers and the finite-difference checker work through these.
inline std::vector<std::span<double>> tensors(Matrix& m) { return {std::span<double>(m.data(), static_cast<std::size_t>(m.size()))}; }
inline std::vector<std::span<const double>> tensors(const Matrix& m) {
    return {std::span<const double>(m.data(), static_cast<std::size_t>(m.size()))};
}

} // namespace zslforge
