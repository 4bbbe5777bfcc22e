// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "zslforge/error.hpp"
#include "zslforge/nn/matrix.hpp"
#include "zslforge/random.hpp"

namespace zslforge {

enum class Activation { linear, relu, leaky_relu };

inline constexpr double leaky_relu_slope = 0.2;

inline double activate(Activation a, double z) {
    switch (a) {
    case Activation::linear: return z;
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::leaky_relu: return z > 0.0 ? z : leaky_relu_slope * z;
    }
    return z;
}

/// Derivative of the activation; piecewise constant for every supported kind.
inline double activation_slope(Activation a, double z) {
    switch (a) {
    case Activation::linear: return 1.0;
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::leaky_relu: return z > 0.0 ? 1.0 : leaky_relu_slope;
    }
    return 1.0;
}

inline Matrix apply_activation(Activation a, const Matrix& z) {
    if (a == Activation::linear) return z;
    return z.unaryExpr([a](double v) { return activate(a, v); });
}

inline Matrix slope_mask(Activation a, const Matrix& z) {
    if (a == Activation::linear) return Matrix::Ones(z.rows(), z.cols());
    return z.unaryExpr([a](double v) { return activation_slope(a, v); });
}

/// Fully connected network. Layer l maps d_{l-1} -> d_l with weights of
/// shape (d_l x d_{l-1}); hidden layers share one activation, the last
/// layer has its own.
struct MlpParams {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    Activation hidden = Activation::leaky_relu;
    Activation output = Activation::linear;

    std::size_t num_layers() const { return weights.size(); }
    std::size_t input_dim() const { return weights.empty() ? 0 : static_cast<std::size_t>(weights.front().cols()); }
    std::size_t output_dim() const { return weights.empty() ? 0 : static_cast<std::size_t>(weights.back().rows()); }

    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> dims;
        if (weights.empty()) return dims;
        dims.push_back(input_dim());
        for (const auto& w : weights) dims.push_back(static_cast<std::size_t>(w.rows()));
        return dims;
    }

    Activation activation_of(std::size_t layer) const { return layer + 1 == num_layers() ? output : hidden; }

    /// Weights and biases ~ uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    static MlpParams create(std::span<const std::size_t> dims, Activation hidden, Activation output, Rng& rng) {
        if (dims.size() < 2) fail(ErrorCode::config_error, "mlp needs at least an input and an output dimension");
        MlpParams p;
        p.hidden = hidden;
        p.output = output;
        for (std::size_t l = 1; l < dims.size(); ++l) {
            if (dims[l] == 0 || dims[l - 1] == 0) fail(ErrorCode::config_error, "mlp layer of width zero");
            const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l - 1]));
            Matrix w(static_cast<Eigen::Index>(dims[l]), static_cast<Eigen::Index>(dims[l - 1]));
            for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -bound, bound);
            Vector b(static_cast<Eigen::Index>(dims[l]));
            for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = uniform(rng, -bound, bound);
            p.weights.push_back(std::move(w));
            p.biases.push_back(std::move(b));
        }
        return p;
    }

    static MlpParams create(std::initializer_list<std::size_t> dims, Activation hidden, Activation output, Rng& rng) {
        std::vector<std::size_t> v(dims);
        return create(std::span<const std::size_t>(v), hidden, output, rng);
    }

    MlpParams zeros_like() const {
        MlpParams z;
        z.hidden = hidden;
        z.output = output;
        for (const auto& w : weights) z.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
        for (const auto& b : biases) z.biases.push_back(Vector::Zero(b.size()));
        return z;
    }

    MlpParams& operator+=(const MlpParams& o) {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            weights[l] += o.weights[l];
            biases[l] += o.biases[l];
        }
        return *this;
    }

    MlpParams& operator*=(double s) {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            weights[l] *= s;
            biases[l] *= s;
        }
        return *this;
    }
};

inline std::vector<std::span<double>> tensors(MlpParams& p) {
    std::vector<std::span<double>> out;
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
        out.emplace_back(p.weights[l].data(), static_cast<std::size_t>(p.weights[l].size()));
        out.emplace_back(p.biases[l].data(), static_cast<std::size_t>(p.biases[l].size()));
    }
    return out;
}

inline std::vector<std::span<const double>> tensors(const MlpParams& p) {
    std::vector<std::span<const double>> out;
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
        out.emplace_back(p.weights[l].data(), static_cast<std::size_t>(p.weights[l].size()));
        out.emplace_back(p.biases[l].data(), static_cast<std::size_t>(p.biases[l].size()));
    }
    return out;
}

/// Everything the backward pass needs: the input of every layer and every
/// pre-activation.
struct ForwardCache {
    std::vector<Matrix> inputs; // inputs[l] feeds layer l; inputs[0] is x
    std::vector<Matrix> pre;    // pre[l] = inputs[l] * W_l^T + b_l
    Matrix output;
};

inline ForwardCache mlp_forward(const MlpParams& params, const Matrix& x) {
    require_cols(x, static_cast<Eigen::Index>(params.input_dim()), "mlp_forward");
    ForwardCache cache;
    cache.inputs.reserve(params.num_layers());
    cache.pre.reserve(params.num_layers());
    Matrix h = x;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        Matrix z = h * params.weights[l].transpose();
        z.rowwise() += params.biases[l].transpose();
        cache.inputs.push_back(std::move(h));
        h = apply_activation(params.activation_of(l), z);
        cache.pre.push_back(std::move(z));
    }
    cache.output = std::move(h);
    return cache;
}

inline Matrix mlp_predict(const MlpParams& params, const Matrix& x) { return mlp_forward(params, x).output; }

struct MlpGradient {
    MlpParams params;
    Matrix input;
};

/// Reverse-mode gradients of sum(upstream .* output) with respect to every
/// parameter and to the input.
inline MlpGradient mlp_backward(const MlpParams& params, const ForwardCache& cache, const Matrix& upstream) {
    require_same_shape(upstream, cache.output, "mlp_backward upstream");
    if (cache.pre.size() != params.num_layers()) fail(ErrorCode::shape_mismatch, "mlp_backward: cache from a different network");
    MlpGradient g;
    g.params = params.zeros_like();
    Matrix delta = upstream.cwiseProduct(slope_mask(params.output, cache.pre.back()));
    for (std::size_t l = params.num_layers(); l-- > 0;) {
        g.params.weights[l].noalias() = delta.transpose() * cache.inputs[l];
        g.params.biases[l] = delta.colwise().sum().transpose();
        Matrix dh = delta * params.weights[l];
        if (l > 0) {
            delta = dh.cwiseProduct(slope_mask(params.hidden, cache.pre[l - 1]));
        } else {
            g.input = std::move(dh);
        }
    }
    return g;
}

/// Gradient of a scalar-output network with respect to each input row.
inline Matrix input_gradient(const MlpParams& params, const Matrix& x) {
    if (params.output_dim() != 1) fail(ErrorCode::not_scalar_output, "input_gradient requires a scalar-output network");
    const ForwardCache cache = mlp_forward(params, x);
    return mlp_backward(params, cache, Matrix::Ones(x.rows(), 1)).input;
}

/// Hash of every activation region visited by a forward pass. Two passes
/// with equal signatures share the same piecewise-linear piece.
inline std::uint64_t activation_signature(const MlpParams& params, const ForwardCache& cache) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t l = 0; l < cache.pre.size(); ++l) {
        if (params.activation_of(l) == Activation::linear) continue;
        const Matrix& z = cache.pre[l];
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            h ^= z.data()[i] > 0.0 ? 1u : 2u;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

} // namespace zslforge
