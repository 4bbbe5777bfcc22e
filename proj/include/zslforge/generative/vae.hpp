// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "zslforge/error.hpp"
#include "zslforge/nn/adam.hpp"
#include "zslforge/nn/mlp.hpp"
#include "zslforge/random.hpp"
#include "zslforge/zsl/feature_set.hpp"

namespace zslforge {

inline constexpr double logvar_floor = -30.0;
inline constexpr double logvar_ceiling = 20.0;

/// Standard deviation from a log-variance. At (or below) the floor the
/// sample collapses onto the mean exactly.
inline double logvar_to_sigma(double lv) {
    if (lv <= logvar_floor) return 0.0;
    return std::exp(0.5 * std::min(lv, logvar_ceiling));
}

struct VaeConfig {
    std::size_t d_z = 8;
    std::size_t hidden = 128; // 0 => single linear layer per side
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    double weight_decay = 5e-4;
    double beta = 1.0; // KL weight
    std::uint64_t seed = 0;
};

/// Encoder maps [x, c] -> [mu, log sigma^2]; decoder maps [z, c] -> x.
/// The condition width is zero for the noise VAE and d_emb for the
/// conditional (VAE-only generator) variant.
struct VaeModel {
    MlpParams encoder;
    MlpParams decoder;
    std::size_t d_z = 0;
    std::size_t d_cond = 0;
    bool trained = false;
    std::vector<double> loss_trace;

    std::size_t d_feat() const { return decoder.output_dim(); }

    static VaeModel create(std::size_t d_feat, std::size_t d_cond, const VaeConfig& cfg, Rng& rng) {
        if (cfg.d_z == 0 || d_feat == 0) fail(ErrorCode::config_error, "vae: zero dimension");
        VaeModel m;
        m.d_z = cfg.d_z;
        m.d_cond = d_cond;
        if (cfg.hidden == 0) {
            m.encoder = MlpParams::create({d_feat + d_cond, 2 * cfg.d_z}, Activation::leaky_relu, Activation::linear, rng);
            m.decoder = MlpParams::create({cfg.d_z + d_cond, d_feat}, Activation::leaky_relu, Activation::linear, rng);
        } else {
            m.encoder = MlpParams::create({d_feat + d_cond, cfg.hidden, 2 * cfg.d_z}, Activation::leaky_relu, Activation::linear, rng);
            m.decoder = MlpParams::create({cfg.d_z + d_cond, cfg.hidden, d_feat}, Activation::leaky_relu, Activation::linear, rng);
        }
        return m;
    }
};

inline std::vector<std::span<double>> tensors(VaeModel& m) {
    auto out = tensors(m.encoder);
    auto dec = tensors(m.decoder);
    out.insert(out.end(), dec.begin(), dec.end());
    return out;
}

inline std::vector<std::span<const double>> tensors(const VaeModel& m) {
    auto out = tensors(std::as_const(m.encoder));
    auto dec = tensors(std::as_const(m.decoder));
    out.insert(out.end(), dec.begin(), dec.end());
    return out;
}

struct LatentCode {
    Matrix mu;
    Matrix logvar;
};

inline LatentCode vae_encode(const VaeModel& m, const Matrix& x, const Matrix& cond = {}) {
    require_cols(x, static_cast<Eigen::Index>(m.encoder.input_dim() - m.d_cond), "vae_encode");
    const Matrix in = m.d_cond ? hconcat(x, cond) : x;
    const Matrix out = mlp_predict(m.encoder, in);
    const auto dz = static_cast<Eigen::Index>(m.d_z);
    return {out.leftCols(dz), out.rightCols(dz)};
}

/// z = mu + sigma .* eps with eps ~ N(0, I) from `rng`.
inline Matrix reparameterize(const LatentCode& code, Rng& rng) {
    Matrix z = code.mu;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) += logvar_to_sigma(code.logvar(i, j)) * standard_normal(rng);
    }
    return z;
}

inline Matrix standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix e(rows, cols);
    for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = standard_normal(rng);
    return e;
}

struct VaeLosses {
    double reconstruction = 0.0; // mean squared error over all entries
    double kl = 0.0;             // batch mean of KL(q(z|x) || N(0, I))
};

struct VaeEvaluation {
    VaeLosses losses;
    double total = 0.0; // reconstruction + beta * kl
    VaeModel grad;
    std::uint64_t regime = 0;
};

/// Losses and exact parameter gradients for a fixed reparameterization
/// draw `eps` (batch x d_z).
inline VaeEvaluation vae_evaluate(const VaeModel& m, const Matrix& x, const Matrix& eps, double beta, const Matrix& cond = {}) {
    require_cols(x, static_cast<Eigen::Index>(m.d_feat()), "vae_losses");
    if (eps.rows() != x.rows() || eps.cols() != static_cast<Eigen::Index>(m.d_z)) fail(ErrorCode::shape_mismatch, "vae: eps shape");
    if (m.d_cond && cond.rows() != x.rows()) fail(ErrorCode::shape_mismatch, "vae: condition rows");
    const auto B = static_cast<double>(x.rows());
    const auto dz = static_cast<Eigen::Index>(m.d_z);

    const ForwardCache enc = mlp_forward(m.encoder, m.d_cond ? hconcat(x, cond) : x);
    const Matrix mu = enc.output.leftCols(dz);
    const Matrix lv = enc.output.rightCols(dz);
    Matrix sigma(lv.rows(), lv.cols());
    for (Eigen::Index i = 0; i < lv.size(); ++i) sigma.data()[i] = logvar_to_sigma(lv.data()[i]);
    const Matrix z = mu + sigma.cwiseProduct(eps);
    const ForwardCache dec = mlp_forward(m.decoder, m.d_cond ? hconcat(z, cond) : z);

    VaeEvaluation ev;
    const Matrix diff = dec.output - x;
    ev.losses.reconstruction = diff.squaredNorm() / static_cast<double>(diff.size());
    double kl = 0.0;
    for (Eigen::Index i = 0; i < lv.size(); ++i) {
        const double l = std::clamp(lv.data()[i], logvar_floor, logvar_ceiling);
        kl += -0.5 * (1.0 + l - mu.data()[i] * mu.data()[i] - std::exp(l));
    }
    ev.losses.kl = kl / B;
    ev.total = ev.losses.reconstruction + beta * ev.losses.kl;

    const Matrix d_out = diff * (2.0 / static_cast<double>(diff.size()));
    const MlpGradient gdec = mlp_backward(m.decoder, dec, d_out);
    const Matrix dz_mat = gdec.input.leftCols(dz);

    Matrix d_enc(enc.output.rows(), enc.output.cols());
    for (Eigen::Index i = 0; i < mu.rows(); ++i) {
        for (Eigen::Index j = 0; j < dz; ++j) {
            const double l = lv(i, j);
            const bool clamped = l <= logvar_floor || l >= logvar_ceiling;
            d_enc(i, j) = dz_mat(i, j) + beta * mu(i, j) / B;
            double dl = clamped ? 0.0 : dz_mat(i, j) * 0.5 * sigma(i, j) * eps(i, j);
            if (!clamped) dl += beta * (-0.5) * (1.0 - std::exp(l)) / B;
            d_enc(i, dz + j) = dl;
        }
    }
    const MlpGradient genc = mlp_backward(m.encoder, enc, d_enc);
    ev.grad.encoder = genc.params;
    ev.grad.decoder = gdec.params;
    ev.grad.d_z = m.d_z;
    ev.grad.d_cond = m.d_cond;
    ev.regime = activation_signature(m.encoder, enc) ^ (activation_signature(m.decoder, dec) * 31);
    return ev;
}

/// Reconstruction MSE and closed-form KL for one reparameterized draw.
inline VaeLosses vae_losses(const VaeModel& m, const Matrix& x, Rng& rng, const Matrix& cond = {}) {
    const Matrix eps = standard_normal_matrix(x.rows(), static_cast<Eigen::Index>(m.d_z), rng);
    return vae_evaluate(m, x, eps, 1.0, cond).losses;
}

/// Trains on `x` (optionally conditioned on `cond`, row-aligned).
inline VaeModel train_vae_on(const Matrix& x, const Matrix& cond, const VaeConfig& cfg) {
    if (x.rows() == 0) fail(ErrorCode::empty_input, "train_vae: no feature rows");
    Rng rng = make_rng(cfg.seed);
    VaeModel m = VaeModel::create(static_cast<std::size_t>(x.cols()), static_cast<std::size_t>(cond.cols()), cfg, rng);
    AdamState adam = make_adam(cfg.lr, cfg.weight_decay);
    std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t bs = std::max<std::size_t>(1, cfg.batch_size);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, rng);
        double total = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            std::span<const std::size_t> idx(order.data() + start, std::min(order.size(), start + bs) - start);
            const Matrix xb = gather_rows(x, idx);
            const Matrix cb = m.d_cond ? gather_rows(cond, idx) : Matrix{};
            const Matrix eps = standard_normal_matrix(xb.rows(), static_cast<Eigen::Index>(m.d_z), rng);
            VaeEvaluation ev = vae_evaluate(m, xb, eps, cfg.beta, cb);
            adam_update(adam, m, ev.grad);
            total += ev.total;
            ++batches;
        }
        m.loss_trace.push_back(total / static_cast<double>(batches));
    }
    m.trained = true;
    return m;
}

/// Unconditional VAE over seen-class features; source of data-driven noise.
inline VaeModel train_vae(const FeatureSet& seen, const VaeConfig& cfg) {
    if (seen.empty()) fail(ErrorCode::empty_input, "train_vae: empty feature set");
    seen.validate();
    return train_vae_on(seen.features, Matrix{}, cfg);
}

} // namespace zslforge
