// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "zslforge/error.hpp"
#include "zslforge/nn/adam.hpp"
#include "zslforge/nn/mlp.hpp"
#include "zslforge/nn/softmax.hpp"
#include "zslforge/random.hpp"
#include "zslforge/zsl/feature_set.hpp"

namespace zslforge {

struct OodConfig {
    std::size_t hidden = 512;
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    double weight_decay = 5e-4;
    double percentile = 0.95; // fraction of seen-train entropies at or below tau
    std::uint64_t seed = 0;
};

/// Seen-class softmax network whose output entropy separates seen from
/// unseen inputs.
struct OodDetector {
    MlpParams net;                        // d_feat -> hidden -> K_seen
    std::vector<std::string> seen_classes;
    double tau = std::numeric_limits<double>::infinity(); // nats
    bool trained = false;

    Vector entropy(const Matrix& x) const { return softmax_entropy(mlp_predict(net, x)); }
};

enum class Route { seen, unseen };

/// Linear-interpolated quantile (q in [0, 1]) of `v`.
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) fail(ErrorCode::empty_input, "quantile of empty sample");
    if (!(q >= 0.0 && q <= 1.0)) fail(ErrorCode::config_error, "quantile outside [0, 1]");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Seen rows are trained toward their one-hot class, synthetic unseen rows
/// toward the uniform distribution over seen classes. tau is the
/// `percentile` quantile of the seen-train entropies.
inline OodDetector train_ood(const FeatureSet& real_seen, const FeatureSet& synth_unseen, const OodConfig& cfg) {
    if (real_seen.empty() || synth_unseen.empty()) fail(ErrorCode::empty_input, "train_ood: both feature sets must be non-empty");
    real_seen.validate();
    synth_unseen.validate();
    if (real_seen.dim() != synth_unseen.dim()) fail(ErrorCode::shape_mismatch, "train_ood: feature widths differ");
    if (cfg.hidden == 0) fail(ErrorCode::config_error, "train_ood: hidden width must be positive");

    OodDetector det;
    det.seen_classes = real_seen.classes();
    std::sort(det.seen_classes.begin(), det.seen_classes.end());
    const std::size_t K = det.seen_classes.size();
    const auto Ki = static_cast<Eigen::Index>(K);

    const std::size_t n_seen = real_seen.size();
    const std::size_t n = n_seen + synth_unseen.size();
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(real_seen.dim()));
    x.topRows(static_cast<Eigen::Index>(n_seen)) = real_seen.features;
    x.bottomRows(static_cast<Eigen::Index>(synth_unseen.size())) = synth_unseen.features;
    Matrix targets = Matrix::Constant(static_cast<Eigen::Index>(n), Ki, 1.0 / static_cast<double>(K));
    const auto seen_idx = label_indices(real_seen.labels, det.seen_classes);
    for (std::size_t i = 0; i < n_seen; ++i) {
        targets.row(static_cast<Eigen::Index>(i)).setZero();
        targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(seen_idx[i])) = 1.0;
    }

    Rng rng = make_rng(cfg.seed);
    det.net = MlpParams::create({real_seen.dim(), cfg.hidden, K}, Activation::relu, Activation::linear, rng);
    AdamState adam = make_adam(cfg.lr, cfg.weight_decay);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t bs = std::max<std::size_t>(1, cfg.batch_size);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, rng);
        for (std::size_t start = 0; start < n; start += bs) {
            std::span<const std::size_t> idx(order.data() + start, std::min(n, start + bs) - start);
            const ForwardCache cache = mlp_forward(det.net, gather_rows(x, idx));
            const LossAndGrad ce = softmax_cross_entropy(cache.output, gather_rows(targets, idx));
            const MlpGradient g = mlp_backward(det.net, cache, ce.grad);
            adam_update(adam, det.net, g.params);
        }
    }

    const Vector h = det.entropy(real_seen.features);
    det.tau = quantile(std::vector<double>(h.data(), h.data() + h.size()), cfg.percentile);
    det.trained = true;
    return det;
}

/// Entropy strictly above tau routes to the unseen classifier.
inline Route entropy_route(double entropy, double tau) { return entropy > tau ? Route::unseen : Route::seen; }

inline std::vector<Route> entropy_route(const OodDetector& det, const Matrix& x) {
    if (!det.trained) fail(ErrorCode::config_error, "entropy_route: detector is untrained");
    const Vector h = det.entropy(x);
    std::vector<Route> out(static_cast<std::size_t>(h.size()));
    for (Eigen::Index i = 0; i < h.size(); ++i) out[static_cast<std::size_t>(i)] = entropy_route(h(i), det.tau);
    return out;
}

} // namespace zslforge
