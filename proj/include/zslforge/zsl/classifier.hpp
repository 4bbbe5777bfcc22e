// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "zslforge/error.hpp"
#include "zslforge/nn/adam.hpp"
#include "zslforge/nn/softmax.hpp"
#include "zslforge/random.hpp"
#include "zslforge/zsl/feature_set.hpp"

namespace zslforge {

/// Single linear layer followed by softmax.
struct SoftmaxClassifier {
    Matrix weights; // K x d_feat
    Vector biases;  // K
    std::vector<std::string> class_order;
    bool trained = false;

    std::size_t num_classes() const { return class_order.size(); }

    Matrix logits(const Matrix& x) const {
        if (!trained) fail(ErrorCode::untrained_classifier, "classifier used before training");
        require_cols(x, weights.cols(), "classifier logits");
        Matrix z = x * weights.transpose();
        z.rowwise() += biases.transpose();
        return z;
    }

    /// Class indices; ties go to the lowest class_order position.
    std::vector<std::size_t> predict(const Matrix& x) const { return argmax_rows(logits(x)); }

    std::vector<std::string> predict_labels(const Matrix& x) const {
        std::vector<std::string> out;
        for (auto i : predict(x)) out.push_back(class_order[i]);
        return out;
    }
};

inline std::vector<std::span<double>> tensors(SoftmaxClassifier& c) {
    return {std::span<double>(c.weights.data(), static_cast<std::size_t>(c.weights.size())),
            std::span<double>(c.biases.data(), static_cast<std::size_t>(c.biases.size()))};
}

inline std::vector<std::span<const double>> tensors(const SoftmaxClassifier& c) {
    return {std::span<const double>(c.weights.data(), static_cast<std::size_t>(c.weights.size())),
            std::span<const double>(c.biases.data(), static_cast<std::size_t>(c.biases.size()))};
}

struct ClassifierConfig {
    std::size_t epochs = 40;
    std::size_t batch_size = 64;
    double lr = 1e-2;
    double weight_decay = 5e-4;
    std::uint64_t seed = 0;
};

/// Mean cross-entropy of `x` against `targets` plus its parameter gradient.
inline std::pair<double, SoftmaxClassifier> classifier_loss(const SoftmaxClassifier& c, const Matrix& x,
                                                           std::span<const std::size_t> targets) {
    const auto ce = softmax_cross_entropy(c.logits(x), targets);
    SoftmaxClassifier g = c;
    g.weights.noalias() = ce.grad.transpose() * x;
    g.biases = ce.grad.colwise().sum().transpose();
    return {ce.value, std::move(g)};
}

/// Minibatch Adam on softmax cross-entropy. Every class in `classes` needs
/// at least one row; rows of other classes are rejected.
inline SoftmaxClassifier train_classifier(const FeatureSet& data, const std::vector<std::string>& classes,
                                          const ClassifierConfig& cfg) {
    data.validate();
    if (classes.empty()) fail(ErrorCode::missing_class_data, "train_classifier: no classes");
    const auto targets = label_indices(data.labels, classes);
    std::vector<std::size_t> counts(classes.size(), 0);
    for (auto t : targets) ++counts[t];
    for (std::size_t k = 0; k < classes.size(); ++k) {
        if (counts[k] == 0) fail(ErrorCode::missing_class_data, "train_classifier: no rows for class '" + classes[k] + "'");
    }

    SoftmaxClassifier c;
    c.class_order = classes;
    c.weights = Matrix::Zero(static_cast<Eigen::Index>(classes.size()), data.features.cols());
    c.biases = Vector::Zero(static_cast<Eigen::Index>(classes.size()));
    c.trained = true;

    Rng rng = make_rng(cfg.seed);
    AdamState adam = make_adam(cfg.lr, cfg.weight_decay);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t bs = std::max<std::size_t>(1, cfg.batch_size);
    std::vector<std::size_t> batch_targets;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, rng);
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t end = std::min(order.size(), start + bs);
            std::span<const std::size_t> idx(order.data() + start, end - start);
            const Matrix xb = gather_rows(data.features, idx);
            batch_targets.clear();
            for (auto i : idx) batch_targets.push_back(targets[i]);
            auto [loss, grad] = classifier_loss(c, xb, batch_targets);
            adam_update(adam, c, grad);
        }
    }
    return c;
}

} // namespace zslforge
