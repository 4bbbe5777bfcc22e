// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "zslforge/error.hpp"
#include "zslforge/generative/sdr.hpp"
#include "zslforge/random.hpp"
#include "zslforge/zsl/classifier.hpp"
#include "zslforge/zsl/feature_set.hpp"
#include "zslforge/zsl/metrics.hpp"
#include "zslforge/zsl/ood.hpp"
#include "zslforge/zsl/splits.hpp"

namespace zslforge {

/// Produces n_per_class synthetic rows for each requested class.
using Synthesizer = std::function<FeatureSet(const std::vector<std::string>& classes, std::size_t n_per_class, Rng& rng)>;

/// Routes each row of a test set to the seen or unseen classifier.
using Router = std::function<std::vector<Route>(const FeatureSet& test)>;

struct ProtocolConfig {
    std::size_t n_per_class = 200; // synthetic rows per unseen class
    ClassifierConfig cls{};
    OodConfig ood{};
    std::uint64_t seed = 0;
};

/// Synthesizer backed by a trained generator bundle.
inline Synthesizer bundle_synthesizer(const GeneratorBundle& b, const EmbeddingTable& embeddings, const FeatureSet& seen,
                                      const VaeModel& vae) {
    return [&b, &embeddings, &seen, &vae](const std::vector<std::string>& classes, std::size_t n, Rng& rng) {
        return synthesize(b, classes, n, embeddings, seen, vae, rng);
    };
}

inline void require_no_leakage(const SplitSpec& split, const FeatureSet& test, bool allow_seen) {
    const std::unordered_set<std::string> seen(split.seen.begin(), split.seen.end());
    const std::unordered_set<std::string> unseen(split.unseen.begin(), split.unseen.end());
    for (const auto& l : test.labels) {
        if (!allow_seen && seen.count(l)) fail(ErrorCode::leakage_error, "test label '" + l + "' belongs to a seen class");
        if (!seen.count(l) && !unseen.count(l)) fail(ErrorCode::unknown_class, "test label '" + l + "' is outside the split");
    }
}

/// Classes of `split_side` that occur in `test`, in split order.
inline std::vector<std::string> classes_present(const std::vector<std::string>& split_side, const FeatureSet& test) {
    const auto present = test.classes();
    const std::unordered_set<std::string> p(present.begin(), present.end());
    std::vector<std::string> out;
    for (const auto& c : split_side) {
        if (p.count(c)) out.push_back(c);
    }
    return out;
}

/// Unseen-only classifier trained on synthesized features.
inline SoftmaxClassifier train_unseen_classifier(const Synthesizer& synth, const SplitSpec& split, const ProtocolConfig& cfg, Rng& rng) {
    const FeatureSet fake = synth(split.unseen, cfg.n_per_class, rng);
    ClassifierConfig c = cfg.cls;
    c.seed = derive_seed(cfg.seed, "unseen-classifier");
    return train_classifier(fake, split.unseen, c);
}

/// ZSL: synthesize unseen features, train a fresh unseen-only classifier on
/// them, score mean class accuracy on real unseen test rows.
inline RunResult zsl_protocol(const Synthesizer& synth, const SplitSpec& split, const FeatureSet& real_unseen_test,
                              const ProtocolConfig& cfg) {
    split.validate();
    real_unseen_test.validate();
    require_no_leakage(split, real_unseen_test, false);
    if (real_unseen_test.empty()) fail(ErrorCode::empty_input, "zsl_protocol: empty test set");
    Rng rng = make_rng(derive_seed(cfg.seed, "zsl-synthesis"));
    const SoftmaxClassifier clf = train_unseen_classifier(synth, split, cfg, rng);
    const auto acc = mean_class_accuracy(clf.predict_labels(real_unseen_test.features), real_unseen_test.labels,
                                         classes_present(split.unseen, real_unseen_test));
    RunResult r;
    r.zsl_acc = acc.value;
    r.per_class_acc = acc.per_class;
    return r;
}

/// Trained pieces of the GZSL pipeline.
struct GzslModels {
    SoftmaxClassifier seen_cls;
    SoftmaxClassifier unseen_cls;
    OodDetector detector;
};

inline GzslModels train_gzsl_models(const Synthesizer& synth, const SplitSpec& split, const FeatureSet& real_seen_train,
                                    const ProtocolConfig& cfg) {
    split.validate();
    real_seen_train.validate();
    for (const auto& l : real_seen_train.labels) {
        if (!split.is_seen(l)) fail(ErrorCode::leakage_error, "seen training label '" + l + "' is not a seen class");
    }
    Rng rng = make_rng(derive_seed(cfg.seed, "gzsl-synthesis"));
    const FeatureSet fake = synth(split.unseen, cfg.n_per_class, rng);
    GzslModels m;
    ClassifierConfig cs = cfg.cls;
    cs.seed = derive_seed(cfg.seed, "seen-classifier");
    m.seen_cls = train_classifier(real_seen_train, split.seen, cs);
    ClassifierConfig cu = cfg.cls;
    cu.seed = derive_seed(cfg.seed, "unseen-classifier");
    m.unseen_cls = train_classifier(fake, split.unseen, cu);
    OodConfig oc = cfg.ood;
    oc.seed = derive_seed(cfg.seed, "ood");
    m.detector = train_ood(real_seen_train, fake, oc);
    return m;
}

/// GZSL scoring: route, classify with the routed classifier, then u and s
/// as mean class accuracies over the unseen and seen classes present.
/// An absent side leaves its accuracy unset and H = 0.
inline RunResult gzsl_evaluate(const GzslModels& m, const SplitSpec& split, const FeatureSet& real_test,
                               const std::optional<Router>& router = std::nullopt) {
    real_test.validate();
    require_no_leakage(split, real_test, true);
    if (real_test.empty()) fail(ErrorCode::empty_input, "gzsl_protocol: empty test set");
    const std::vector<Route> routes = router ? (*router)(real_test) : entropy_route(m.detector, real_test.features);
    if (routes.size() != real_test.size()) fail(ErrorCode::shape_mismatch, "router returned wrong row count");

    std::vector<std::size_t> to_seen;
    std::vector<std::size_t> to_unseen;
    for (std::size_t i = 0; i < routes.size(); ++i) (routes[i] == Route::seen ? to_seen : to_unseen).push_back(i);
    std::vector<std::string> preds(real_test.size());
    if (!to_seen.empty()) {
        const auto p = m.seen_cls.predict_labels(gather_rows(real_test.features, to_seen));
        for (std::size_t k = 0; k < to_seen.size(); ++k) preds[to_seen[k]] = p[k];
    }
    if (!to_unseen.empty()) {
        const auto p = m.unseen_cls.predict_labels(gather_rows(real_test.features, to_unseen));
        for (std::size_t k = 0; k < to_unseen.size(); ++k) preds[to_unseen[k]] = p[k];
    }

    RunResult r;
    std::size_t routed_right = 0;
    for (std::size_t i = 0; i < routes.size(); ++i) {
        const bool is_seen = split.is_seen(real_test.labels[i]);
        if ((routes[i] == Route::seen) == is_seen) ++routed_right;
    }
    r.routing_acc = static_cast<double>(routed_right) / static_cast<double>(routes.size());

    auto side = [&](const std::vector<std::string>& classes) -> std::optional<double> {
        const auto present = classes_present(classes, real_test);
        if (present.empty()) return std::nullopt;
        const std::unordered_set<std::string> keep(present.begin(), present.end());
        std::vector<std::string> p;
        std::vector<std::string> l;
        for (std::size_t i = 0; i < real_test.size(); ++i) {
            if (keep.count(real_test.labels[i])) {
                p.push_back(preds[i]);
                l.push_back(real_test.labels[i]);
            }
        }
        const auto acc = mean_class_accuracy(p, l, present);
        for (const auto& [c, v] : acc.per_class) r.per_class_acc[c] = v;
        return acc.value;
    };
    r.unseen_acc = side(split.unseen);
    r.seen_acc = side(split.seen);
    r.harmonic = (r.unseen_acc && r.seen_acc) ? harmonic_mean(*r.unseen_acc, *r.seen_acc) : 0.0;
    return r;
}

inline RunResult gzsl_protocol(const Synthesizer& synth, const SplitSpec& split, const FeatureSet& real_seen_train,
                               const FeatureSet& real_test, const ProtocolConfig& cfg, const std::optional<Router>& router = std::nullopt) {
    const GzslModels m = train_gzsl_models(synth, split, real_seen_train, cfg);
    return gzsl_evaluate(m, split, real_test, router);
}

/// Router that knows the true labels; isolates classifier quality from
/// routing quality.
inline Router oracle_router(const SplitSpec& split) {
    return [split](const FeatureSet& test) {
        std::vector<Route> out;
        out.reserve(test.size());
        for (const auto& l : test.labels) out.push_back(split.is_seen(l) ? Route::seen : Route::unseen);
        return out;
    };
}

} // namespace zslforge
