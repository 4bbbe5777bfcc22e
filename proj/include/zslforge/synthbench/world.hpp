// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/SVD>

#include "json.hpp"

#include "zslforge/corpus/embedding.hpp"
#include "zslforge/error.hpp"
#include "zslforge/io/atomic_file.hpp"
#include "zslforge/io/feature_io.hpp"
#include "zslforge/random.hpp"
#include "zslforge/zsl/feature_set.hpp"
#include "zslforge/zsl/metrics.hpp"
#include "zslforge/zsl/splits.hpp"

namespace zslforge::synthbench {

enum class Structure { uniform_random, clustered };

struct WorldSpec {
    std::size_t num_classes = 20;
    std::size_t d_feat = 32;
    std::size_t d_emb = 16;
    Structure structure = Structure::clustered;
    std::size_t groups = 4;     // clustered mode only
    std::size_t offset_dim = 4; // clustered mode: width of the within-group offset subspace (0 = all of it)
    double min_cosine = 0.82;   // clustered mode: member-to-centroid cosine range
    double max_cosine = 0.9;
    double sigma_w = 0.3;
    bool truncate = false;      // clamp sampled features at zero
    std::uint64_t seed = 0;
};

/// Ground truth: class c has features ~ N(relu(W a_c + b), sigma_w^2 I).
struct World {
    WorldSpec spec;
    EmbeddingTable embeddings; // unit-norm rows
    Matrix W;                  // d_feat x d_emb
    Vector b;                  // d_feat
    std::vector<std::size_t> group_of; // clustered mode: group per class

    const std::vector<std::string>& classes() const { return embeddings.classes(); }

    Vector class_mean(const std::string& cls) const { return (W * embeddings.row(cls) + b).cwiseMax(0.0); }

    Matrix class_means(const std::vector<std::string>& classes) const {
        Matrix m(static_cast<Eigen::Index>(classes.size()), static_cast<Eigen::Index>(spec.d_feat));
        for (std::size_t i = 0; i < classes.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = class_mean(classes[i]).transpose();
        return m;
    }
};

inline std::string class_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "class%02zu", i);
    return buf;
}

namespace detail {

inline Vector random_unit(std::size_t d, Rng& rng) {
    Vector v(static_cast<Eigen::Index>(d));
    do {
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = standard_normal(rng);
    } while (v.norm() < 1e-8);
    return v.normalized();
}

} // namespace detail

/// Deterministic per seed. Clustered mode draws k orthonormal centroids
/// and places members at cosine in [min_cosine, max_cosine] to their
/// centroid, offset along directions orthogonal to every centroid. With
/// min_cosine^2 > 2/3 (enforced) within-group cosine, at least
/// 2 min_cosine^2 - 1, always exceeds across-group cosine, at most
/// 1 - min_cosine^2.
inline World generate_world(const WorldSpec& spec) {
    if (spec.num_classes < 4) fail(ErrorCode::config_error, "generate_world: need at least 4 classes");
    if (spec.d_feat == 0 || spec.d_emb == 0) fail(ErrorCode::config_error, "generate_world: zero dimension");
    if (!(spec.sigma_w > 0.0) || !std::isfinite(spec.sigma_w)) fail(ErrorCode::config_error, "generate_world: sigma_w must be positive");
    if (spec.structure == Structure::clustered && (spec.groups == 0 || spec.groups >= spec.d_emb || spec.groups > spec.num_classes)) {
        fail(ErrorCode::config_error, "generate_world: clustered mode needs 1 <= groups < d_emb and groups <= classes");
    }
    if (spec.structure == Structure::clustered && !(3.0 * spec.min_cosine * spec.min_cosine > 2.0 && spec.min_cosine <= spec.max_cosine && spec.max_cosine <= 1.0)) {
        fail(ErrorCode::config_error, "generate_world: cosine range needs min^2 > 2/3 and min <= max <= 1");
    }
    World w;
    w.spec = spec;
    Rng rng = make_rng(derive_seed(spec.seed, "world"));
    const auto de = static_cast<Eigen::Index>(spec.d_emb);
    const auto df = static_cast<Eigen::Index>(spec.d_feat);

    std::vector<std::string> names;
    Matrix emb(static_cast<Eigen::Index>(spec.num_classes), de);
    if (spec.structure == Structure::uniform_random) {
        for (std::size_t c = 0; c < spec.num_classes; ++c) emb.row(static_cast<Eigen::Index>(c)) = detail::random_unit(spec.d_emb, rng).transpose();
    } else {
        // Orthonormal centroids via QR of a Gaussian matrix.
        Matrix g(de, de);
        for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = standard_normal(rng);
        const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
        const auto k = static_cast<Eigen::Index>(spec.groups);
        const Matrix centroids = q.leftCols(k);       // d_emb x k
        const Eigen::Index free = spec.offset_dim == 0 ? de - k : std::min<Eigen::Index>(de - k, static_cast<Eigen::Index>(spec.offset_dim));
        const Matrix complement = q.middleCols(k, free); // orthogonal to all centroids
        for (std::size_t c = 0; c < spec.num_classes; ++c) {
            const std::size_t grp = c % spec.groups;
            w.group_of.push_back(grp);
            const double cos_t = uniform(rng, spec.min_cosine, spec.max_cosine);
            const double sin_t = std::sqrt(1.0 - cos_t * cos_t);
            const Vector u = complement * detail::random_unit(static_cast<std::size_t>(free), rng);
            emb.row(static_cast<Eigen::Index>(c)) = (cos_t * centroids.col(static_cast<Eigen::Index>(grp)) + sin_t * u).transpose();
        }
    }
    for (std::size_t c = 0; c < spec.num_classes; ++c) names.push_back(class_name(c));
    w.embeddings = EmbeddingTable(std::move(names), std::move(emb));

    w.W = Matrix(df, de);
    for (Eigen::Index i = 0; i < w.W.size(); ++i) w.W.data()[i] = standard_normal(rng);
    w.b = Vector(df);
    for (Eigen::Index i = 0; i < df; ++i) w.b[i] = 0.5 + 0.1 * standard_normal(rng);
    return w;
}

inline Matrix sample_class(const World& w, const std::string& cls, std::size_t n, Rng& rng) {
    const Vector mean = w.class_mean(cls);
    Matrix x(static_cast<Eigen::Index>(n), mean.size());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            double v = mean[j] + w.spec.sigma_w * standard_normal(rng);
            x(i, j) = w.spec.truncate ? std::max(v, 0.0) : v;
        }
    }
    return x;
}

inline FeatureSet sample_classes(const World& w, const std::vector<std::string>& classes, std::size_t n_per_class, Rng& rng) {
    FeatureSet fs;
    fs.features = Matrix(static_cast<Eigen::Index>(classes.size() * n_per_class), static_cast<Eigen::Index>(w.spec.d_feat));
    Eigen::Index r = 0;
    for (const auto& c : classes) {
        fs.features.middleRows(r, static_cast<Eigen::Index>(n_per_class)) = sample_class(w, c, n_per_class, rng);
        r += static_cast<Eigen::Index>(n_per_class);
        fs.labels.insert(fs.labels.end(), n_per_class, c);
    }
    return fs;
}

struct Dataset {
    FeatureSet seen_train;
    FeatureSet unseen_test;
    FeatureSet gzsl_test; // fresh seen rows followed by the unseen test rows
};

inline Dataset sample_dataset(const World& w, const SplitSpec& split, std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
    split.validate(&w.classes());
    Rng train_rng = make_rng(derive_seed(seed, "seen-train"));
    Rng test_rng = make_rng(derive_seed(seed, "unseen-test"));
    Rng seen_test_rng = make_rng(derive_seed(seed, "seen-test"));
    Dataset d;
    d.seen_train = sample_classes(w, split.seen, n_train, train_rng);
    d.unseen_test = sample_classes(w, split.unseen, n_test, test_rng);
    d.gzsl_test = sample_classes(w, split.seen, n_test, seen_test_rng);
    d.gzsl_test.append(d.unseen_test);
    return d;
}

/// Nearest true class mean (the maximum-likelihood class under isotropic
/// noise); ties go to the earliest candidate. Returns predicted labels.
inline std::vector<std::string> bayes_oracle_predict(const World& w, const Matrix& x, const std::vector<std::string>& candidates) {
    if (candidates.empty()) fail(ErrorCode::not_enough_classes, "bayes oracle: no candidate classes");
    const Matrix means = w.class_means(candidates);
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Eigen::Index best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < means.rows(); ++k) {
            const double d = (x.row(i) - means.row(k)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        out.push_back(candidates[static_cast<std::size_t>(best)]);
    }
    return out;
}

/// Mean class accuracy of the Bayes-optimal classifier on `test`.
inline double bayes_oracle_accuracy(const World& w, const FeatureSet& test, const std::vector<std::string>& candidates) {
    test.validate();
    const auto preds = bayes_oracle_predict(w, test.features, candidates);
    return mean_class_accuracy(preds, test.labels, test.classes()).value;
}

// ---------------------------------------------------------------------------
// Embedding degradation
// ---------------------------------------------------------------------------

enum class Degradation { rank_reduce, noise, collapse_pairs, identical };

struct DegradeSpec {
    Degradation mode = Degradation::rank_reduce;
    std::size_t rank = 0;  // rank-reduce
    double sigma = 0.0;    // noise
    std::size_t pairs = 0; // collapse-pairs
    std::uint64_t seed = 0;
};

namespace detail {

inline Matrix renormalize_rows(Matrix m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const double n = m.row(i).norm();
        if (n > 0.0) m.row(i) /= n;
    }
    return m;
}

} // namespace detail

/// rank-reduce keeps the top-r principal directions of the centered table
/// (then renormalizes); noise adds seeded Gaussian entries and
/// renormalizes; collapse-pairs replaces p disjoint random pairs by their
/// average; identical gives every class the table's mean direction.
inline EmbeddingTable degrade_embeddings(const EmbeddingTable& table, const DegradeSpec& spec) {
    const Matrix& a = table.values();
    const auto d = static_cast<std::size_t>(a.cols());
    Rng rng = make_rng(derive_seed(spec.seed, "degrade"));
    switch (spec.mode) {
    case Degradation::rank_reduce: {
        if (spec.rank == 0 || spec.rank > d) fail(ErrorCode::config_error, "rank-reduce: rank must be in [1, d_emb]");
        const RowVector mean = a.colwise().mean();
        const Matrix centered = a.rowwise() - mean;
        Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeFullV);
        const Matrix v = svd.matrixV().leftCols(static_cast<Eigen::Index>(spec.rank));
        Matrix reduced = (centered * v * v.transpose()).rowwise() + mean;
        return table.with_values(detail::renormalize_rows(std::move(reduced)));
    }
    case Degradation::noise: {
        if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) fail(ErrorCode::config_error, "noise: sigma must be finite and >= 0");
        Matrix m = a;
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += spec.sigma * standard_normal(rng);
        return table.with_values(detail::renormalize_rows(std::move(m)));
    }
    case Degradation::collapse_pairs: {
        if (2 * spec.pairs > table.size()) fail(ErrorCode::config_error, "collapse-pairs: not enough classes for the requested pairs");
        std::vector<std::size_t> order(table.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle(order, rng);
        Matrix m = a;
        for (std::size_t p = 0; p < spec.pairs; ++p) {
            const auto i = static_cast<Eigen::Index>(order[2 * p]);
            const auto j = static_cast<Eigen::Index>(order[2 * p + 1]);
            const RowVector avg = 0.5 * (a.row(i) + a.row(j));
            m.row(i) = avg;
            m.row(j) = avg;
        }
        return table.with_values(std::move(m));
    }
    case Degradation::identical: {
        RowVector mean = a.colwise().mean();
        if (mean.norm() == 0.0) mean = a.row(0);
        Matrix m = mean.normalized().replicate(a.rows(), 1);
        return table.with_values(std::move(m));
    }
    }
    fail(ErrorCode::config_error, "unknown degradation mode");
}

// ---------------------------------------------------------------------------
// Serialization: JSON header at `path`, matrices in sibling feature files.
// ---------------------------------------------------------------------------

inline nlohmann::json world_header(const World& w) {
    return nlohmann::json{{"num_classes", w.spec.num_classes},
                          {"d_feat", w.spec.d_feat},
                          {"d_emb", w.spec.d_emb},
                          {"structure", w.spec.structure == Structure::clustered ? "clustered" : "uniform-random"},
                          {"groups", w.spec.groups},
                          {"sigma_w", w.spec.sigma_w},
                          {"truncate", w.spec.truncate},
                          {"seed", w.spec.seed},
                          {"classes", w.classes()}};
}

inline void save_world(const std::filesystem::path& path, const World& w) {
    io::write_atomic(path, world_header(w).dump(2) + "\n");
    io::save_matrix(path.string() + ".embeddings.zslf", w.embeddings.values(), io::DType::f64);
    io::save_matrix(path.string() + ".W.zslf", w.W, io::DType::f64);
    io::save_matrix(path.string() + ".b.zslf", Matrix(w.b.transpose()), io::DType::f64);
}

inline World load_world(const std::filesystem::path& path) {
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::format_error, path.string() + ": " + e.what());
    }
    World w;
    try {
        w.spec.num_classes = h.at("num_classes").get<std::size_t>();
        w.spec.d_feat = h.at("d_feat").get<std::size_t>();
        w.spec.d_emb = h.at("d_emb").get<std::size_t>();
        w.spec.structure = h.at("structure").get<std::string>() == "clustered" ? Structure::clustered : Structure::uniform_random;
        w.spec.groups = h.at("groups").get<std::size_t>();
        w.spec.sigma_w = h.at("sigma_w").get<double>();
        w.spec.truncate = h.at("truncate").get<bool>();
        w.spec.seed = h.at("seed").get<std::uint64_t>();
        auto classes = h.at("classes").get<std::vector<std::string>>();
        w.embeddings = EmbeddingTable(std::move(classes), io::load_matrix(path.string() + ".embeddings.zslf"));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::format_error, path.string() + ": " + e.what());
    }
    w.W = io::load_matrix(path.string() + ".W.zslf");
    const Matrix b = io::load_matrix(path.string() + ".b.zslf");
    if (w.W.rows() != static_cast<Eigen::Index>(w.spec.d_feat) || w.W.cols() != static_cast<Eigen::Index>(w.spec.d_emb) || b.rows() != 1 ||
        b.cols() != w.W.rows() || w.embeddings.dim() != w.spec.d_emb) {
        fail(ErrorCode::format_error, path.string() + ": matrix shapes disagree with header");
    }
    w.b = b.row(0).transpose();
    return w;
}

} // namespace zslforge::synthbench
