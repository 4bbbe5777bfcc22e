// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "zslforge/corpus/text.hpp"
#include "zslforge/error.hpp"
#include "zslforge/nn/matrix.hpp"
#include "zslforge/random.hpp"

namespace zslforge {

/// Class name -> semantic embedding, with a stable class order.
class EmbeddingTable {
public:
    EmbeddingTable() = default;

    EmbeddingTable(std::vector<std::string> classes, Matrix values)
        : classes_(std::move(classes)), values_(std::move(values)) {
        if (static_cast<Eigen::Index>(classes_.size()) != values_.rows()) {
            fail(ErrorCode::shape_mismatch, "embedding table: class count differs from row count");
        }
        if (!values_.allFinite()) fail(ErrorCode::config_error, "embedding table: non-finite entry");
        for (std::size_t i = 0; i < classes_.size(); ++i) {
            if (classes_[i].empty()) fail(ErrorCode::config_error, "embedding table: empty class name");
            if (!index_.emplace(classes_[i], i).second) {
                fail(ErrorCode::config_error, "embedding table: duplicate class '" + classes_[i] + "'");
            }
        }
    }

    std::size_t size() const { return classes_.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(values_.cols()); }
    const std::vector<std::string>& classes() const { return classes_; }
    const Matrix& values() const { return values_; }

    bool contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

    std::size_t index_of(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) fail(ErrorCode::unknown_class, "class '" + std::string(name) + "' not in embedding table");
        return it->second;
    }

    Vector row(std::string_view name) const { return values_.row(static_cast<Eigen::Index>(index_of(name))).transpose(); }

    /// Sub-table restricted to `names`, in that order.
    EmbeddingTable subset(const std::vector<std::string>& names) const {
        Matrix m(static_cast<Eigen::Index>(names.size()), values_.cols());
        for (std::size_t i = 0; i < names.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = values_.row(static_cast<Eigen::Index>(index_of(names[i])));
        return EmbeddingTable(names, std::move(m));
    }

    EmbeddingTable with_values(Matrix values) const { return EmbeddingTable(classes_, std::move(values)); }

private:
    std::vector<std::string> classes_;
    Matrix values_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline double cosine_similarity(const Vector& a, const Vector& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

enum class EncoderKind { hashed_tfidf, external_precomputed };

struct SentenceEncoderSpec {
    EncoderKind kind = EncoderKind::hashed_tfidf;
    std::size_t d_emb = 16;
    std::uint64_t vocabulary_seed = 0;
};

/// Bucket of `token` under the seeded hash.
inline std::size_t hash_bucket(std::string_view token, const SentenceEncoderSpec& spec) {
    const std::uint64_t h = mix_seed(fnv1a(token) ^ mix_seed(spec.vocabulary_seed));
    return static_cast<std::size_t>(h % spec.d_emb);
}

/// Hashed log-tf sentence encoder: lowercase, strip punctuation, hash tokens
/// into d_emb buckets, weight each distinct token by log(1 + tf), L2-normalize.
inline Vector encode_sentence(std::string_view sentence, const SentenceEncoderSpec& spec) {
    if (spec.kind != EncoderKind::hashed_tfidf) {
        fail(ErrorCode::config_error, "external-precomputed encoder cannot encode text; load embeddings from a feature file");
    }
    if (spec.d_emb == 0) fail(ErrorCode::config_error, "d_emb must be positive");
    if (corpus::trim(sentence).empty()) fail(ErrorCode::empty_sentence, "sentence is empty");
    const auto tokens = corpus::tokenize(sentence);
    if (tokens.empty()) fail(ErrorCode::empty_sentence, "sentence has no word tokens: '" + std::string(sentence) + "'");

    std::unordered_map<std::string_view, std::size_t> tf;
    std::vector<std::string_view> order;
    for (const auto& t : tokens) {
        if (tf[t]++ == 0) order.push_back(t);
    }
    Vector v = Vector::Zero(static_cast<Eigen::Index>(spec.d_emb));
    for (auto t : order) {
        v[static_cast<Eigen::Index>(hash_bucket(t, spec))] += std::log1p(static_cast<double>(tf[t]));
    }
    return v / v.norm();
}

} // namespace zslforge
