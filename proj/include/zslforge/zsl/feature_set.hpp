// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "zslforge/error.hpp"
#include "zslforge/nn/matrix.hpp"

namespace zslforge {

enum class Provenance { real, synthetic };

/// Feature rows with one class label per row.
struct FeatureSet {
    Matrix features;
    std::vector<std::string> labels;
    Provenance provenance = Provenance::real;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
    bool empty() const { return labels.empty(); }

    void validate() const {
        if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
            fail(ErrorCode::shape_mismatch, "feature set: " + std::to_string(features.rows()) + " rows but " +
                                                std::to_string(labels.size()) + " labels");
        }
        if (!features.allFinite()) fail(ErrorCode::format_error, "feature set contains non-finite values");
    }

    /// Distinct labels in order of first appearance.
    std::vector<std::string> classes() const {
        std::vector<std::string> out;
        std::unordered_set<std::string> seen;
        for (const auto& l : labels) {
            if (seen.insert(l).second) out.push_back(l);
        }
        return out;
    }

    std::vector<std::size_t> rows_of(const std::string& cls) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == cls) out.push_back(i);
        }
        return out;
    }

    FeatureSet rows(const std::vector<std::size_t>& idx) const {
        FeatureSet out;
        out.provenance = provenance;
        out.features = gather_rows(features, idx);
        out.labels.reserve(idx.size());
        for (auto i : idx) out.labels.push_back(labels[i]);
        return out;
    }

    /// Rows whose label is in `keep`, order preserved.
    FeatureSet restrict_to(const std::vector<std::string>& keep) const {
        const std::unordered_set<std::string> k(keep.begin(), keep.end());
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (k.count(labels[i])) idx.push_back(i);
        }
        return rows(idx);
    }

    void append(const FeatureSet& other) {
        if (empty()) {
            *this = other;
            return;
        }
        require_cols(other.features, features.cols(), "feature set append");
        Matrix m(features.rows() + other.features.rows(), features.cols());
        m.topRows(features.rows()) = features;
        m.bottomRows(other.features.rows()) = other.features;
        features = std::move(m);
        labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    }
};

/// Position of each row's label within `class_order`.
inline std::vector<std::size_t> label_indices(const std::vector<std::string>& labels, const std::vector<std::string>& class_order) {
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < class_order.size(); ++i) pos.emplace(class_order[i], i);
    std::vector<std::size_t> out;
    out.reserve(labels.size());
    for (const auto& l : labels) {
        auto it = pos.find(l);
        if (it == pos.end()) fail(ErrorCode::unknown_class, "label '" + l + "' is not among the expected classes");
        out.push_back(it->second);
    }
    return out;
}

} // namespace zslforge
