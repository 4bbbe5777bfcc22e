// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "zslforge/error.hpp"

namespace zslforge {

/// 2us/(u+s); zero when both are zero.
inline double harmonic_mean(double u, double s) {
    if (u < 0.0 || s < 0.0) fail(ErrorCode::config_error, "harmonic_mean: negative accuracy");
    if (u + s == 0.0) return 0.0;
    return 2.0 * u * s / (u + s);
}

struct ClassAccuracy {
    double value = 0.0;                       // unweighted mean over classes
    std::map<std::string, double> per_class;  // class -> fraction correct
};

/// Mean of per-class accuracies (not pooled accuracy). Every class of the
/// universe must have at least one row.
inline ClassAccuracy mean_class_accuracy(const std::vector<std::string>& predictions, const std::vector<std::string>& labels,
                                         const std::vector<std::string>& class_universe) {
    if (predictions.size() != labels.size()) fail(ErrorCode::shape_mismatch, "mean_class_accuracy: prediction/label count");
    std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> tally; // correct, total
    for (const auto& c : class_universe) tally[c] = {0, 0};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = tally.find(labels[i]);
        if (it == tally.end()) fail(ErrorCode::unknown_class, "mean_class_accuracy: label '" + labels[i] + "' outside the universe");
        ++it->second.second;
        if (predictions[i] == labels[i]) ++it->second.first;
    }
    ClassAccuracy out;
    for (const auto& c : class_universe) {
        const auto [correct, total] = tally.at(c);
        if (total == 0) fail(ErrorCode::empty_class, "mean_class_accuracy: class '" + c + "' has no test rows");
        out.per_class[c] = static_cast<double>(correct) / static_cast<double>(total);
    }
    double sum = 0.0;
    for (const auto& [_, v] : out.per_class) sum += v;
    out.value = class_universe.empty() ? 0.0 : sum / static_cast<double>(out.per_class.size());
    return out;
}

/// Mean and sample standard deviation (n-1 denominator); std absent for a
/// single value.
struct Summary {
    double mean = 0.0;
    std::optional<double> stddev;
    double median = 0.0;
    std::vector<double> values;
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline Summary summarize(const std::vector<double>& values) {
    Summary s;
    s.values = values;
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    s.median = median_of(values);
    return s;
}

/// Outcome of one protocol run.
struct RunResult {
    std::map<std::string, double> per_class_acc;
    std::optional<double> zsl_acc;    // mean class accuracy over unseen classes (ZSL)
    std::optional<double> unseen_acc; // u (GZSL)
    std::optional<double> seen_acc;   // s (GZSL)
    std::optional<double> harmonic;   // H (GZSL)
    std::optional<double> routing_acc;
};

struct EvalReport {
    std::vector<RunResult> runs;
    std::map<std::string, Summary> aggregate; // metric name -> summary across runs
};

inline EvalReport aggregate_runs(std::vector<RunResult> runs) {
    EvalReport r;
    std::map<std::string, std::vector<double>> metrics;
    for (const auto& run : runs) {
        if (run.zsl_acc) metrics["zsl_acc"].push_back(*run.zsl_acc);
        if (run.unseen_acc) metrics["unseen_acc"].push_back(*run.unseen_acc);
        if (run.seen_acc) metrics["seen_acc"].push_back(*run.seen_acc);
        if (run.harmonic) metrics["harmonic_mean"].push_back(*run.harmonic);
        if (run.routing_acc) metrics["routing_acc"].push_back(*run.routing_acc);
    }
    for (auto& [name, values] : metrics) r.aggregate[name] = summarize(values);
    r.runs = std::move(runs);
    return r;
}

} // namespace zslforge
