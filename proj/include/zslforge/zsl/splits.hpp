// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <fstream>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "zslforge/error.hpp"
#include "zslforge/random.hpp"

namespace zslforge {

enum class SplitOrigin { random_5050, truze_file, explicit_lists };

struct SplitSpec {
    std::vector<std::string> seen;
    std::vector<std::string> unseen;
    std::string name;
    SplitOrigin origin = SplitOrigin::explicit_lists;

    /// Disjoint, both sides non-empty, and (when given) exactly covering
    /// the universe.
    void validate(const std::vector<std::string>* universe = nullptr) const {
        if (seen.empty() || unseen.empty()) fail(ErrorCode::config_error, "split '" + name + "': seen and unseen must be non-empty");
        std::unordered_set<std::string> s;
        for (const auto& c : seen) {
            if (!s.insert(c).second) fail(ErrorCode::config_error, "split '" + name + "': duplicate seen class '" + c + "'");
        }
        std::unordered_set<std::string> u;
        for (const auto& c : unseen) {
            if (s.count(c)) fail(ErrorCode::overlap_error, "split '" + name + "': class '" + c + "' is both seen and unseen");
            if (!u.insert(c).second) fail(ErrorCode::config_error, "split '" + name + "': duplicate unseen class '" + c + "'");
        }
        if (universe) {
            const std::unordered_set<std::string> all(universe->begin(), universe->end());
            for (const auto& c : seen) {
                if (!all.count(c)) fail(ErrorCode::unknown_class, "split '" + name + "': seen class '" + c + "' outside the universe");
            }
            for (const auto& c : unseen) {
                if (!all.count(c)) fail(ErrorCode::unknown_class, "split '" + name + "': unseen class '" + c + "' outside the universe");
            }
            if (s.size() + u.size() != all.size()) fail(ErrorCode::config_error, "split '" + name + "' does not cover the class universe");
        }
    }

    bool is_seen(const std::string& c) const { return std::find(seen.begin(), seen.end(), c) != seen.end(); }
    bool is_unseen(const std::string& c) const { return std::find(unseen.begin(), unseen.end(), c) != unseen.end(); }
};

/// n_runs seeded 50/50 splits: ceil(n/2) seen, the rest unseen.
inline std::vector<SplitSpec> make_random_splits(std::vector<std::string> universe, std::uint64_t seed, std::size_t n_runs) {
    if (universe.size() < 2) fail(ErrorCode::not_enough_classes, "random split needs at least two classes");
    std::sort(universe.begin(), universe.end());
    if (std::adjacent_find(universe.begin(), universe.end()) != universe.end()) fail(ErrorCode::config_error, "duplicate class in universe");
    std::vector<SplitSpec> out;
    const std::size_t n_seen = (universe.size() + 1) / 2;
    for (std::size_t run = 0; run < n_runs; ++run) {
        Rng rng = make_rng(derive_seed(seed, 1000 + run));
        std::vector<std::string> order = universe;
        shuffle(order, rng);
        SplitSpec s;
        s.origin = SplitOrigin::random_5050;
        s.name = "random-5050-" + std::to_string(run);
        s.seen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_seen));
        s.unseen.assign(order.begin() + static_cast<std::ptrdiff_t>(n_seen), order.end());
        std::sort(s.seen.begin(), s.seen.end());
        std::sort(s.unseen.begin(), s.unseen.end());
        s.validate(&universe);
        out.push_back(std::move(s));
    }
    return out;
}

/// Split file: {"name": ..., "seen": [...], "unseen": [...]}.
inline SplitSpec parse_split(const nlohmann::json& j, SplitOrigin origin = SplitOrigin::truze_file) {
    if (!j.is_object()) fail(ErrorCode::format_error, "split file: top level must be an object");
    static const std::set<std::string> known = {"name", "seen", "unseen"};
    for (const auto& [k, _] : j.items()) {
        if (!known.count(k)) fail(ErrorCode::format_error, "split file: unknown key '" + k + "'");
    }
    SplitSpec s;
    s.origin = origin;
    try {
        s.name = j.value("name", std::string("split"));
        s.seen = j.at("seen").get<std::vector<std::string>>();
        s.unseen = j.at("unseen").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::format_error, std::string("split file: ") + e.what());
    }
    s.validate();
    return s;
}

inline SplitSpec load_split_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io_error, "cannot open split file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::format_error, "split file " + path + ": " + e.what());
    }
    return parse_split(j);
}

inline nlohmann::json split_to_json(const SplitSpec& s) {
    return nlohmann::json{{"name", s.name}, {"seen", s.seen}, {"unseen", s.unseen}};
}

struct SplitSource {
    SplitOrigin origin = SplitOrigin::random_5050;
    std::string path;                 // truze-file
    std::vector<std::string> seen;    // explicit
    std::vector<std::string> unseen;  // explicit
};

/// One split per run. Fixed splits (file or explicit lists) repeat across
/// runs; runs then differ only by seed.
inline std::vector<SplitSpec> make_splits(const std::vector<std::string>& universe, const SplitSource& src, std::uint64_t seed,
                                          std::size_t n_runs) {
    if (universe.size() < 2) fail(ErrorCode::not_enough_classes, "make_splits: need at least two classes");
    if (src.origin == SplitOrigin::random_5050) return make_random_splits(universe, seed, n_runs);
    SplitSpec s;
    if (src.origin == SplitOrigin::truze_file) {
        s = load_split_file(src.path);
    } else {
        s.seen = src.seen;
        s.unseen = src.unseen;
        s.name = "explicit";
        s.origin = SplitOrigin::explicit_lists;
    }
    s.validate(&universe);
    return std::vector<SplitSpec>(n_runs, s);
}

} // namespace zslforge
