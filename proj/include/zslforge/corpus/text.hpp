// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace zslforge::corpus {

inline constexpr std::array<std::string_view, 14> abbreviations = {
    "e.g.", "i.e.", "etc.", "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "jr.", "sr.", "vs.", "approx.", "no.",
};

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

namespace detail {

// Word immediately preceding position `end` (exclusive), lowercased.
inline std::string word_ending_at(std::string_view text, std::size_t end) {
    std::size_t begin = end;
    while (begin > 0 && !is_space(text[begin - 1])) --begin;
    return to_lower(text.substr(begin, end - begin));
}

inline bool is_abbreviation(std::string_view word) {
    for (auto a : abbreviations) {
        if (word == a) return true;
        // Tolerate leading punctuation such as "(e.g."
        if (word.size() > a.size() && word.substr(word.size() - a.size()) == a &&
            !std::isalnum(static_cast<unsigned char>(word[word.size() - a.size() - 1]))) {
            return true;
        }
    }
    return false;
}

} // namespace detail

/// Splits raw text into sentences. A boundary is terminal punctuation
/// (. ! ?) followed by whitespace and then an uppercase letter, unless the
/// word carrying the period is a known abbreviation.
inline std::vector<std::string> segment_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    const std::size_t n = text.size();
    for (std::size_t i = 0; i < n; ++i) {
        const char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        std::size_t j = i + 1;
        if (j >= n || !is_space(text[j])) continue;
        while (j < n && is_space(text[j])) ++j;
        if (j >= n || !std::isupper(static_cast<unsigned char>(text[j]))) continue;
        if (c == '.' && detail::is_abbreviation(detail::word_ending_at(text, i + 1))) continue;
        auto piece = trim(text.substr(start, i + 1 - start));
        if (!piece.empty()) out.emplace_back(piece);
        start = j;
    }
    auto tail = trim(text.substr(std::min(start, n)));
    if (!tail.empty()) out.emplace_back(tail);
    return out;
}

/// Lowercased tokens with punctuation removed. Apostrophes inside a word are
/// dropped ("don't" -> "dont"); any other non-alphanumeric byte separates.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (std::isalnum(c) || c >= 0x80) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (raw == '\'' && !cur.empty()) {
            continue;
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

} // namespace zslforge::corpus
