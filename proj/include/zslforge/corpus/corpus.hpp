// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "zslforge/corpus/embedding.hpp"
#include "zslforge/corpus/text.hpp"
#include "zslforge/error.hpp"

namespace zslforge::corpus {

struct StoryDocument {
    std::string class_name;
    std::string definition;
    std::vector<std::string> sentences;
    std::string source;
    bool cleaned = false;

    void validate() const {
        if (class_name.empty()) fail(ErrorCode::config_error, "story with empty class name");
        if (sentences.empty() && cleaned) {
            fail(ErrorCode::empty_story, "cleaned story '" + class_name + "' has no sentences");
        }
        for (const auto& s : sentences) {
            if (s.empty()) fail(ErrorCode::config_error, "story '" + class_name + "' contains an empty sentence");
        }
    }
};

/// Mean of the per-sentence encodings. Not renormalized unless asked.
inline Vector story_embedding(const StoryDocument& doc, const SentenceEncoderSpec& spec, bool renormalize = false) {
    if (doc.sentences.empty()) fail(ErrorCode::empty_story, "story '" + doc.class_name + "' has no sentences");
    Vector sum = Vector::Zero(static_cast<Eigen::Index>(spec.d_emb));
    for (const auto& s : doc.sentences) sum += encode_sentence(s, spec);
    Vector mean = sum / static_cast<double>(doc.sentences.size());
    if (renormalize && mean.norm() > 0.0) mean /= mean.norm();
    return mean;
}

struct ScoredSentence {
    std::string sentence;
    double score = 0.0;
    std::size_t index = 0; // position in the candidate list
};

/// The k candidates most cosine-similar to `definition`, best first.
/// Equal scores keep candidate order.
inline std::vector<ScoredSentence> select_top_k(const std::vector<std::string>& candidates, std::string_view definition,
                                                std::size_t k, const SentenceEncoderSpec& spec) {
    if (k == 0) fail(ErrorCode::config_error, "select_top_k: k must be >= 1");
    const Vector def = encode_sentence(definition, spec);
    std::vector<ScoredSentence> scored;
    scored.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Vector v = encode_sentence(candidates[i], spec);
        scored.push_back({candidates[i], std::clamp(cosine_similarity(def, v), -1.0, 1.0), i});
    }
    const std::size_t keep = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                      [](const ScoredSentence& a, const ScoredSentence& b) {
                          if (a.score != b.score) return a.score > b.score;
                          return a.index < b.index;
                      });
    scored.resize(keep);
    return scored;
}

enum class PartOfSpeech { noun, verb, adverb, adjective };

using Lexicon = std::unordered_map<std::string, PartOfSpeech>;

struct CorpusStatistics {
    std::size_t sentences = 0;
    std::size_t words = 0;
    std::size_t unique_words = 0;
    std::size_t nouns = 0;
    std::size_t verbs = 0;
    std::size_t adverbs = 0;
    std::size_t adjectives = 0;
};

inline CorpusStatistics corpus_statistics(const StoryDocument& doc, const Lexicon& lexicon = {}) {
    CorpusStatistics st;
    st.sentences = doc.sentences.size();
    std::unordered_set<std::string> distinct;
    for (const auto& s : doc.sentences) {
        for (auto& tok : tokenize(s)) {
            ++st.words;
            if (auto it = lexicon.find(tok); it != lexicon.end()) {
                switch (it->second) {
                case PartOfSpeech::noun: ++st.nouns; break;
                case PartOfSpeech::verb: ++st.verbs; break;
                case PartOfSpeech::adverb: ++st.adverbs; break;
                case PartOfSpeech::adjective: ++st.adjectives; break;
                }
            }
            distinct.insert(std::move(tok));
        }
    }
    st.unique_words = distinct.size();
    return st;
}

/// The m classes closest to `query` by cosine similarity, excluding the
/// query itself. Ties go to the lexicographically smaller class name.
inline std::vector<std::string> nearest_classes(const EmbeddingTable& table, std::string_view query, std::size_t m) {
    const std::size_t q = table.index_of(query);
    if (m == 0) fail(ErrorCode::config_error, "nearest_classes: m must be >= 1");
    if (m + 1 > table.size()) {
        fail(ErrorCode::not_enough_classes, "nearest_classes: asked for " + std::to_string(m) + " neighbours among " +
                                                std::to_string(table.size() - 1) + " other classes");
    }
    const Vector qv = table.values().row(static_cast<Eigen::Index>(q)).transpose();
    std::vector<std::pair<double, const std::string*>> cand;
    cand.reserve(table.size() - 1);
    for (std::size_t i = 0; i < table.size(); ++i) {
        if (i == q) continue;
        cand.emplace_back(cosine_similarity(qv, table.values().row(static_cast<Eigen::Index>(i)).transpose()), &table.classes()[i]);
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(m), cand.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return *a.second < *b.second;
    });
    std::vector<std::string> out;
    out.reserve(m);
    for (std::size_t i = 0; i < m; ++i) out.push_back(*cand[i].second);
    return out;
}

/// Embedding table for a corpus, one row per story in corpus order. With
/// top_k > 0, stories that carry a definition keep only their top_k
/// sentences closest to it before averaging.
inline EmbeddingTable encode_corpus(const std::vector<StoryDocument>& docs, const SentenceEncoderSpec& spec, std::size_t top_k = 0,
                                    bool renormalize = false) {
    if (docs.empty()) fail(ErrorCode::empty_input, "encode_corpus: corpus has no stories");
    std::vector<std::string> names;
    Matrix values(static_cast<Eigen::Index>(docs.size()), static_cast<Eigen::Index>(spec.d_emb));
    for (std::size_t i = 0; i < docs.size(); ++i) {
        StoryDocument doc = docs[i];
        if (top_k > 0 && !trim(doc.definition).empty() && !doc.sentences.empty()) {
            std::vector<std::string> kept;
            for (auto& s : select_top_k(doc.sentences, doc.definition, top_k, spec)) kept.push_back(std::move(s.sentence));
            doc.sentences = std::move(kept);
        }
        values.row(static_cast<Eigen::Index>(i)) = story_embedding(doc, spec, renormalize).transpose();
        names.push_back(doc.class_name);
    }
    return EmbeddingTable(std::move(names), std::move(values));
}

// ---------------------------------------------------------------------------
// JSON-lines corpus files: {class, definition, sentences, source, cleaned}
// ---------------------------------------------------------------------------

inline StoryDocument story_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {"class", "definition", "sentences", "source", "cleaned"};
    if (!j.is_object()) fail(ErrorCode::format_error, "corpus record is not a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!known.count(key)) fail(ErrorCode::format_error, "corpus record has unknown key '" + key + "'");
    }
    StoryDocument d;
    try {
        d.class_name = j.at("class").get<std::string>();
        d.definition = j.value("definition", std::string{});
        d.sentences = j.value("sentences", std::vector<std::string>{});
        d.source = j.value("source", std::string{});
        d.cleaned = j.value("cleaned", false);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::format_error, std::string("corpus record: ") + e.what());
    }
    d.validate();
    return d;
}

inline nlohmann::json story_to_json(const StoryDocument& d) {
    return nlohmann::json{{"class", d.class_name},
                          {"definition", d.definition},
                          {"sentences", d.sentences},
                          {"source", d.source},
                          {"cleaned", d.cleaned}};
}

inline std::vector<StoryDocument> read_corpus(std::istream& in) {
    std::vector<StoryDocument> docs;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            fail(ErrorCode::format_error, "corpus line " + std::to_string(lineno) + ": " + e.what());
        }
        StoryDocument d;
        try {
            d = story_from_json(j);
        } catch (const Error& e) {
            fail(e.code(), "corpus line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!seen.insert(d.class_name).second) {
            fail(ErrorCode::format_error, "corpus line " + std::to_string(lineno) + ": duplicate class '" + d.class_name + "'");
        }
        docs.push_back(std::move(d));
    }
    return docs;
}

inline std::vector<StoryDocument> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io_error, "cannot open corpus file " + path);
    return read_corpus(in);
}

inline void write_corpus(std::ostream& out, const std::vector<StoryDocument>& docs) {
    for (const auto& d : docs) out << story_to_json(d).dump() << '\n';
}

/// Lexicon file: one "word<TAB>pos" pair per line, pos in
/// {noun, verb, adverb, adjective}. Blank lines and '#' comments ignored.
inline Lexicon read_lexicon(std::istream& in) {
    static const std::map<std::string, PartOfSpeech> tags = {
        {"noun", PartOfSpeech::noun}, {"verb", PartOfSpeech::verb},
        {"adverb", PartOfSpeech::adverb}, {"adjective", PartOfSpeech::adjective}};
    Lexicon lex;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        std::istringstream ss{std::string(t)};
        std::string word, tag;
        if (!(ss >> word >> tag) || !tags.count(to_lower(tag))) {
            fail(ErrorCode::format_error, "lexicon line " + std::to_string(lineno) + ": expected 'word pos'");
        }
        lex[to_lower(word)] = tags.at(to_lower(tag));
    }
    return lex;
}

inline Lexicon load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io_error, "cannot open lexicon " + path);
    return read_lexicon(in);
}

} // namespace zslforge::corpus
