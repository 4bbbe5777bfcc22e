// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "zslforge/corpus/embedding.hpp"
#include "zslforge/error.hpp"
#include "zslforge/generative/sdr.hpp"
#include "zslforge/io/feature_io.hpp"
#include "zslforge/synthbench/world.hpp"
#include "zslforge/zsl/protocol.hpp"
#include "zslforge/zsl/splits.hpp"

namespace zslforge::io {

/// Where the feature rows come from.
enum class DataSource { synthetic, files };

struct DataConfig {
    DataSource source = DataSource::synthetic;
    std::size_t n_train = 100;   // synthetic: rows per seen class
    std::size_t n_test = 50;     // synthetic: rows per test class
    std::string train_features;  // files: seen-class training features
    std::string test_features;   // files: test features (seen and unseen rows)
    std::string embeddings;      // files: class embeddings (feature format, labels = class names)
};

struct SplitConfig {
    SplitOrigin origin = SplitOrigin::random_5050;
    std::string path;
    std::vector<std::string> seen;
    std::vector<std::string> unseen;
};

/// Embedding degradation used by the ablation ("stories off") and the
/// embedding-richness comparison.
struct AblationConfig {
    synthbench::Degradation stories_off = synthbench::Degradation::rank_reduce;
    std::size_t stories_off_rank = 4;
    double stories_off_sigma = 0.5;
    std::size_t richness_rank = 6;
    std::size_t richness_pairs = 5;
};

struct CorpusConfig {
    std::string path;
    std::string lexicon;
    std::size_t d_emb = 16;
    std::uint64_t vocabulary_seed = 0;
    std::size_t top_k = 25; // 0 keeps every sentence
    bool renormalize = false;
    std::string query;      // neighbors: class to query
    std::size_t neighbors = 5;
};

struct PlotConfig {
    std::string input; // trace CSV or report JSON
    std::string title;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::size_t runs = 10;
    std::string out = "out";
    synthbench::WorldSpec world{};
    DataConfig data{};
    SplitConfig split{};
    TrainConfig train{};
    ProtocolConfig protocol{};
    AblationConfig ablation{};
    CorpusConfig corpus{};
    PlotConfig plot{};
};

// ---------------------------------------------------------------------------
// Enum spellings
// ---------------------------------------------------------------------------

template <class E>
struct EnumNames;

#define ZSLFORGE_ENUM_NAMES(Type, ...)                                                                   \
    template <>                                                                                          \
    struct EnumNames<Type> {                                                                             \
        static const std::vector<std::pair<Type, std::string>>& list() {                                \
            static const std::vector<std::pair<Type, std::string>> v = {__VA_ARGS__};                   \
            return v;                                                                                    \
        }                                                                                                \
    };

ZSLFORGE_ENUM_NAMES(DataSource, {DataSource::synthetic, "synthetic"}, {DataSource::files, "files"})
ZSLFORGE_ENUM_NAMES(SplitOrigin, {SplitOrigin::random_5050, "random-5050"}, {SplitOrigin::truze_file, "truze-file"},
                    {SplitOrigin::explicit_lists, "explicit"})
ZSLFORGE_ENUM_NAMES(synthbench::Structure, {synthbench::Structure::uniform_random, "uniform-random"},
                    {synthbench::Structure::clustered, "clustered"})
ZSLFORGE_ENUM_NAMES(synthbench::Degradation, {synthbench::Degradation::rank_reduce, "rank-reduce"},
                    {synthbench::Degradation::noise, "noise"}, {synthbench::Degradation::collapse_pairs, "collapse-pairs"},
                    {synthbench::Degradation::identical, "identical"})
ZSLFORGE_ENUM_NAMES(NoiseSource, {NoiseSource::gaussian, "gaussian"}, {NoiseSource::data_driven, "data-driven"})
ZSLFORGE_ENUM_NAMES(PenaltyPoint, {PenaltyPoint::generated, "generated"}, {PenaltyPoint::interpolates, "interpolates"})
ZSLFORGE_ENUM_NAMES(RealConditioning, {RealConditioning::projected, "projected"}, {RealConditioning::ground_truth, "ground-truth"})
ZSLFORGE_ENUM_NAMES(GeneratorKind, {GeneratorKind::sdr, "sdr"}, {GeneratorKind::vanilla_gan, "vanilla-gan"}, {GeneratorKind::vae, "vae"})
ZSLFORGE_ENUM_NAMES(Activation, {Activation::linear, "linear"}, {Activation::relu, "relu"}, {Activation::leaky_relu, "leaky-relu"})

#undef ZSLFORGE_ENUM_NAMES

template <class E>
std::string enum_name(E value) {
    for (const auto& [v, n] : EnumNames<E>::list()) {
        if (v == value) return n;
    }
    fail(ErrorCode::config_error, "enum value without a name");
}

template <class E>
E enum_from_name(const std::string& name, const std::string& key) {
    std::string options;
    for (const auto& [v, n] : EnumNames<E>::list()) {
        if (n == name) return v;
        options += (options.empty() ? "" : ", ") + n;
    }
    fail(ErrorCode::config_error, "key '" + key + "': unknown value '" + name + "' (expected one of: " + options + ")");
}

// ---------------------------------------------------------------------------
// Field visitors: one description of every section drives both reading and
// writing, so defaults, parsing and the resolved-config echo cannot drift.
// ---------------------------------------------------------------------------

template <class V>
void visit_fields(V& v, synthbench::WorldSpec& w) {
    v("num_classes", w.num_classes);
    v("d_feat", w.d_feat);
    v("d_emb", w.d_emb);
    v("structure", w.structure);
    v("groups", w.groups);
    v("offset_dim", w.offset_dim);
    v("min_cosine", w.min_cosine);
    v("max_cosine", w.max_cosine);
    v("sigma_w", w.sigma_w);
    v("truncate", w.truncate);
}

template <class V>
void visit_fields(V& v, DataConfig& d) {
    v("source", d.source);
    v("n_train", d.n_train);
    v("n_test", d.n_test);
    v("train_features", d.train_features);
    v("test_features", d.test_features);
    v("embeddings", d.embeddings);
}

template <class V>
void visit_fields(V& v, SplitConfig& s) {
    v("origin", s.origin);
    v("path", s.path);
    v("seen", s.seen);
    v("unseen", s.unseen);
}

template <class V>
void visit_fields(V& v, VaeConfig& c) {
    v("hidden", c.hidden);
    v("epochs", c.epochs);
    v("batch_size", c.batch_size);
    v("lr", c.lr);
    v("weight_decay", c.weight_decay);
    v("beta", c.beta);
}

template <class V>
void visit_fields(V& v, ClassifierConfig& c) {
    v("epochs", c.epochs);
    v("batch_size", c.batch_size);
    v("lr", c.lr);
    v("weight_decay", c.weight_decay);
}

template <class V>
void visit_fields(V& v, OodConfig& c) {
    v("hidden", c.hidden);
    v("epochs", c.epochs);
    v("batch_size", c.batch_size);
    v("lr", c.lr);
    v("weight_decay", c.weight_decay);
    v("percentile", c.percentile);
}

template <class V>
void visit_fields(V& v, TrainConfig& t) {
    v("kind", t.kind);
    v("alpha", t.alpha);
    v("lambda_cls", t.lambda_cls);
    v("lambda_rank", t.lambda_rank);
    v("lambda_mi", t.lambda_mi);
    v("delta", t.delta);
    v("m_noise", t.m_noise);
    v("m_rank", t.m_rank);
    v("n_critic", t.n_critic);
    v("epochs", t.epochs);
    v("batch_size", t.batch_size);
    v("lr", t.lr);
    v("beta1", t.beta1);
    v("weight_decay", t.weight_decay);
    v("noise_source", t.noise_source);
    v("hidden_scale", t.hidden_scale);
    v("d_z", t.d_z);
    v("generator_output", t.generator_output);
    v("penalty_at", t.penalty_at);
    v("real_condition", t.real_condition);
    v("rank_on_generated", t.rank_on_generated);
    v("lr_schedule", t.lr_schedule);
    v.section("vae", t.vae);
    v.section("classifier", t.cls);
}

template <class V>
void visit_fields(V& v, ProtocolConfig& p) {
    v("n_per_class", p.n_per_class);
    v.section("classifier", p.cls);
    v.section("ood", p.ood);
}

template <class V>
void visit_fields(V& v, AblationConfig& a) {
    v("stories_off", a.stories_off);
    v("stories_off_rank", a.stories_off_rank);
    v("stories_off_sigma", a.stories_off_sigma);
    v("richness_rank", a.richness_rank);
    v("richness_pairs", a.richness_pairs);
}

template <class V>
void visit_fields(V& v, CorpusConfig& c) {
    v("path", c.path);
    v("lexicon", c.lexicon);
    v("d_emb", c.d_emb);
    v("vocabulary_seed", c.vocabulary_seed);
    v("top_k", c.top_k);
    v("renormalize", c.renormalize);
    v("query", c.query);
    v("neighbors", c.neighbors);
}

template <class V>
void visit_fields(V& v, PlotConfig& p) {
    v("input", p.input);
    v("title", p.title);
}

template <class V>
void visit_fields(V& v, ExperimentConfig& c) {
    v("seed", c.seed);
    v("runs", c.runs);
    v("out", c.out);
    v.section("world", c.world);
    v.section("data", c.data);
    v.section("split", c.split);
    v.section("train", c.train);
    v.section("protocol", c.protocol);
    v.section("ablation", c.ablation);
    v.section("corpus", c.corpus);
    v.section("plot", c.plot);
}

namespace detail {

template <class T>
inline constexpr bool is_enum_v = std::is_enum_v<T>;

class JsonWriter {
public:
    nlohmann::json out = nlohmann::json::object();

    template <class T>
    void operator()(const char* key, const T& value) {
        if constexpr (is_enum_v<T>) {
            out[key] = enum_name(value);
        } else {
            out[key] = value;
        }
    }

    template <class S>
    void section(const char* key, S& s) {
        JsonWriter w;
        visit_fields(w, s);
        out[key] = std::move(w.out);
    }
};

/// 1-based line of the first occurrence of `"key"` in the source text;
/// 0 when not found.
inline std::size_t line_of_key(const std::string& text, const std::string& key) {
    const auto pos = text.find("\"" + key + "\"");
    if (pos == std::string::npos) return 0;
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class JsonReader {
public:
    JsonReader(const nlohmann::json& j, std::string prefix, const std::string* source)
        : j_(j), prefix_(std::move(prefix)), source_(source) {
        if (!j_.is_object()) fail(ErrorCode::config_error, where(prefix_.empty() ? "(root)" : prefix_) + "section must be an object");
    }

    template <class T>
    void operator()(const char* key, T& value) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return; // default stays
        const std::string full = prefix_ + key;
        try {
            if constexpr (is_enum_v<T>) {
                value = enum_from_name<T>(it->template get<std::string>(), full);
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) throw std::invalid_argument("expected a boolean");
                value = it->template get<bool>();
            } else if constexpr (std::is_integral_v<T>) {
                if (!it->is_number_integer() && !it->is_number_unsigned()) throw std::invalid_argument("expected an integer");
                if (it->is_number_integer() && it->template get<std::int64_t>() < 0) throw std::invalid_argument("expected a non-negative integer");
                value = it->template get<T>();
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!it->is_number()) throw std::invalid_argument("expected a number");
                value = it->template get<T>();
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!it->is_string()) throw std::invalid_argument("expected a string");
                value = it->template get<std::string>();
            } else {
                value = it->template get<T>();
            }
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            fail(ErrorCode::config_error, where(full) + "key '" + full + "': " + e.what());
        }
    }

    template <class S>
    void section(const char* key, S& s) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        JsonReader r(*it, prefix_ + key + ".", source_);
        visit_fields(r, s);
        r.reject_unknown();
    }

    void reject_unknown() const {
        for (const auto& [k, _] : j_.items()) {
            if (!seen_.count(k)) fail(ErrorCode::config_error, where(k) + "unknown key '" + prefix_ + k + "'");
        }
    }

private:
    std::string where(const std::string& key) const {
        if (!source_) return "";
        const std::size_t line = line_of_key(*source_, key.substr(key.rfind('.') == std::string::npos ? 0 : key.rfind('.') + 1));
        return line ? "line " + std::to_string(line) + ": " : "";
    }

    const nlohmann::json& j_;
    std::string prefix_;
    const std::string* source_;
    std::set<std::string> seen_;
};

} // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    ExperimentConfig copy = cfg;
    detail::JsonWriter w;
    visit_fields(w, copy);
    return w.out;
}

inline std::string serialize_config(const ExperimentConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

inline void validate_config(const ExperimentConfig& cfg) {
    if (cfg.runs == 0) fail(ErrorCode::config_error, "key 'runs': must be >= 1");
    cfg.train.validate();
    if (cfg.protocol.n_per_class == 0) fail(ErrorCode::config_error, "key 'protocol.n_per_class': must be >= 1");
    if (!(cfg.protocol.ood.percentile >= 0.0 && cfg.protocol.ood.percentile <= 1.0)) {
        fail(ErrorCode::config_error, "key 'protocol.ood.percentile': must be in [0, 1]");
    }
    if (cfg.data.source == DataSource::synthetic && (cfg.data.n_train == 0 || cfg.data.n_test == 0)) {
        fail(ErrorCode::config_error, "keys 'data.n_train' and 'data.n_test' must be >= 1");
    }
    if (cfg.split.origin == SplitOrigin::truze_file && cfg.split.path.empty()) fail(ErrorCode::config_error, "key 'split.path' required for truze-file");
    if (cfg.corpus.d_emb == 0) fail(ErrorCode::config_error, "key 'corpus.d_emb': must be >= 1");
}

/// Strict parse of a config document: unknown keys and mistyped values are
/// ConfigErrors naming the key (and its line when known).
inline ExperimentConfig parse_config_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto upto = std::min<std::size_t>(e.byte, text.size());
        const std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
        fail(ErrorCode::config_error, "line " + std::to_string(line) + ": malformed JSON: " + e.what());
    }
    ExperimentConfig cfg;
    detail::JsonReader r(j, "", &text);
    visit_fields(r, cfg);
    r.reject_unknown();
    validate_config(cfg);
    return cfg;
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) fail(ErrorCode::io_error, "config file not found: " + path.string());
    return parse_config_text(read_file(path));
}

} // namespace zslforge::io
