// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "zslforge/corpus/corpus.hpp"
#include "zslforge/experiment.hpp"
#include "zslforge/io/config.hpp"
#include "zslforge/io/feature_io.hpp"
#include "zslforge/io/report.hpp"
#include "zslforge/io/svg.hpp"

namespace zslforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline const std::vector<std::string>& verbs() {
    static const std::vector<std::string> v = {"encode-corpus", "stats", "neighbors", "train", "eval-zsl",
                                               "eval-gzsl", "ablate", "synthbench", "plot"};
    return v;
}

inline const std::vector<std::string>& studies() {
    static const std::vector<std::string> v = {"world", "generators", "richness", "convergence"};
    return v;
}

/// Command-line overrides applied on top of the config file.
struct Overrides {
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> runs;
};

inline io::ExperimentConfig resolve_config(const Overrides& o) {
    io::ExperimentConfig cfg = o.config_path ? io::parse_config(*o.config_path) : io::ExperimentConfig{};
    if (o.seed) cfg.seed = *o.seed;
    if (o.out) cfg.out = *o.out;
    if (o.runs) cfg.runs = *o.runs;
    io::validate_config(cfg);
    return cfg;
}

/// What a command produced: the report (already written) plus every
/// artifact path, report included, and a one-line human summary.
struct CommandResult {
    json report;
    std::vector<fs::path> artifacts;
    std::string summary;
};

/// Machine-readable failure record for stderr.
inline json error_record(const std::string& verb, const std::exception& e) {
    json j;
    j["tool"] = "zslforge";
    j["command"] = verb;
    j["status"] = "error";
    if (const auto* ze = dynamic_cast<const Error*>(&e)) {
        j["error"] = std::string(to_string(ze->code()));
    } else {
        j["error"] = "InternalError";
    }
    j["message"] = e.what();
    return j;
}

namespace detail {

inline SentenceEncoderSpec encoder_spec(const io::CorpusConfig& c) {
    SentenceEncoderSpec s;
    s.d_emb = c.d_emb;
    s.vocabulary_seed = c.vocabulary_seed;
    return s;
}

inline void require_corpus(const io::ExperimentConfig& cfg) {
    if (cfg.corpus.path.empty()) fail(ErrorCode::config_error, "key 'corpus.path': required by this command");
}

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

inline double median_or_zero(const EvalReport& r, const std::string& key) {
    auto it = r.aggregate.find(key);
    return it == r.aggregate.end() ? 0.0 : it->second.median;
}

inline json splits_json(const RepeatedResult& r) {
    json a = json::array();
    for (const auto& o : r.outcomes) a.push_back(split_to_json(o.split));
    return a;
}

inline json repeated_json(const RepeatedResult& r) {
    json j = io::eval_report_json(r.report);
    j["splits"] = splits_json(r);
    return j;
}

/// Bar-chart payload understood by the plot command.
inline json chart_json(const std::string& metric, const std::vector<std::string>& labels, const std::vector<double>& values) {
    return json{{"metric", metric}, {"labels", labels}, {"values", values}};
}

struct Context {
    const io::ExperimentConfig& cfg;
    std::string command;
    fs::path out;
    CommandResult result;

    void artifact(const fs::path& p) { result.artifacts.push_back(p); }

    void finish(json results, std::string summary) {
        result.report = io::make_report(command, cfg, std::move(results));
        const fs::path path = out / (report_stem() + ".json");
        io::write_report(path, result.report);
        result.artifacts.insert(result.artifacts.begin(), path);
        result.summary = std::move(summary);
    }

    std::string report_stem() const {
        std::string s = command;
        for (auto& c : s) {
            if (c == ' ') c = '-';
        }
        return s;
    }
};

// ---------------------------------------------------------------------------
// Corpus commands
// ---------------------------------------------------------------------------

inline void encode_corpus_cmd(Context& ctx) {
    const auto& c = ctx.cfg.corpus;
    require_corpus(ctx.cfg);
    const auto docs = corpus::load_corpus(c.path);
    const auto table = corpus::encode_corpus(docs, encoder_spec(c), c.top_k, c.renormalize);
    FeatureSet fs;
    fs.features = table.values();
    fs.labels = table.classes();
    const fs::path emb = ctx.out / "embeddings.zslf";
    io::save_features(emb, fs, io::DType::f64);
    ctx.artifact(emb);
    ctx.artifact(io::labels_path(emb));
    json per_class = json::object();
    for (const auto& d : docs) {
        const std::size_t used = (c.top_k > 0 && !corpus::trim(d.definition).empty()) ? std::min(c.top_k, d.sentences.size()) : d.sentences.size();
        per_class[d.class_name] = {{"sentences", d.sentences.size()}, {"sentences_used", used}};
    }
    ctx.finish({{"classes", table.classes()}, {"d_emb", table.dim()}, {"embeddings", emb.string()}, {"per_class", per_class}},
               "encoded " + std::to_string(table.size()) + " classes into " + emb.string());
}

inline json stats_json(const corpus::CorpusStatistics& s) {
    return {{"sentences", s.sentences}, {"words", s.words},   {"unique_words", s.unique_words}, {"nouns", s.nouns},
            {"verbs", s.verbs},         {"adverbs", s.adverbs}, {"adjectives", s.adjectives}};
}

inline void stats_cmd(Context& ctx) {
    const auto& c = ctx.cfg.corpus;
    require_corpus(ctx.cfg);
    const auto docs = corpus::load_corpus(c.path);
    const corpus::Lexicon lex = c.lexicon.empty() ? corpus::Lexicon{} : corpus::load_lexicon(c.lexicon);
    json per_class = json::object();
    corpus::CorpusStatistics total;
    std::unordered_set<std::string> vocab;
    for (const auto& d : docs) {
        const auto s = corpus::corpus_statistics(d, lex);
        per_class[d.class_name] = stats_json(s);
        total.sentences += s.sentences;
        total.words += s.words;
        total.nouns += s.nouns;
        total.verbs += s.verbs;
        total.adverbs += s.adverbs;
        total.adjectives += s.adjectives;
        for (const auto& sent : d.sentences) {
            for (auto& t : corpus::tokenize(sent)) vocab.insert(std::move(t));
        }
    }
    total.unique_words = vocab.size();
    const std::size_t n = docs.size();
    json avg = json::object();
    if (n > 0) {
        avg["sentences"] = static_cast<double>(total.sentences) / static_cast<double>(n);
        avg["words"] = static_cast<double>(total.words) / static_cast<double>(n);
    }
    ctx.finish({{"classes", n}, {"total", stats_json(total)}, {"per_class_average", avg}, {"per_class", per_class}},
               std::to_string(n) + " classes, " + std::to_string(total.sentences) + " sentences, " + std::to_string(total.unique_words) +
                   " unique words");
}

inline void neighbors_cmd(Context& ctx) {
    const auto& c = ctx.cfg.corpus;
    EmbeddingTable table;
    if (!ctx.cfg.data.embeddings.empty()) {
        table = load_embedding_table(ctx.cfg.data.embeddings);
    } else {
        require_corpus(ctx.cfg);
        table = corpus::encode_corpus(corpus::load_corpus(c.path), encoder_spec(c), c.top_k, c.renormalize);
    }
    std::vector<std::string> queries;
    if (!c.query.empty()) {
        queries.push_back(c.query);
    } else {
        queries = table.classes();
    }
    json result = json::object();
    for (const auto& q : queries) {
        json list = json::array();
        const Vector qv = table.row(q);
        for (const auto& name : corpus::nearest_classes(table, q, c.neighbors)) {
            list.push_back(json{{"class", name}, {"cosine", cosine_similarity(qv, table.row(name))}});
        }
        result[q] = list;
    }
    ctx.finish({{"m", c.neighbors}, {"neighbors", result}},
               "neighbours for " + std::to_string(queries.size()) + " quer" + (queries.size() == 1 ? "y" : "ies"));
}

// ---------------------------------------------------------------------------
// Training and evaluation
// ---------------------------------------------------------------------------

inline json trace_row_json(const TraceRow& r) {
    return {{"epoch", r.epoch}, {"L_D", r.loss_d},       {"L_G", r.loss_g},       {"L_P", r.loss_p},
            {"L_CLS", r.loss_cls}, {"L_MI", r.loss_mi}, {"L_rank", r.loss_rank}, {"lr", r.lr}};
}

/// Trains one generator on the first run's data and writes its loss trace
/// and synthetic unseen-class features.
inline void train_cmd(Context& ctx) {
    const PreparedRun p = prepare_run(ctx.cfg, 0);
    const TrainedGenerator g = train_generator(p, ctx.cfg.train);
    json results;
    results["split"] = split_to_json(p.split);
    results["generator"] = io::enum_name(g.kind);
    if (g.kind != GeneratorKind::vae) {
        const fs::path trace = ctx.out / "trace.csv";
        io::write_atomic(trace, io::trace_csv(g.sdr.trace));
        ctx.artifact(trace);
        results["trace"] = trace.string();
        results["epochs"] = g.sdr.trace.size();
        if (!g.sdr.trace.empty()) results["final"] = trace_row_json(g.sdr.trace.back());
    }
    Rng rng = make_rng(derive_seed(p.seed, "synthesize"));
    const FeatureSet fake = g.synthesizer(p)(p.split.unseen, ctx.cfg.protocol.n_per_class, rng);
    const fs::path feats = ctx.out / "synthetic_unseen.zslf";
    io::save_features(feats, fake, io::DType::f64);
    ctx.artifact(feats);
    ctx.artifact(io::labels_path(feats));
    results["synthetic_features"] = feats.string();
    results["synthetic_rows"] = fake.size();
    ctx.finish(results, "trained " + io::enum_name(g.kind) + " on " + std::to_string(p.split.seen.size()) + " seen classes");
}

inline void eval_cmd(Context& ctx, EvalMode mode) {
    const RepeatedResult r = run_repeated(ctx.cfg, mode);
    json results = repeated_json(r);
    std::string summary;
    if (mode == EvalMode::zsl) {
        summary = "ZSL accuracy median " + fmt(median_or_zero(r.report, "zsl_acc")) + " over " + std::to_string(ctx.cfg.runs) + " runs";
    } else {
        summary = "GZSL u " + fmt(median_or_zero(r.report, "unseen_acc")) + " s " + fmt(median_or_zero(r.report, "seen_acc")) + " H " +
                  fmt(median_or_zero(r.report, "harmonic_mean")) + " (medians over " + std::to_string(ctx.cfg.runs) + " runs)";
    }
    ctx.finish(results, summary);
}

inline std::string median_csv(const std::vector<std::pair<std::string, const EvalReport*>>& rows, const std::vector<std::string>& metrics) {
    std::string out = "name";
    for (const auto& m : metrics) out += "," + m;
    out += "\n";
    for (const auto& [name, rep] : rows) {
        out += name;
        for (const auto& m : metrics) out += "," + io::format_number(median_or_zero(*rep, m));
        out += "\n";
    }
    return out;
}

inline void write_chart(Context& ctx, const std::string& stem, const std::string& title, const json& chart) {
    const fs::path svg = ctx.out / (stem + ".svg");
    io::write_atomic(svg, io::bar_chart_svg(title, chart.at("labels").get<std::vector<std::string>>(),
                                            chart.at("values").get<std::vector<double>>()));
    ctx.artifact(svg);
}

inline void ablate_cmd(Context& ctx) {
    const auto cells = ablation_grid(ctx.cfg);
    json rows = json::array();
    std::vector<std::string> labels;
    std::vector<double> h;
    std::vector<std::pair<std::string, const EvalReport*>> table;
    for (const auto& c : cells) {
        json row = repeated_json(c.result);
        row["name"] = c.name();
        row["stories"] = c.stories;
        row["data_noise"] = c.data_noise;
        row["ranking"] = c.ranking;
        rows.push_back(row);
        labels.push_back(c.name());
        h.push_back(median_or_zero(c.result.report, "harmonic_mean"));
        table.emplace_back(c.name(), &c.result.report);
    }
    const json chart = chart_json("harmonic_mean", labels, h);
    const fs::path csv = ctx.out / "ablate.csv";
    io::write_atomic(csv, median_csv(table, {"harmonic_mean", "unseen_acc", "seen_acc", "zsl_acc", "routing_acc"}));
    ctx.artifact(csv);
    write_chart(ctx, "ablate", "Component ablation: median H", chart);
    const auto best = std::max_element(h.begin(), h.end());
    ctx.finish({{"cells", rows}, {"chart", chart}},
               "8-cell grid; full H " + fmt(h.back()) + ", best " + labels[static_cast<std::size_t>(best - h.begin())] + " " + fmt(*best));
}

// ---------------------------------------------------------------------------
// Synthetic benchmark
// ---------------------------------------------------------------------------

inline void world_study(Context& ctx) {
    if (ctx.cfg.data.source != io::DataSource::synthetic) fail(ErrorCode::config_error, "synthbench needs data.source 'synthetic'");
    const PreparedRun p = prepare_run(ctx.cfg, 0);
    const fs::path world = ctx.out / "world.json";
    synthbench::save_world(world, *p.world);
    for (const auto& suffix : {"", ".embeddings.zslf", ".W.zslf", ".b.zslf"}) ctx.artifact(world.string() + suffix);
    const std::vector<std::pair<std::string, const FeatureSet*>> sets = {
        {"seen_train", &p.seen_train}, {"unseen_test", &p.unseen_test}, {"gzsl_test", &p.gzsl_test}};
    json files = json::object();
    for (const auto& [name, set] : sets) {
        const fs::path f = ctx.out / (name + ".zslf");
        io::save_features(f, *set, io::DType::f64);
        ctx.artifact(f);
        ctx.artifact(io::labels_path(f));
        files[name] = f.string();
    }
    const fs::path emb = ctx.out / "embeddings.zslf";
    FeatureSet e;
    e.features = p.embeddings.values();
    e.labels = p.embeddings.classes();
    io::save_features(emb, e, io::DType::f64);
    ctx.artifact(emb);
    ctx.artifact(io::labels_path(emb));
    files["embeddings"] = emb.string();
    const fs::path split = ctx.out / "split.json";
    io::write_atomic(split, split_to_json(p.split).dump(2) + "\n");
    ctx.artifact(split);
    files["split"] = split.string();
    const double bayes = synthbench::bayes_oracle_accuracy(*p.world, p.unseen_test, p.split.unseen);
    ctx.finish({{"world", synthbench::world_header(*p.world)}, {"split", split_to_json(p.split)}, {"files", files}, {"bayes_zsl_acc", bayes}},
               "world with " + std::to_string(p.world->classes().size()) + " classes; Bayes ZSL accuracy " + fmt(bayes));
}

inline void named_grid_study(Context& ctx, const std::vector<NamedResult>& grid, const std::string& metric, const std::string& title) {
    json rows = json::array();
    std::vector<std::string> labels;
    std::vector<double> values;
    std::vector<std::pair<std::string, const EvalReport*>> table;
    for (const auto& g : grid) {
        json row = repeated_json(g.result);
        row["name"] = g.name;
        rows.push_back(row);
        labels.push_back(g.name);
        values.push_back(median_or_zero(g.result.report, metric));
        table.emplace_back(g.name, &g.result.report);
    }
    const json chart = chart_json(metric, labels, values);
    const fs::path csv = ctx.out / (ctx.report_stem() + ".csv");
    io::write_atomic(csv, median_csv(table, {"zsl_acc", "harmonic_mean", "unseen_acc", "seen_acc", "bayes_zsl_acc"}));
    ctx.artifact(csv);
    write_chart(ctx, ctx.report_stem(), title, chart);
    std::string summary;
    for (std::size_t i = 0; i < labels.size(); ++i) summary += (i ? ", " : "") + labels[i] + " " + fmt(values[i]);
    ctx.finish({{"variants", rows}, {"chart", chart}}, summary);
}

inline void convergence_study_cmd(Context& ctx) {
    const ConvergenceResult r = convergence_study(ctx.cfg);
    json curves = json::array();
    json runs = json::array();
    std::vector<double> mean_dd(ctx.cfg.train.epochs, 0.0);
    std::vector<double> mean_g(ctx.cfg.train.epochs, 0.0);
    for (std::size_t i = 0; i < ctx.cfg.runs; ++i) {
        runs.push_back({{"data_driven", r.data_driven[i].accuracy},
                        {"gaussian", r.gaussian[i].accuracy},
                        {"epochs_to_90_data_driven", r.data_driven[i].epochs_to_90},
                        {"epochs_to_90_gaussian", r.gaussian[i].epochs_to_90}});
        for (std::size_t e = 0; e < mean_dd.size(); ++e) {
            mean_dd[e] += r.data_driven[i].accuracy.at(e) / static_cast<double>(ctx.cfg.runs);
            mean_g[e] += r.gaussian[i].accuracy.at(e) / static_cast<double>(ctx.cfg.runs);
        }
    }
    curves.push_back({{"name", "data-driven"}, {"y", mean_dd}});
    curves.push_back({{"name", "gaussian"}, {"y", mean_g}});
    const fs::path svg = ctx.out / "synthbench-convergence.svg";
    io::write_atomic(svg, io::line_plot_svg("Mean ZSL accuracy per epoch", {{"data-driven", mean_dd}, {"gaussian", mean_g}}));
    ctx.artifact(svg);
    ctx.finish({{"runs", runs},
                {"curves", curves},
                {"median_epochs_to_90_data_driven", r.median_epochs_data_driven},
                {"median_epochs_to_90_gaussian", r.median_epochs_gaussian}},
               "median epochs to 90% of final accuracy: data-driven " + fmt(r.median_epochs_data_driven) + ", gaussian " +
                   fmt(r.median_epochs_gaussian));
}

inline void synthbench_cmd(Context& ctx, const std::string& study) {
    if (study == "world") return world_study(ctx);
    if (study == "generators") return named_grid_study(ctx, generator_grid(ctx.cfg), "harmonic_mean", "Generator choice: median H");
    if (study == "richness") return named_grid_study(ctx, richness_grid(ctx.cfg), "zsl_acc", "Embedding richness: median ZSL accuracy");
    if (study == "convergence") return convergence_study_cmd(ctx);
    fail(ErrorCode::config_error, "unknown synthbench study '" + study + "'");
}

// ---------------------------------------------------------------------------
// Plotting
// ---------------------------------------------------------------------------

inline void plot_cmd(Context& ctx) {
    const std::string& in = ctx.cfg.plot.input;
    if (in.empty()) fail(ErrorCode::config_error, "key 'plot.input': required by plot");
    const fs::path path(in);
    const std::string title = ctx.cfg.plot.title.empty() ? path.filename().string() : ctx.cfg.plot.title;
    const fs::path svg = ctx.out / (path.stem().string() + ".svg");
    std::string kind;
    json detail = json::object();
    const std::string ext = path.extension().string();
    if (ext == ".csv") {
        const io::Table t = io::parse_csv_table(io::read_file(path));
        std::vector<io::Series> series;
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            if (t.columns[c] == "epoch") continue;
            io::Series s{t.columns[c], {}};
            for (const auto& row : t.rows) s.y.push_back(row[c]);
            series.push_back(std::move(s));
        }
        if (series.empty()) fail(ErrorCode::format_error, in + ": no value columns");
        io::write_atomic(svg, io::line_plot_svg(title, series));
        kind = "curves";
        detail["points_per_series"] = t.rows.size();
        detail["series"] = series.size();
    } else if (ext == ".zslf") {
        const FeatureSet fs = io::load_features(path);
        io::write_atomic(svg, io::pca_scatter_svg(title, fs.features, fs.labels));
        kind = "pca-scatter";
        detail["points"] = fs.size();
    } else if (ext == ".json") {
        json report;
        try {
            report = json::parse(io::read_file(path));
        } catch (const json::exception& e) {
            fail(ErrorCode::format_error, in + ": " + e.what());
        }
        const json results = report.value("results", json::object());
        if (results.contains("chart")) {
            const json& chart = results.at("chart");
            io::write_atomic(svg, io::bar_chart_svg(title, chart.at("labels").get<std::vector<std::string>>(),
                                                    chart.at("values").get<std::vector<double>>()));
            kind = "bars";
            detail["bars"] = chart.at("labels").size();
        } else if (results.contains("curves")) {
            std::vector<io::Series> series;
            for (const auto& c : results.at("curves")) series.push_back({c.at("name").get<std::string>(), c.at("y").get<std::vector<double>>()});
            io::write_atomic(svg, io::line_plot_svg(title, series));
            kind = "curves";
            detail["series"] = series.size();
        } else {
            fail(ErrorCode::format_error, in + ": report has neither a chart nor curves to plot");
        }
    } else {
        fail(ErrorCode::format_error, in + ": plot input must be .csv, .json or .zslf");
    }
    ctx.artifact(svg);
    detail["kind"] = kind;
    detail["input"] = in;
    detail["svg"] = svg.string();
    ctx.finish(detail, "wrote " + svg.string());
}

} // namespace detail

/// Runs one verb against a resolved config. Writes the report to
/// <out>/<verb>.json and all other artifacts under <out>.
inline CommandResult run_command(const std::string& verb, const io::ExperimentConfig& cfg, const std::string& study = "world") {
    if (std::find(verbs().begin(), verbs().end(), verb) == verbs().end()) fail(ErrorCode::config_error, "unknown command '" + verb + "'");
    io::validate_config(cfg);
    detail::Context ctx{cfg, verb == "synthbench" && study != "world" ? verb + " " + study : verb, fs::path(cfg.out), {}};
    if (verb == "encode-corpus") detail::encode_corpus_cmd(ctx);
    else if (verb == "stats") detail::stats_cmd(ctx);
    else if (verb == "neighbors") detail::neighbors_cmd(ctx);
    else if (verb == "train") detail::train_cmd(ctx);
    else if (verb == "eval-zsl") detail::eval_cmd(ctx, EvalMode::zsl);
    else if (verb == "eval-gzsl") detail::eval_cmd(ctx, EvalMode::gzsl);
    else if (verb == "ablate") detail::ablate_cmd(ctx);
    else if (verb == "synthbench") detail::synthbench_cmd(ctx, study);
    else detail::plot_cmd(ctx);
    return std::move(ctx.result);
}

} // namespace zslforge::cli
