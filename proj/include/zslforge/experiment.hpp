// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "zslforge/corpus/embedding.hpp"
#include "zslforge/error.hpp"
#include "zslforge/generative/sdr.hpp"
#include "zslforge/io/config.hpp"
#include "zslforge/io/feature_io.hpp"
#include "zslforge/random.hpp"
#include "zslforge/synthbench/world.hpp"
#include "zslforge/zsl/metrics.hpp"
#include "zslforge/zsl/protocol.hpp"
#include "zslforge/zsl/splits.hpp"

namespace zslforge {

// ---------------------------------------------------------------------------
// Parallelism: independent jobs, results stored by index, so the outcome
// does not depend on the thread count.
// ---------------------------------------------------------------------------

/// Worker cap: ZSLFORGE_THREADS when set (>= 1), else the hardware count.
inline std::size_t thread_cap() {
    if (const char* env = std::getenv("ZSLFORGE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
        fail(ErrorCode::config_error, "ZSLFORGE_THREADS must be a positive integer");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& job, std::size_t threads = thread_cap()) {
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// One run
// ---------------------------------------------------------------------------

/// Everything a single run needs: its split, the embeddings the generator
/// sees, and the real feature sets.
struct PreparedRun {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    SplitSpec split;
    EmbeddingTable embeddings;
    std::optional<synthbench::World> world;
    FeatureSet seen_train;
    FeatureSet unseen_test;
    FeatureSet gzsl_test;
};

inline std::uint64_t run_seed(const io::ExperimentConfig& cfg, std::size_t run) { return derive_seed(cfg.seed, run); }

inline SplitSource split_source(const io::SplitConfig& s) {
    SplitSource src;
    src.origin = s.origin;
    src.path = s.path;
    src.seen = s.seen;
    src.unseen = s.unseen;
    return src;
}

inline EmbeddingTable load_embedding_table(const std::string& path) {
    const FeatureSet fs = io::load_features_any(path);
    return EmbeddingTable(fs.labels, fs.features);
}

inline PreparedRun prepare_run(const io::ExperimentConfig& cfg, std::size_t run) {
    PreparedRun p;
    p.index = run;
    p.seed = run_seed(cfg, run);
    if (cfg.data.source == io::DataSource::synthetic) {
        synthbench::WorldSpec ws = cfg.world;
        ws.seed = derive_seed(p.seed, "world");
        p.world = synthbench::generate_world(ws);
        p.embeddings = p.world->embeddings;
        p.split = make_splits(p.world->classes(), split_source(cfg.split), derive_seed(p.seed, "split"), 1).front();
        auto d = synthbench::sample_dataset(*p.world, p.split, cfg.data.n_train, cfg.data.n_test, derive_seed(p.seed, "data"));
        p.seen_train = std::move(d.seen_train);
        p.unseen_test = std::move(d.unseen_test);
        p.gzsl_test = std::move(d.gzsl_test);
        return p;
    }
    if (cfg.data.train_features.empty() || cfg.data.test_features.empty() || cfg.data.embeddings.empty()) {
        fail(ErrorCode::config_error, "data.source 'files' needs data.train_features, data.test_features and data.embeddings");
    }
    p.embeddings = load_embedding_table(cfg.data.embeddings);
    p.split = make_splits(p.embeddings.classes(), split_source(cfg.split), derive_seed(p.seed, "split"), 1).front();
    const FeatureSet train = io::load_features_any(cfg.data.train_features);
    const FeatureSet test = io::load_features_any(cfg.data.test_features);
    p.seen_train = train.restrict_to(p.split.seen);
    p.unseen_test = test.restrict_to(p.split.unseen);
    p.gzsl_test = test.restrict_to(p.embeddings.classes());
    if (p.seen_train.empty()) fail(ErrorCode::empty_input, "no training rows for the seen classes");
    return p;
}

/// A trained generator of any kind, able to synthesize for a prepared run.
struct TrainedGenerator {
    GeneratorKind kind = GeneratorKind::sdr;
    SdrResult sdr;
    VaeModel cvae;

    /// The returned callable references `this` and `p`; both must outlive it.
    Synthesizer synthesizer(const PreparedRun& p) const {
        if (kind == GeneratorKind::vae) {
            return [this, &p](const std::vector<std::string>& classes, std::size_t n, Rng& rng) {
                return synthesize_conditional_vae(cvae, classes, n, p.embeddings, rng);
            };
        }
        return bundle_synthesizer(sdr.bundle, p.embeddings, p.seen_train, sdr.vae);
    }
};

inline TrainConfig effective_train_config(TrainConfig t, std::uint64_t seed) {
    t.seed = derive_seed(seed, "train");
    if (t.kind == GeneratorKind::vanilla_gan) t = as_vanilla_gan(t);
    return t;
}

inline TrainedGenerator train_generator(const PreparedRun& p, const TrainConfig& base, const EpochCallback& on_epoch = {}) {
    const TrainConfig t = effective_train_config(base, p.seed);
    TrainedGenerator g;
    g.kind = t.kind;
    if (t.kind == GeneratorKind::vae) {
        g.cvae = train_conditional_vae(p.seen_train, p.embeddings, t);
    } else {
        g.sdr = train_sdr(p.seen_train, p.embeddings, t, on_epoch);
    }
    return g;
}

enum class EvalMode { zsl, gzsl, both };

struct RunOutcome {
    RunResult result;
    std::vector<TraceRow> trace;
    std::optional<double> bayes_zsl; // synthetic worlds only
    SplitSpec split;
};

inline ProtocolConfig protocol_for(const io::ExperimentConfig& cfg, std::uint64_t seed) {
    ProtocolConfig pc = cfg.protocol;
    pc.seed = derive_seed(seed, "protocol");
    return pc;
}

/// Prepares, optionally degrades the generator-side embeddings, trains, and
/// evaluates one run.
inline RunOutcome run_pipeline(const io::ExperimentConfig& cfg, std::size_t run, EvalMode mode,
                               const std::optional<synthbench::DegradeSpec>& degrade = std::nullopt) {
    PreparedRun p = prepare_run(cfg, run);
    if (degrade) {
        synthbench::DegradeSpec d = *degrade;
        d.seed = derive_seed(p.seed, "degrade");
        p.embeddings = synthbench::degrade_embeddings(p.embeddings, d);
    }
    const TrainedGenerator g = train_generator(p, cfg.train);
    const Synthesizer synth = g.synthesizer(p);
    const ProtocolConfig pc = protocol_for(cfg, p.seed);

    RunOutcome out;
    out.split = p.split;
    out.trace = g.sdr.trace;
    if (mode != EvalMode::gzsl && !p.unseen_test.empty()) {
        const RunResult z = zsl_protocol(synth, p.split, p.unseen_test, pc);
        out.result.zsl_acc = z.zsl_acc;
        out.result.per_class_acc = z.per_class_acc;
        if (p.world) out.bayes_zsl = synthbench::bayes_oracle_accuracy(*p.world, p.unseen_test, p.split.unseen);
    }
    if (mode != EvalMode::zsl) {
        const RunResult gz = gzsl_protocol(synth, p.split, p.seen_train, p.gzsl_test, pc);
        out.result.unseen_acc = gz.unseen_acc;
        out.result.seen_acc = gz.seen_acc;
        out.result.harmonic = gz.harmonic;
        out.result.routing_acc = gz.routing_acc;
        if (mode == EvalMode::gzsl) out.result.per_class_acc = gz.per_class_acc;
    }
    return out;
}

struct RepeatedResult {
    EvalReport report;
    std::vector<RunOutcome> outcomes;
};

inline RepeatedResult collect(std::vector<RunOutcome> outcomes) {
    RepeatedResult r;
    std::vector<RunResult> runs;
    for (const auto& o : outcomes) runs.push_back(o.result);
    r.report = aggregate_runs(std::move(runs));
    std::vector<double> bayes;
    for (const auto& o : outcomes) {
        if (o.bayes_zsl) bayes.push_back(*o.bayes_zsl);
    }
    if (!bayes.empty()) r.report.aggregate["bayes_zsl_acc"] = summarize(bayes);
    r.outcomes = std::move(outcomes);
    return r;
}

/// The full pipeline once per run with run seeds derived from the master
/// seed; runs execute in parallel up to the thread cap.
inline RepeatedResult run_repeated(const io::ExperimentConfig& cfg, EvalMode mode,
                                   const std::optional<synthbench::DegradeSpec>& degrade = std::nullopt) {
    if (cfg.runs == 0) fail(ErrorCode::config_error, "run_repeated: runs must be >= 1");
    std::vector<RunOutcome> outcomes(cfg.runs);
    parallel_for(cfg.runs, [&](std::size_t i) { outcomes[i] = run_pipeline(cfg, i, mode, degrade); });
    return collect(std::move(outcomes));
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// One cell of the component-toggle grid.
struct AblationCell {
    bool stories = false;     // full embeddings (off: degraded)
    bool data_noise = false;  // data-driven noise (off: Gaussian)
    bool ranking = false;     // ranking loss (off: lambda_rank = 0)
    RepeatedResult result;

    std::string name() const {
        std::string n;
        n += stories ? "stories" : "no-stories";
        n += data_noise ? "+data-noise" : "+gaussian-noise";
        n += ranking ? "+ranking" : "+no-ranking";
        return n;
    }
    int components() const { return int(stories) + int(data_noise) + int(ranking); }
};

inline synthbench::DegradeSpec stories_off_degradation(const io::AblationConfig& a) {
    synthbench::DegradeSpec d;
    d.mode = a.stories_off;
    d.rank = a.stories_off_rank;
    d.sigma = a.stories_off_sigma;
    d.pairs = a.richness_pairs;
    return d;
}

/// All eight on/off combinations, baseline first and full configuration
/// last; every cell runs the same seeds (paired comparison).
inline std::vector<AblationCell> ablation_grid(const io::ExperimentConfig& cfg) {
    std::vector<AblationCell> cells;
    for (int mask = 0; mask < 8; ++mask) {
        AblationCell c;
        c.stories = mask & 1;
        c.data_noise = mask & 2;
        c.ranking = mask & 4;
        cells.push_back(c);
    }
    std::stable_sort(cells.begin(), cells.end(), [](const AblationCell& a, const AblationCell& b) { return a.components() < b.components(); });
    std::vector<std::vector<RunOutcome>> outcomes(cells.size(), std::vector<RunOutcome>(cfg.runs));
    parallel_for(cells.size() * cfg.runs, [&](std::size_t job) {
        const std::size_t ci = job / cfg.runs;
        const std::size_t run = job % cfg.runs;
        io::ExperimentConfig c = cfg;
        c.train.kind = GeneratorKind::sdr;
        c.train.noise_source = cells[ci].data_noise ? NoiseSource::data_driven : NoiseSource::gaussian;
        if (!cells[ci].ranking) c.train.lambda_rank = 0.0;
        std::optional<synthbench::DegradeSpec> d;
        if (!cells[ci].stories) d = stories_off_degradation(cfg.ablation);
        outcomes[ci][run] = run_pipeline(c, run, EvalMode::both, d);
    });
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i].result = collect(std::move(outcomes[i]));
    return cells;
}

struct NamedResult {
    std::string name;
    RepeatedResult result;
};

/// Generator-choice comparison: VAE-only, vanilla GAN, full SDR.
inline std::vector<NamedResult> generator_grid(const io::ExperimentConfig& cfg) {
    const std::vector<GeneratorKind> kinds = {GeneratorKind::vae, GeneratorKind::vanilla_gan, GeneratorKind::sdr};
    std::vector<std::vector<RunOutcome>> outcomes(kinds.size(), std::vector<RunOutcome>(cfg.runs));
    parallel_for(kinds.size() * cfg.runs, [&](std::size_t job) {
        io::ExperimentConfig c = cfg;
        c.train.kind = kinds[job / cfg.runs];
        outcomes[job / cfg.runs][job % cfg.runs] = run_pipeline(c, job % cfg.runs, EvalMode::both);
    });
    std::vector<NamedResult> out;
    for (std::size_t k = 0; k < kinds.size(); ++k) out.push_back({io::enum_name(kinds[k]), collect(std::move(outcomes[k]))});
    return out;
}

/// ZSL accuracy under progressively poorer generator-side embeddings.
inline std::vector<NamedResult> richness_grid(const io::ExperimentConfig& cfg) {
    std::vector<std::pair<std::string, std::optional<synthbench::DegradeSpec>>> variants;
    variants.emplace_back("full", std::nullopt);
    synthbench::DegradeSpec rr;
    rr.mode = synthbench::Degradation::rank_reduce;
    rr.rank = cfg.ablation.richness_rank;
    variants.emplace_back("rank-reduced", rr);
    synthbench::DegradeSpec cp;
    cp.mode = synthbench::Degradation::collapse_pairs;
    cp.pairs = cfg.ablation.richness_pairs;
    variants.emplace_back("pair-collapsed", cp);
    synthbench::DegradeSpec id;
    id.mode = synthbench::Degradation::identical;
    variants.emplace_back("identical", id);

    std::vector<std::vector<RunOutcome>> outcomes(variants.size(), std::vector<RunOutcome>(cfg.runs));
    parallel_for(variants.size() * cfg.runs, [&](std::size_t job) {
        const std::size_t v = job / cfg.runs;
        outcomes[v][job % cfg.runs] = run_pipeline(cfg, job % cfg.runs, EvalMode::zsl, variants[v].second);
    });
    std::vector<NamedResult> out;
    for (std::size_t v = 0; v < variants.size(); ++v) out.push_back({variants[v].first, collect(std::move(outcomes[v]))});
    return out;
}

// ---------------------------------------------------------------------------
// Convergence: ZSL accuracy after every epoch
// ---------------------------------------------------------------------------

struct ConvergenceCurve {
    std::vector<double> accuracy; // one entry per epoch
    std::size_t epochs_to_90 = 0; // first epoch reaching 90% of the final accuracy
};

/// First 1-based epoch whose accuracy reaches `fraction` of the last
/// epoch's accuracy.
inline std::size_t epochs_to_fraction(const std::vector<double>& acc, double fraction = 0.9) {
    if (acc.empty()) fail(ErrorCode::empty_input, "epochs_to_fraction: empty curve");
    const double target = fraction * acc.back();
    for (std::size_t e = 0; e < acc.size(); ++e) {
        if (acc[e] >= target) return e + 1;
    }
    return acc.size();
}

inline ConvergenceCurve convergence_curve(const io::ExperimentConfig& cfg, std::size_t run, NoiseSource noise) {
    const PreparedRun p = prepare_run(cfg, run);
    TrainConfig t = cfg.train;
    t.kind = GeneratorKind::sdr;
    t.noise_source = noise;
    const ProtocolConfig pc = protocol_for(cfg, p.seed);
    ConvergenceCurve curve;
    auto on_epoch = [&](std::size_t, const GeneratorBundle& b, const VaeModel& vae) {
        const Synthesizer s = bundle_synthesizer(b, p.embeddings, p.seen_train, vae);
        curve.accuracy.push_back(*zsl_protocol(s, p.split, p.unseen_test, pc).zsl_acc);
    };
    train_generator(p, t, on_epoch);
    curve.epochs_to_90 = epochs_to_fraction(curve.accuracy);
    return curve;
}

struct ConvergenceResult {
    std::vector<ConvergenceCurve> data_driven;
    std::vector<ConvergenceCurve> gaussian;
    double median_epochs_data_driven = 0.0;
    double median_epochs_gaussian = 0.0;
};

/// Paired runs (same seed, data and split) with each noise source.
inline ConvergenceResult convergence_study(const io::ExperimentConfig& cfg) {
    ConvergenceResult r;
    r.data_driven.resize(cfg.runs);
    r.gaussian.resize(cfg.runs);
    parallel_for(2 * cfg.runs, [&](std::size_t job) {
        const std::size_t run = job / 2;
        if (job % 2 == 0) {
            r.data_driven[run] = convergence_curve(cfg, run, NoiseSource::data_driven);
        } else {
            r.gaussian[run] = convergence_curve(cfg, run, NoiseSource::gaussian);
        }
    });
    std::vector<double> a;
    std::vector<double> b;
    for (std::size_t i = 0; i < cfg.runs; ++i) {
        a.push_back(static_cast<double>(r.data_driven[i].epochs_to_90));
        b.push_back(static_cast<double>(r.gaussian[i].epochs_to_90));
    }
    r.median_epochs_data_driven = median_of(a);
    r.median_epochs_gaussian = median_of(b);
    return r;
}

} // namespace zslforge
