// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "zslforge/corpus/corpus.hpp"
#include "zslforge/corpus/embedding.hpp"
#include "zslforge/error.hpp"
#include "zslforge/generative/losses.hpp"
#include "zslforge/generative/vae.hpp"
#include "zslforge/nn/adam.hpp"
#include "zslforge/nn/mlp.hpp"
#include "zslforge/nn/penalty.hpp"
#include "zslforge/random.hpp"
#include "zslforge/zsl/classifier.hpp"
#include "zslforge/zsl/feature_set.hpp"

namespace zslforge {

enum class NoiseSource { gaussian, data_driven };
enum class PenaltyPoint { generated, interpolates };
enum class RealConditioning { projected, ground_truth };
enum class GeneratorKind { sdr, vanilla_gan, vae };

/// Hyperparameters of the feature-generation stage.
struct TrainConfig {
    double alpha = 10.0;       // gradient-penalty coefficient
    double lambda_cls = 0.1;   // classification regularizer
    double lambda_rank = 0.9;  // ranking loss on the projection network
    double lambda_mi = 0.1;    // mutual-information surrogate
    double delta = 0.2;        // ranking margin
    std::size_t m_noise = 3;   // seen neighbours feeding data-driven noise for an unseen class
    std::size_t m_rank = 5;    // neighbours the ranking negative is drawn from
    std::size_t n_critic = 5;
    std::size_t epochs = 60;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    double beta1 = 0.5;
    double weight_decay = 5e-4;
    std::uint64_t seed = 0;
    NoiseSource noise_source = NoiseSource::data_driven;
    double hidden_scale = 1.0 / 32.0; // 4096 * hidden_scale hidden units
    std::size_t d_z = 8;
    Activation generator_output = Activation::relu;
    PenaltyPoint penalty_at = PenaltyPoint::generated;
    RealConditioning real_condition = RealConditioning::projected;
    bool rank_on_generated = false;
    bool lr_schedule = true;
    GeneratorKind kind = GeneratorKind::sdr;
    VaeConfig vae{};
    ClassifierConfig cls{};

    std::size_t hidden() const {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(4096.0 * hidden_scale)));
    }

    void validate() const {
        for (double c : {alpha, lambda_cls, lambda_rank, lambda_mi, delta, weight_decay}) {
            if (!(c >= 0.0) || !std::isfinite(c)) fail(ErrorCode::config_error, "train config: coefficients must be finite and >= 0");
        }
        if (n_critic == 0 || batch_size == 0 || d_z == 0) fail(ErrorCode::config_error, "train config: n_critic, batch_size and d_z must be >= 1");
        if (!(lr > 0.0) || !(hidden_scale > 0.0)) fail(ErrorCode::config_error, "train config: lr and hidden_scale must be > 0");
        if (m_noise == 0 || m_rank == 0) fail(ErrorCode::config_error, "train config: neighbour counts must be >= 1");
    }
};

/// Plain conditional score game: no penalty, no regularizers, critic
/// conditioned on ground-truth embeddings, Gaussian noise.
inline TrainConfig as_vanilla_gan(TrainConfig cfg) {
    cfg.kind = GeneratorKind::vanilla_gan;
    cfg.alpha = 0.0;
    cfg.lambda_cls = 0.0;
    cfg.lambda_rank = 0.0;
    cfg.lambda_mi = 0.0;
    cfg.noise_source = NoiseSource::gaussian;
    cfg.real_condition = RealConditioning::ground_truth;
    return cfg;
}

struct GeneratorBundle {
    MlpParams G; // [a, z] -> x
    MlpParams D; // [x, a] -> score
    MlpParams P; // x -> a
    SoftmaxClassifier pretrained_cls;
    Matrix mi_critic; // d_feat x d_emb
    TrainConfig config;
    std::vector<std::string> seen_classes;
    std::size_t d_feat = 0;
    std::size_t d_emb = 0;
    bool trained = false;

    static GeneratorBundle create(std::size_t d_feat, std::size_t d_emb, const TrainConfig& cfg, Rng& rng) {
        GeneratorBundle b;
        b.config = cfg;
        b.d_feat = d_feat;
        b.d_emb = d_emb;
        const std::size_t h = cfg.hidden();
        b.G = MlpParams::create({d_emb + cfg.d_z, h, h, d_feat}, Activation::leaky_relu, cfg.generator_output, rng);
        b.D = MlpParams::create({d_feat + d_emb, h, h, 1}, Activation::leaky_relu, Activation::linear, rng);
        b.P = MlpParams::create({d_feat, h, d_emb}, Activation::leaky_relu, Activation::linear, rng);
        const double bound = 1.0 / std::sqrt(static_cast<double>(d_feat * d_emb));
        b.mi_critic = Matrix(static_cast<Eigen::Index>(d_feat), static_cast<Eigen::Index>(d_emb));
        for (Eigen::Index i = 0; i < b.mi_critic.size(); ++i) b.mi_critic.data()[i] = uniform(rng, -bound, bound);
        return b;
    }

    Matrix generate(const Matrix& a, const Matrix& z) const { return mlp_predict(G, hconcat(a, z)); }
};

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

/// Draws generator noise for a target class. Gaussian mode ignores the
/// class. Data-driven mode encodes a real seen feature: of the class itself
/// when it is seen, otherwise of one of its m_noise nearest seen classes.
class NoiseSampler {
public:
    NoiseSampler(const TrainConfig& cfg, const EmbeddingTable& embeddings, const FeatureSet& seen, const VaeModel* vae)
        : source_(cfg.noise_source), d_z_(cfg.d_z), embeddings_(&embeddings) {
        if (source_ == NoiseSource::gaussian) return;
        if (vae == nullptr || !vae->trained) fail(ErrorCode::untrained_vae, "data-driven noise needs a trained VAE");
        if (seen.empty()) fail(ErrorCode::empty_input, "data-driven noise needs seen features");
        d_z_ = vae->d_z;
        const LatentCode code = vae_encode(*vae, seen.features);
        mu_ = code.mu;
        sigma_ = code.logvar.unaryExpr([](double l) { return logvar_to_sigma(l); });
        std::vector<std::string> seen_classes = seen.classes();
        std::sort(seen_classes.begin(), seen_classes.end());
        for (std::size_t i = 0; i < seen.size(); ++i) rows_[seen.labels[i]].push_back(i);

        const std::size_t m = std::min(cfg.m_noise, seen_classes.size());
        for (const auto& cls : embeddings.classes()) {
            if (rows_.count(cls)) {
                sources_[cls] = {cls};
                continue;
            }
            std::vector<std::string> names = seen_classes;
            names.push_back(cls);
            sources_[cls] = corpus::nearest_classes(embeddings.subset(names), cls, m);
        }
    }

    std::size_t d_z() const { return d_z_; }

    /// Seen classes whose features feed the noise of `cls`.
    const std::vector<std::string>& sources(const std::string& cls) const {
        auto it = sources_.find(cls);
        if (it == sources_.end()) fail(ErrorCode::unknown_class, "no noise source for class '" + cls + "'");
        return it->second;
    }

    Vector sample(const std::string& cls, Rng& rng) const {
        if (!embeddings_->contains(cls)) fail(ErrorCode::unknown_class, "noise requested for unknown class '" + cls + "'");
        Vector z(static_cast<Eigen::Index>(d_z_));
        if (source_ == NoiseSource::gaussian) {
            for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = standard_normal(rng);
            return z;
        }
        const auto& src = sources(cls);
        const std::string& from = src[uniform_index(rng, src.size())];
        const auto& rows = rows_.at(from);
        const auto r = static_cast<Eigen::Index>(rows[uniform_index(rng, rows.size())]);
        for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = mu_(r, j) + sigma_(r, j) * standard_normal(rng);
        return z;
    }

    Matrix sample(const std::vector<std::string>& classes, Rng& rng) const {
        Matrix z(static_cast<Eigen::Index>(classes.size()), static_cast<Eigen::Index>(d_z_));
        for (std::size_t i = 0; i < classes.size(); ++i) z.row(static_cast<Eigen::Index>(i)) = sample(classes[i], rng).transpose();
        return z;
    }

private:
    NoiseSource source_;
    std::size_t d_z_;
    const EmbeddingTable* embeddings_;
    Matrix mu_;
    Matrix sigma_;
    std::unordered_map<std::string, std::vector<std::size_t>> rows_;
    std::unordered_map<std::string, std::vector<std::string>> sources_;
};

inline Vector sample_noise(const std::string& target_class, const EmbeddingTable& embeddings, const FeatureSet& seen,
                           const VaeModel* vae, const TrainConfig& cfg, Rng& rng) {
    return NoiseSampler(cfg, embeddings, seen, vae).sample(target_class, rng);
}

// ---------------------------------------------------------------------------
// Objectives. Each is a deterministic function of its inputs so it can be
// checked against finite differences.
// ---------------------------------------------------------------------------

struct CriticResult {
    double objective = 0.0; // L_D, maximized by the critic
    double real_score = 0.0;
    double fake_score = 0.0;
    double penalty = 0.0;
    MlpParams grad; // gradient of -L_D with respect to D
    std::size_t degenerate_rows = 0;
};

/// L_D = E[D(x, c(x))] - E[D(x_gen, a)] - alpha * E[(||grad_x D(x_pen, a)|| - 1)^2]
/// where c(x) = P(x) (projected, P frozen) or the true embedding, and the
/// penalty is taken at the generated rows or at real/generated
/// interpolates (`mix` holds one weight per row in that case).
inline CriticResult critic_objective(const GeneratorBundle& b, const Matrix& real_x, const Matrix& real_a, const Matrix& fake_x,
                                     const Matrix& fake_a, const TrainConfig& cfg, const Vector& mix = {}) {
    if (real_x.rows() == 0 || fake_x.rows() == 0) fail(ErrorCode::empty_input, "critic_objective: empty batch");
    if (b.D.output_dim() != 1) fail(ErrorCode::not_scalar_output, "critic must be scalar-output");
    const Matrix cond = cfg.real_condition == RealConditioning::projected ? mlp_predict(b.P, real_x) : real_a;
    const Matrix real_in = hconcat(real_x, cond);
    const Matrix fake_in = hconcat(fake_x, fake_a);
    const ForwardCache rc = mlp_forward(b.D, real_in);
    const ForwardCache fc = mlp_forward(b.D, fake_in);

    CriticResult out;
    out.real_score = rc.output.mean();
    out.fake_score = fc.output.mean();
    const double nr = static_cast<double>(real_x.rows());
    const double nf = static_cast<double>(fake_x.rows());
    out.grad = mlp_backward(b.D, rc, Matrix::Constant(real_in.rows(), 1, -1.0 / nr)).params;
    out.grad += mlp_backward(b.D, fc, Matrix::Constant(fake_in.rows(), 1, 1.0 / nf)).params;

    if (cfg.alpha > 0.0) {
        Matrix pen_in = fake_in;
        if (cfg.penalty_at == PenaltyPoint::interpolates) {
            if (mix.size() != fake_x.rows() || real_x.rows() != fake_x.rows()) {
                fail(ErrorCode::shape_mismatch, "critic_objective: interpolation weights");
            }
            for (Eigen::Index i = 0; i < fake_x.rows(); ++i) {
                pen_in.row(i).head(fake_x.cols()) = mix[i] * real_x.row(i) + (1.0 - mix[i]) * fake_x.row(i);
            }
        }
        const PenaltyResult pen = gradient_penalty(b.D, pen_in, cfg.alpha, b.d_feat);
        out.penalty = pen.value;
        out.degenerate_rows = pen.degenerate_rows;
        out.grad += pen.grad;
    }
    out.objective = out.real_score - out.fake_score - out.penalty;
    return out;
}

struct GeneratorStep {
    double total = 0.0;
    double adversarial = 0.0;
    double cls = 0.0;
    double mi = 0.0;
    double rank = 0.0;
    MlpParams grad_G;
    Matrix grad_mi_critic;
    std::uint64_t regime = 0;
};

/// G minimizes -E[D(G(a,z), a)] + lambda_cls * L_CLS + lambda_mi * L_MI
/// (+ lambda_rank * L_rank on P(G(a,z)) when rank_on_generated).
/// `labels` index the bundle's seen classes; `a_neg` is only read when
/// rank_on_generated is set.
inline GeneratorStep generator_objective(const GeneratorBundle& b, const Matrix& a, const Matrix& z,
                                         std::span<const std::size_t> labels, const Matrix& a_neg, const TrainConfig& cfg) {
    const ForwardCache gc = mlp_forward(b.G, hconcat(a, z));
    const Matrix& x = gc.output;
    const auto B = static_cast<double>(x.rows());
    const auto d_feat = x.cols();

    GeneratorStep out;
    const ForwardCache dc = mlp_forward(b.D, hconcat(x, a));
    out.adversarial = -dc.output.mean();
    Matrix gx = mlp_backward(b.D, dc, Matrix::Constant(x.rows(), 1, -1.0 / B)).input.leftCols(d_feat);
    out.regime = activation_signature(b.G, gc) ^ (activation_signature(b.D, dc) * 31);

    if (cfg.lambda_cls > 0.0) {
        const auto c = cls_loss(b.pretrained_cls, x, labels);
        out.cls = c.value;
        gx += cfg.lambda_cls * c.grad;
    }
    out.grad_mi_critic = Matrix::Zero(b.mi_critic.rows(), b.mi_critic.cols());
    if (cfg.lambda_mi > 0.0) {
        const auto m = mi_loss(b.mi_critic, x, a);
        out.mi = m.value;
        gx += cfg.lambda_mi * m.grad_x;
        out.grad_mi_critic = cfg.lambda_mi * m.grad_critic;
    }
    if (cfg.rank_on_generated && cfg.lambda_rank > 0.0) {
        const ForwardCache pc = mlp_forward(b.P, x);
        Matrix ga;
        out.rank = rank_hinge(a, pc.output, a_neg, cfg.delta, &ga);
        gx += cfg.lambda_rank * mlp_backward(b.P, pc, ga).input;
        out.regime ^= activation_signature(b.P, pc) * 131;
    }
    out.total = out.adversarial + cfg.lambda_cls * out.cls + cfg.lambda_mi * out.mi + cfg.lambda_rank * out.rank;
    out.grad_G = mlp_backward(b.G, gc, gx).params;
    return out;
}

struct ProjectionStep {
    double total = 0.0;
    double adversarial = 0.0;
    double rank = 0.0;
    MlpParams grad_P;
    std::uint64_t regime = 0;
};

/// P minimizes E[D(x, P(x))] (projected conditioning only) plus
/// lambda_rank * L_rank(a, P(x), a_neg) on real seen features.
inline ProjectionStep projection_objective(const GeneratorBundle& b, const Matrix& x, const Matrix& a, const Matrix& a_neg,
                                           const TrainConfig& cfg) {
    const ForwardCache pc = mlp_forward(b.P, x);
    const Matrix& a_hat = pc.output;
    const auto B = static_cast<double>(x.rows());
    ProjectionStep out;
    Matrix ga = Matrix::Zero(a_hat.rows(), a_hat.cols());
    out.regime = activation_signature(b.P, pc);
    if (cfg.real_condition == RealConditioning::projected) {
        const ForwardCache dc = mlp_forward(b.D, hconcat(x, a_hat));
        out.adversarial = dc.output.mean();
        ga += mlp_backward(b.D, dc, Matrix::Constant(x.rows(), 1, 1.0 / B)).input.rightCols(a_hat.cols());
        out.regime ^= activation_signature(b.D, dc) * 31;
    }
    if (cfg.lambda_rank > 0.0) {
        Matrix gr;
        out.rank = rank_hinge(a, a_hat, a_neg, cfg.delta, &gr);
        ga += cfg.lambda_rank * gr;
    }
    out.total = out.adversarial + cfg.lambda_rank * out.rank;
    out.grad_P = mlp_backward(b.P, pc, ga).params;
    return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TraceRow {
    std::size_t epoch = 0;
    double loss_d = 0.0; // critic objective L_D
    double loss_g = 0.0;
    double loss_p = 0.0;
    double loss_cls = 0.0;
    double loss_mi = 0.0;
    double loss_rank = 0.0;
    double lr = 0.0;
};

struct SdrResult {
    GeneratorBundle bundle;
    VaeModel vae; // trained only for data-driven noise
    std::vector<TraceRow> trace;
    std::size_t degenerate_rows = 0;
};

using EpochCallback = std::function<void(std::size_t epoch, const GeneratorBundle&, const VaeModel&)>;

namespace detail {

/// Cycles through shuffled row indices, reshuffling at each wrap.
class BatchCycler {
public:
    BatchCycler(std::size_t n, Rng& rng) : order_(n), rng_(&rng) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        shuffle(order_, *rng_);
    }

    std::vector<std::size_t> next(std::size_t b) {
        std::vector<std::size_t> out;
        out.reserve(b);
        while (out.size() < b) {
            if (pos_ == order_.size()) {
                shuffle(order_, *rng_);
                pos_ = 0;
            }
            out.push_back(order_[pos_++]);
        }
        return out;
    }

private:
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
    Rng* rng_;
};

/// Halves the learning rate when the 10-epoch moving average of the
/// generator loss stops improving by at least 1e-4; then waits 10 epochs.
class PlateauHalver {
public:
    bool update(double epoch_loss) {
        history_.push_back(epoch_loss);
        if (cooldown_ > 0) {
            --cooldown_;
            return false;
        }
        if (history_.size() < window) return false;
        double ma = 0.0;
        for (std::size_t i = history_.size() - window; i < history_.size(); ++i) ma += history_[i];
        ma /= static_cast<double>(window);
        if (!has_best_) {
            best_ = ma;
            has_best_ = true;
            return false;
        }
        if (ma < best_ - 1e-4) {
            best_ = ma;
            return false;
        }
        has_best_ = false;
        cooldown_ = window;
        return true;
    }

    static constexpr std::size_t window = 10;

private:
    std::vector<double> history_;
    double best_ = 0.0;
    bool has_best_ = false;
    std::size_t cooldown_ = 0;
};

} // namespace detail

/// Alternating optimization: n_critic critic steps per joint G/P step.
inline SdrResult train_sdr(const FeatureSet& seen, const EmbeddingTable& embeddings, const TrainConfig& cfg,
                           const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (seen.empty()) fail(ErrorCode::empty_input, "train_sdr: no seen features");
    seen.validate();
    std::vector<std::string> classes = seen.classes();
    std::sort(classes.begin(), classes.end());
    if (classes.size() < 2) fail(ErrorCode::config_error, "train_sdr: needs at least two seen classes");
    if (cfg.m_rank + 1 > classes.size()) fail(ErrorCode::config_error, "train_sdr: m_rank exceeds seen classes - 1");
    for (const auto& c : classes) {
        if (!embeddings.contains(c)) fail(ErrorCode::config_error, "train_sdr: seen class '" + c + "' has no embedding");
    }
    const std::size_t d_feat = seen.dim();
    const std::size_t d_emb = embeddings.dim();

    SdrResult result;
    Rng init_rng = make_rng(derive_seed(cfg.seed, "init"));
    result.bundle = GeneratorBundle::create(d_feat, d_emb, cfg, init_rng);
    GeneratorBundle& b = result.bundle;
    b.seen_classes = classes;

    ClassifierConfig cls_cfg = cfg.cls;
    cls_cfg.seed = derive_seed(cfg.seed, "cls");
    b.pretrained_cls = train_classifier(seen, classes, cls_cfg);

    if (cfg.noise_source == NoiseSource::data_driven) {
        VaeConfig vcfg = cfg.vae;
        vcfg.d_z = cfg.d_z;
        vcfg.seed = derive_seed(cfg.seed, "vae");
        result.vae = train_vae(seen, vcfg);
    }
    const NoiseSampler sampler(cfg, embeddings, seen, &result.vae);

    const std::vector<std::size_t> labels = label_indices(seen.labels, classes);
    const EmbeddingTable seen_table = embeddings.subset(classes);
    std::vector<std::vector<std::size_t>> negatives(classes.size());
    for (std::size_t k = 0; k < classes.size(); ++k) {
        for (const auto& n : corpus::nearest_classes(seen_table, classes[k], cfg.m_rank)) negatives[k].push_back(seen_table.index_of(n));
    }
    const Matrix& A = seen_table.values();

    Rng rng = make_rng(derive_seed(cfg.seed, "train"));
    detail::BatchCycler cycler(seen.size(), rng);
    AdamState adam_g = make_adam(cfg.lr, cfg.weight_decay);
    AdamState adam_d = make_adam(cfg.lr, cfg.weight_decay);
    AdamState adam_p = make_adam(cfg.lr, cfg.weight_decay);
    AdamState adam_m = make_adam(cfg.lr, cfg.weight_decay);
    for (AdamState* s : {&adam_g, &adam_d, &adam_p, &adam_m}) s->beta1 = cfg.beta1;
    detail::PlateauHalver scheduler;

    const std::size_t bs = std::min(cfg.batch_size, seen.size());
    const std::size_t iters = (seen.size() + bs - 1) / bs;

    struct Batch {
        Matrix x, a, a_neg;
        std::vector<std::size_t> y;
        std::vector<std::string> names;
    };
    auto draw = [&](bool with_x) {
        Batch bt;
        const auto idx = cycler.next(bs);
        if (with_x) bt.x = gather_rows(seen.features, idx);
        bt.a.resize(static_cast<Eigen::Index>(bs), static_cast<Eigen::Index>(d_emb));
        bt.a_neg.resize(static_cast<Eigen::Index>(bs), static_cast<Eigen::Index>(d_emb));
        for (std::size_t i = 0; i < bs; ++i) {
            const std::size_t y = labels[idx[i]];
            bt.y.push_back(y);
            bt.names.push_back(classes[y]);
            bt.a.row(static_cast<Eigen::Index>(i)) = A.row(static_cast<Eigen::Index>(y));
            const auto& neg = negatives[y];
            bt.a_neg.row(static_cast<Eigen::Index>(i)) = A.row(static_cast<Eigen::Index>(neg[uniform_index(rng, neg.size())]));
        }
        return bt;
    };

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        TraceRow row;
        row.epoch = epoch;
        row.lr = adam_g.lr;
        for (std::size_t it = 0; it < iters; ++it) {
            for (std::size_t c = 0; c < cfg.n_critic; ++c) {
                const Batch bt = draw(true);
                const Matrix z = sampler.sample(bt.names, rng);
                const Matrix fake = b.generate(bt.a, z);
                Vector mix;
                if (cfg.penalty_at == PenaltyPoint::interpolates) {
                    mix.resize(static_cast<Eigen::Index>(bs));
                    for (Eigen::Index i = 0; i < mix.size(); ++i) mix[i] = uniform(rng, 0.0, 1.0);
                }
                const CriticResult cr = critic_objective(b, bt.x, bt.a, fake, bt.a, cfg, mix);
                adam_update(adam_d, b.D, cr.grad);
                result.degenerate_rows += cr.degenerate_rows;
                if (c + 1 == cfg.n_critic) row.loss_d += cr.objective;
            }

            const Batch gb = draw(false);
            const Matrix z = sampler.sample(gb.names, rng);
            GeneratorStep gs = generator_objective(b, gb.a, z, gb.y, gb.a_neg, cfg);
            adam_update(adam_g, b.G, gs.grad_G);
            if (cfg.lambda_mi > 0.0) adam_update(adam_m, b.mi_critic, gs.grad_mi_critic);

            const Batch pb = draw(true);
            const ProjectionStep ps = projection_objective(b, pb.x, pb.a, pb.a_neg, cfg);
            adam_update(adam_p, b.P, ps.grad_P);

            row.loss_g += gs.total;
            row.loss_cls += gs.cls;
            row.loss_mi += gs.mi;
            row.loss_p += ps.total;
            row.loss_rank += ps.rank;
        }
        const double n = static_cast<double>(iters);
        row.loss_d /= n;
        row.loss_g /= n;
        row.loss_p /= n;
        row.loss_cls /= n;
        row.loss_mi /= n;
        row.loss_rank /= n;
        if (!std::isfinite(row.loss_d) || !std::isfinite(row.loss_g)) {
            fail(ErrorCode::config_error, "train_sdr: losses diverged at epoch " + std::to_string(epoch));
        }
        result.trace.push_back(row);

        if (cfg.lr_schedule && scheduler.update(row.loss_g)) {
            for (AdamState* s : {&adam_g, &adam_d, &adam_p, &adam_m}) s->lr *= 0.5;
        }
        b.trained = true;
        if (on_epoch) on_epoch(epoch, b, result.vae);
    }
    b.trained = true;
    return result;
}

/// n_per_class generated rows for each requested class.
inline FeatureSet synthesize(const GeneratorBundle& b, const std::vector<std::string>& classes, std::size_t n_per_class,
                             const EmbeddingTable& embeddings, const FeatureSet& seen, const VaeModel& vae, Rng& rng) {
    if (!b.trained) fail(ErrorCode::config_error, "synthesize: bundle is untrained");
    FeatureSet out;
    out.provenance = Provenance::synthetic;
    out.features = Matrix(0, static_cast<Eigen::Index>(b.d_feat));
    for (const auto& c : classes) {
        if (!embeddings.contains(c)) fail(ErrorCode::unknown_class, "synthesize: unknown class '" + c + "'");
    }
    if (n_per_class == 0 || classes.empty()) return out;
    const NoiseSampler sampler(b.config, embeddings, seen, &vae);
    std::vector<std::string> names;
    names.reserve(classes.size() * n_per_class);
    Matrix a(static_cast<Eigen::Index>(classes.size() * n_per_class), static_cast<Eigen::Index>(b.d_emb));
    Eigen::Index r = 0;
    for (const auto& c : classes) {
        const Vector e = embeddings.row(c);
        for (std::size_t i = 0; i < n_per_class; ++i, ++r) {
            a.row(r) = e.transpose();
            names.push_back(c);
        }
    }
    const Matrix z = sampler.sample(names, rng);
    out.features = b.generate(a, z);
    out.labels = std::move(names);
    return out;
}

// ---------------------------------------------------------------------------
// VAE-only generator baseline: conditional VAE, decoder sampled with
// z ~ N(0, I).
// ---------------------------------------------------------------------------

inline VaeModel train_conditional_vae(const FeatureSet& seen, const EmbeddingTable& embeddings, const TrainConfig& cfg) {
    if (seen.empty()) fail(ErrorCode::empty_input, "train_conditional_vae: no seen features");
    Matrix cond(static_cast<Eigen::Index>(seen.size()), static_cast<Eigen::Index>(embeddings.dim()));
    for (std::size_t i = 0; i < seen.size(); ++i) cond.row(static_cast<Eigen::Index>(i)) = embeddings.row(seen.labels[i]).transpose();
    VaeConfig vcfg = cfg.vae;
    vcfg.d_z = cfg.d_z;
    vcfg.hidden = cfg.hidden();
    vcfg.seed = derive_seed(cfg.seed, "cvae");
    return train_vae_on(seen.features, cond, vcfg);
}

inline FeatureSet synthesize_conditional_vae(const VaeModel& cvae, const std::vector<std::string>& classes, std::size_t n_per_class,
                                             const EmbeddingTable& embeddings, Rng& rng) {
    FeatureSet out;
    out.provenance = Provenance::synthetic;
    out.features = Matrix(0, static_cast<Eigen::Index>(cvae.d_feat()));
    if (n_per_class == 0 || classes.empty()) return out;
    const auto n = static_cast<Eigen::Index>(classes.size() * n_per_class);
    Matrix a(n, static_cast<Eigen::Index>(embeddings.dim()));
    Eigen::Index r = 0;
    for (const auto& c : classes) {
        const Vector e = embeddings.row(c);
        for (std::size_t i = 0; i < n_per_class; ++i, ++r) {
            a.row(r) = e.transpose();
            out.labels.push_back(c);
        }
    }
    const Matrix z = standard_normal_matrix(n, static_cast<Eigen::Index>(cvae.d_z), rng);
    out.features = mlp_predict(cvae.decoder, hconcat(z, a));
    return out;
}

} // namespace zslforge
