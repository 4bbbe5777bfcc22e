// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "support/gradient_suite.hpp"
#include "zslforge/experiment.hpp"
#include "zslforge/generative/losses.hpp"
#include "zslforge/generative/sdr.hpp"
#include "zslforge/generative/vae.hpp"

using namespace zslforge;
using Catch::Approx;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::io_error;
}

/// A small synthetic run: 20 classes, 10 seen / 10 unseen.
PreparedRun small_run(std::uint64_t seed, std::size_t n_train = 60) {
    io::ExperimentConfig cfg;
    cfg.seed = seed;
    cfg.data.n_train = n_train;
    cfg.data.n_test = 40;
    return prepare_run(cfg, 0);
}

TrainConfig fast_config(std::uint64_t seed, std::size_t epochs = 3) {
    TrainConfig t;
    t.seed = seed;
    t.epochs = epochs;
    t.vae.epochs = 5;
    t.cls.epochs = 5;
    return t;
}

MlpParams linear_layer(const Matrix& w, const Vector& b) {
    MlpParams p;
    p.weights = {w};
    p.biases = {b};
    p.hidden = Activation::leaky_relu;
    p.output = Activation::linear;
    return p;
}

double mean_row_distance(const Matrix& x, const Matrix& cloud) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < cloud.rows(); ++k) best = std::min(best, (x.row(i) - cloud.row(k)).norm());
        total += best;
    }
    return total / static_cast<double>(x.rows());
}

} // namespace

// ---------------------------------------------------------------------------
// VAE
// ---------------------------------------------------------------------------

TEST_CASE("VAE KL vanishes for a zero-output encoder", "[vae]") {
    Rng rng = make_rng(1);
    VaeConfig cfg;
    cfg.d_z = 4;
    cfg.hidden = 16;
    VaeModel m = VaeModel::create(6, 0, cfg, rng);
    for (auto& w : m.encoder.weights) w.setZero();
    for (auto& b : m.encoder.biases) b.setZero();
    const Matrix x = testing::random_matrix(5, 6, rng, 1.0);
    const Matrix eps = standard_normal_matrix(5, 4, rng);
    const VaeEvaluation ev = vae_evaluate(m, x, eps, 1.0);
    CHECK(ev.losses.kl == Approx(0.0).margin(1e-12));
}

TEST_CASE("VAE KL equals 2 d_z for mu = 2 and unit variance", "[vae]") {
    Rng rng = make_rng(2);
    VaeConfig cfg;
    cfg.d_z = 3;
    cfg.hidden = 0;
    VaeModel m = VaeModel::create(4, 0, cfg, rng);
    REQUIRE(m.encoder.weights.size() == 1);
    m.encoder.weights[0].setZero();
    // Encoder output is [mu, logvar]; fix mu = 2, logvar = 0.
    m.encoder.biases[0].setZero();
    m.encoder.biases[0].head(3).setConstant(2.0);
    const Matrix x = testing::random_matrix(7, 4, rng, 1.0);
    const VaeEvaluation ev = vae_evaluate(m, x, standard_normal_matrix(7, 3, rng), 1.0);
    CHECK(ev.losses.kl == Approx(2.0 * 3).epsilon(1e-12));
}

TEST_CASE("VAE overfits two points", "[vae]") {
    Matrix x(2, 3);
    x << 1.0, 0.0, 2.0, -1.0, 0.5, 0.0;
    VaeConfig cfg;
    cfg.d_z = 2;
    cfg.hidden = 32;
    cfg.epochs = 3000;
    cfg.batch_size = 2;
    cfg.lr = 3e-3;
    cfg.beta = 1e-4;
    cfg.seed = 3;
    const VaeModel m = train_vae_on(x, Matrix{}, cfg);
    Rng rng = make_rng(4);
    double rec = 0.0;
    for (int t = 0; t < 20; ++t) rec += vae_losses(m, x, rng).reconstruction;
    CHECK(rec / 20.0 < 1e-3);
}

TEST_CASE("VAE training halves the reconstruction loss and is deterministic", "[vae]") {
    const PreparedRun p = small_run(5);
    VaeConfig cfg;
    cfg.seed = 11;
    cfg.epochs = 0;
    const VaeModel initial = train_vae(p.seen_train, cfg);
    cfg.epochs = 30;
    const VaeModel trained = train_vae(p.seen_train, cfg);
    const VaeModel again = train_vae(p.seen_train, cfg);
    Rng r1 = make_rng(9), r2 = make_rng(9);
    const double before = vae_losses(initial, p.seen_train.features, r1).reconstruction;
    const double after = vae_losses(trained, p.seen_train.features, r2).reconstruction;
    CHECK(after < 0.5 * before);
    REQUIRE(trained.loss_trace.size() == again.loss_trace.size());
    for (std::size_t i = 0; i < trained.loss_trace.size(); ++i) CHECK(trained.loss_trace[i] == again.loss_trace[i]);
    for (std::size_t l = 0; l < trained.decoder.weights.size(); ++l) CHECK(trained.decoder.weights[l] == again.decoder.weights[l]);
}

TEST_CASE("Linear VAE with a wide latent reconstructs well", "[vae]") {
    const PreparedRun p = small_run(6);
    const auto d = p.seen_train.dim();
    VaeConfig cfg;
    cfg.hidden = 0;
    cfg.d_z = d;
    cfg.epochs = 200;
    cfg.lr = 3e-3;
    cfg.beta = 1e-3;
    cfg.seed = 6;
    const VaeModel m = train_vae(p.seen_train, cfg);
    Rng rng = make_rng(1);
    const double rec = vae_losses(m, p.seen_train.features, rng).reconstruction;
    const Vector mean = p.seen_train.features.colwise().mean();
    const double total_var = (p.seen_train.features.rowwise() - mean.transpose()).squaredNorm() / static_cast<double>(p.seen_train.size());
    CHECK(rec < 0.25 * total_var);
}

TEST_CASE("VAE rejects empty input", "[vae]") {
    CHECK(code_of([] { train_vae(FeatureSet{}, VaeConfig{}); }) == ErrorCode::empty_input);
}

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

TEST_CASE("Noise sampling is deterministic and validates its inputs", "[noise]") {
    const PreparedRun p = small_run(7);
    TrainConfig t = fast_config(7);
    VaeConfig vc = t.vae;
    vc.d_z = t.d_z;
    const VaeModel vae = train_vae(p.seen_train, vc);
    const std::string target = p.split.unseen.front();
    Rng a = make_rng(42), b = make_rng(42);
    CHECK(sample_noise(target, p.embeddings, p.seen_train, &vae, t, a) == sample_noise(target, p.embeddings, p.seen_train, &vae, t, b));

    const NoiseSampler sampler(t, p.embeddings, p.seen_train, &vae);
    CHECK(sampler.sources(target).size() == t.m_noise);
    CHECK(sampler.sources(p.split.seen.front()) == std::vector<std::string>{p.split.seen.front()});

    Rng rng = make_rng(1);
    CHECK(code_of([&] { sampler.sample("no-such-class", rng); }) == ErrorCode::unknown_class);
    CHECK(code_of([&] { NoiseSampler(t, p.embeddings, p.seen_train, nullptr); }) == ErrorCode::untrained_vae);
    VaeModel untrained = vae;
    untrained.trained = false;
    CHECK(code_of([&] { NoiseSampler(t, p.embeddings, p.seen_train, &untrained); }) == ErrorCode::untrained_vae);
}

TEST_CASE("Zero encoder variance makes the noise the encoder mean", "[noise]") {
    const PreparedRun p = small_run(8);
    TrainConfig t = fast_config(8);
    VaeConfig vc = t.vae;
    vc.d_z = t.d_z;
    VaeModel vae = train_vae(p.seen_train, vc);
    // Push every log-variance output to the floor: sigma underflows to ~0.
    vae.encoder.weights.back().bottomRows(static_cast<Eigen::Index>(vae.d_z)).setZero();
    vae.encoder.biases.back().tail(static_cast<Eigen::Index>(vae.d_z)).setConstant(-40.0);
    const std::string cls = p.split.seen.front();
    const auto rows = p.seen_train.rows_of(cls);
    const Matrix mu = vae_encode(vae, p.seen_train.features).mu;
    const NoiseSampler sampler(t, p.embeddings, p.seen_train, &vae);
    Rng rng = make_rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector z = sampler.sample(cls, rng);
        double best = std::numeric_limits<double>::infinity();
        for (auto r : rows) best = std::min(best, (mu.row(static_cast<Eigen::Index>(r)).transpose() - z).norm());
        CHECK(best < 1e-6);
    }
}

TEST_CASE("Data-driven noise lands closer to the neighbour latent cloud than Gaussian noise", "[noise]") {
    const PreparedRun p = small_run(9);
    TrainConfig t = fast_config(9);
    VaeConfig vc = t.vae;
    vc.d_z = t.d_z;
    vc.epochs = 30;
    const VaeModel vae = train_vae(p.seen_train, vc);
    const std::string target = p.split.unseen.front();
    const NoiseSampler data(t, p.embeddings, p.seen_train, &vae);
    TrainConfig g = t;
    g.noise_source = NoiseSource::gaussian;
    const NoiseSampler gauss(g, p.embeddings, p.seen_train, nullptr);

    std::vector<std::size_t> cloud_rows;
    for (const auto& c : data.sources(target)) {
        const auto r = p.seen_train.rows_of(c);
        cloud_rows.insert(cloud_rows.end(), r.begin(), r.end());
    }
    const Matrix cloud = gather_rows(vae_encode(vae, p.seen_train.features).mu, cloud_rows);
    const std::vector<std::string> names(1000, target);
    Rng r1 = make_rng(1), r2 = make_rng(2);
    const double d_data = mean_row_distance(data.sample(names, r1), cloud);
    const double d_gauss = mean_row_distance(gauss.sample(names, r2), cloud);
    CHECK(d_data < d_gauss);
}

// ---------------------------------------------------------------------------
// Critic objective
// ---------------------------------------------------------------------------

namespace {

GeneratorBundle linear_critic_bundle(const Matrix& w, double bias, std::size_t d_feat, std::size_t d_emb) {
    GeneratorBundle b;
    b.d_feat = d_feat;
    b.d_emb = d_emb;
    b.D = linear_layer(w, Vector::Constant(1, bias));
    return b;
}

} // namespace

TEST_CASE("Constant critic: objective equals minus alpha", "[critic]") {
    TrainConfig cfg;
    cfg.real_condition = RealConditioning::ground_truth;
    cfg.alpha = 10.0;
    const GeneratorBundle b = linear_critic_bundle(Matrix::Zero(1, 5), 0.7, 3, 2);
    Rng rng = make_rng(1);
    const Matrix rx = testing::random_matrix(4, 3, rng, 1.0), ra = testing::random_matrix(4, 2, rng, 1.0);
    const Matrix fx = testing::random_matrix(6, 3, rng, 1.0), fa = testing::random_matrix(6, 2, rng, 1.0);
    const CriticResult r = critic_objective(b, rx, ra, fx, fa, cfg);
    CHECK(r.objective == Approx(-10.0).epsilon(1e-12));
}

TEST_CASE("Critic without penalty is the plain score difference", "[critic]") {
    TrainConfig cfg;
    cfg.real_condition = RealConditioning::ground_truth;
    cfg.alpha = 0.0;
    Rng rng = make_rng(2);
    GeneratorBundle b;
    b.d_feat = 3;
    b.d_emb = 2;
    b.D = MlpParams::create({5, 8, 1}, Activation::leaky_relu, Activation::linear, rng);
    const Matrix rx = testing::random_matrix(4, 3, rng, 1.0), ra = testing::random_matrix(4, 2, rng, 1.0);
    const Matrix fx = testing::random_matrix(4, 3, rng, 1.0), fa = testing::random_matrix(4, 2, rng, 1.0);
    const CriticResult r = critic_objective(b, rx, ra, fx, fa, cfg);
    const double expected = mlp_predict(b.D, hconcat(rx, ra)).mean() - mlp_predict(b.D, hconcat(fx, fa)).mean();
    CHECK(r.objective == Approx(expected).epsilon(1e-12));
    CHECK(r.penalty == 0.0);
}

TEST_CASE("Linear critic two-sample hand case", "[critic]") {
    // D([x, a]) = 2 x1 + 0 x2 + 1 a + 0.5, so ||grad_x D|| = 2 and each
    // penalized row contributes (2 - 1)^2 = 1.
    Matrix w(1, 3);
    w << 2.0, 0.0, 1.0;
    const GeneratorBundle b = linear_critic_bundle(w, 0.5, 2, 1);
    TrainConfig cfg;
    cfg.real_condition = RealConditioning::ground_truth;
    cfg.alpha = 3.0;
    Matrix rx(2, 2), ra(2, 1), fx(2, 2), fa(2, 1);
    rx << 1.0, 5.0, 0.0, -1.0;
    ra << 1.0, 0.0;
    fx << -1.0, 2.0, 0.5, 0.0;
    fa << 0.0, 2.0;
    // real scores: 2+1+.5 = 3.5, 0+0+.5 = .5 -> mean 2
    // fake scores: -2+0+.5 = -1.5, 1+2+.5 = 3.5 -> mean 1
    const CriticResult r = critic_objective(b, rx, ra, fx, fa, cfg);
    CHECK(r.real_score == Approx(2.0).epsilon(1e-12));
    CHECK(r.fake_score == Approx(1.0).epsilon(1e-12));
    CHECK(r.penalty == Approx(3.0).epsilon(1e-12));
    CHECK(r.objective == Approx(2.0 - 1.0 - 3.0).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// Ranking loss
// ---------------------------------------------------------------------------

TEST_CASE("Rank loss hand cases", "[rank]") {
    Rng rng = make_rng(1);
    Vector a(2), pred(2);
    a << 1.0, 0.0;
    pred << 1.0, 0.0;
    Matrix neg(1, 2);
    neg << 0.0, 1.0;
    // 0.2 - 1 + 0 < 0
    CHECK(rank_loss(a, pred, neg, 0.2, rng) == 0.0);
    pred << 0.0, 1.0;
    // 0.2 - 0 + 1 = 1.2
    CHECK(rank_loss(a, pred, neg, 0.2, rng) == Approx(1.2).epsilon(1e-12));
}

TEST_CASE("Rank hinge batch mean and rotation invariance", "[rank]") {
    Matrix t(4, 2), p(4, 2), n(4, 2);
    t << 1, 0, 0, 1, 1, 0, 0, 1;
    p << 1, 0, 1, 0, 0.5, 0.5, 0, 0;
    n << 0, 1, 1, 0, 0, 1, 1, 0;
    // rows: max(0,.2-1+0)=0, max(0,.2-0+1)=1.2, max(0,.2-.5+.5)=.2, max(0,.2)=.2
    const double expected = (0.0 + 1.2 + 0.2 + 0.2) / 4.0;
    CHECK(rank_hinge(t, p, n, 0.2) == Approx(expected).epsilon(1e-12));

    Rng rng = make_rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix tt = testing::random_matrix(6, 4, rng, 1.0), pp = testing::random_matrix(6, 4, rng, 1.0),
                     nn = testing::random_matrix(6, 4, rng, 1.0);
        const Eigen::HouseholderQR<Matrix> qr(testing::random_matrix(4, 4, rng, 1.0));
        const Matrix q = qr.householderQ();
        CHECK(rank_hinge(tt * q, pp * q, nn * q, 0.2) == Approx(rank_hinge(tt, pp, nn, 0.2)).epsilon(1e-10));
    }
}

TEST_CASE("Rank loss needs a negative", "[rank]") {
    Rng rng = make_rng(1);
    CHECK(code_of([&] { rank_loss(Vector::Ones(2), Vector::Ones(2), Matrix(0, 2), 0.2, rng); }) == ErrorCode::no_negatives);
}

// ---------------------------------------------------------------------------
// Classification loss
// ---------------------------------------------------------------------------

namespace {

SoftmaxClassifier make_classifier(const Matrix& w, const Vector& b) {
    SoftmaxClassifier c;
    c.weights = w;
    c.biases = b;
    for (Eigen::Index k = 0; k < w.rows(); ++k) c.class_order.push_back("c" + std::to_string(k));
    c.trained = true;
    return c;
}

} // namespace

TEST_CASE("Classification loss oracles", "[cls]") {
    Rng rng = make_rng(1);
    const Matrix x = testing::random_matrix(5, 3, rng, 1.0);
    const std::vector<std::size_t> labels{0, 1, 2, 3, 0};

    SECTION("uniform classifier gives ln K") {
        const auto c = make_classifier(Matrix::Zero(4, 3), Vector::Zero(4));
        CHECK(cls_loss(c, x, labels).value == Approx(std::log(4.0)).epsilon(1e-12));
    }
    SECTION("fully confident correct classifier gives zero") {
        Vector b = Vector::Zero(4);
        b[2] = 1000.0;
        const auto c = make_classifier(Matrix::Zero(4, 3), b);
        const std::vector<std::size_t> all2(5, 2);
        CHECK(cls_loss(c, x, all2).value == 0.0);
    }
    SECTION("two-class hand case") {
        Matrix w(2, 1);
        w << 1.0, -1.0;
        const auto c = make_classifier(w, Vector::Zero(2));
        Matrix one(1, 1);
        one << 0.5;
        // logits (0.5, -0.5): -log softmax_0 = log(1 + e^-1)
        const std::vector<std::size_t> l0{0};
        const auto r = cls_loss(c, one, l0);
        CHECK(r.value == Approx(std::log1p(std::exp(-1.0))).epsilon(1e-12));
        // d/dx = (p - y) . W = (p0 - 1) * 1 + p1 * (-1) = -2 p1
        const double p1 = 1.0 / (1.0 + std::exp(1.0));
        CHECK(r.grad(0, 0) == Approx(-2.0 * p1).epsilon(1e-12));
    }
    SECTION("untrained classifier is rejected") {
        auto c = make_classifier(Matrix::Zero(4, 3), Vector::Zero(4));
        c.trained = false;
        CHECK(code_of([&] { cls_loss(c, x, labels); }) == ErrorCode::untrained_classifier);
    }
}

// ---------------------------------------------------------------------------
// Mutual-information loss
// ---------------------------------------------------------------------------

TEST_CASE("MI loss oracles", "[mi]") {
    Rng rng = make_rng(2);
    SECTION("a single pair carries no contrast") {
        const MiLoss r = mi_loss(testing::random_matrix(3, 2, rng, 1.0), testing::random_matrix(1, 3, rng, 1.0),
                                 testing::random_matrix(1, 2, rng, 1.0));
        CHECK(r.value == Approx(0.0).margin(1e-15));
    }
    SECTION("saturated diagonal drives the loss to zero") {
        const Eigen::Index B = 6;
        const Matrix eye = Matrix::Identity(B, B);
        const Matrix m = 100.0 * eye - 50.0 * Matrix::Ones(B, B);
        CHECK(mi_loss(m, eye, eye).value < 1e-20);
    }
    SECTION("matches an independent logsumexp and stays above -ln B") {
        for (int trial = 0; trial < 10; ++trial) {
            const Eigen::Index B = 8;
            const Matrix m = testing::random_matrix(4, 3, rng, 1.0);
            const Matrix x = testing::random_matrix(B, 4, rng, 1.0);
            const Matrix a = testing::random_matrix(B, 3, rng, 1.0);
            const Matrix s = x * m * a.transpose();
            double expected = 0.0;
            for (Eigen::Index i = 0; i < B; ++i) {
                const double mx = s.row(i).maxCoeff();
                const double lse = mx + std::log((s.row(i).array() - mx).exp().sum());
                expected -= s(i, i) - lse;
            }
            expected /= static_cast<double>(B);
            const double v = mi_loss(m, x, a).value;
            CHECK(v == Approx(expected).epsilon(1e-12));
            CHECK(v >= -std::log(static_cast<double>(B)));
        }
    }
}

// ---------------------------------------------------------------------------
// Gradient checks
// ---------------------------------------------------------------------------

TEST_CASE("Analytic gradients agree with finite differences", "[gradients]") {
    for (const auto& check : testing::gradient_checks(1e-5)) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const GradCheckReport r = check.run(seed);
            INFO(check.name << " seed " << seed << " max rel error " << r.max_rel_error);
            CHECK(r.passed);
            CHECK(r.checked > 0);
        }
    }
}

// ---------------------------------------------------------------------------
// Training and synthesis
// ---------------------------------------------------------------------------

TEST_CASE("train_sdr is deterministic and synthesize respects its contract", "[sdr]") {
    const PreparedRun p = small_run(10);
    const TrainConfig t = fast_config(10);
    const SdrResult a = train_sdr(p.seen_train, p.embeddings, t);
    const SdrResult b = train_sdr(p.seen_train, p.embeddings, t);
    REQUIRE(a.trace.size() == t.epochs);
    for (std::size_t e = 0; e < a.trace.size(); ++e) {
        CHECK(a.trace[e].loss_d == b.trace[e].loss_d);
        CHECK(a.trace[e].loss_g == b.trace[e].loss_g);
        CHECK(a.trace[e].loss_p == b.trace[e].loss_p);
    }

    Rng r0 = make_rng(1);
    const FeatureSet empty = synthesize(a.bundle, p.split.unseen, 0, p.embeddings, p.seen_train, a.vae, r0);
    CHECK(empty.size() == 0);
    CHECK(empty.dim() == p.seen_train.dim());

    Rng r1 = make_rng(5), r2 = make_rng(5);
    const FeatureSet s1 = synthesize(a.bundle, p.split.unseen, 7, p.embeddings, p.seen_train, a.vae, r1);
    const FeatureSet s2 = synthesize(b.bundle, p.split.unseen, 7, p.embeddings, p.seen_train, b.vae, r2);
    CHECK(s1.size() == 7 * p.split.unseen.size());
    CHECK(s1.features == s2.features);
    CHECK(s1.labels == s2.labels);
    CHECK(s1.provenance == Provenance::synthetic);
    CHECK(s1.features.minCoeff() >= 0.0); // relu output layer

    Rng r3 = make_rng(1);
    CHECK(code_of([&] { synthesize(a.bundle, {"nope"}, 2, p.embeddings, p.seen_train, a.vae, r3); }) == ErrorCode::unknown_class);
    GeneratorBundle untrained = a.bundle;
    untrained.trained = false;
    CHECK(code_of([&] { synthesize(untrained, p.split.unseen, 2, p.embeddings, p.seen_train, a.vae, r3); }) ==
          ErrorCode::config_error);
}

TEST_CASE("With every regularizer off, training reduces to the plain score game", "[sdr]") {
    const PreparedRun p = small_run(11);
    TrainConfig t = fast_config(11, 2);
    t.lambda_cls = t.lambda_rank = t.lambda_mi = 0.0;
    t.alpha = 0.0;
    const SdrResult r = train_sdr(p.seen_train, p.embeddings, t);
    for (const auto& row : r.trace) {
        CHECK(row.loss_cls == 0.0);
        CHECK(row.loss_mi == 0.0);
        CHECK(row.loss_rank == 0.0);
        CHECK(std::isfinite(row.loss_d));
    }
    CHECK(r.bundle.trained);

    const SdrResult vanilla = train_sdr(p.seen_train, p.embeddings, as_vanilla_gan(fast_config(11, 2)));
    for (const auto& row : vanilla.trace) CHECK(row.loss_rank == 0.0);
}

TEST_CASE("train_sdr validates its inputs", "[sdr]") {
    const PreparedRun p = small_run(12);
    const TrainConfig t = fast_config(12, 1);
    CHECK(code_of([&] { train_sdr(FeatureSet{}, p.embeddings, t); }) == ErrorCode::empty_input);
    const FeatureSet one = p.seen_train.rows(p.seen_train.rows_of(p.split.seen.front()));
    CHECK(code_of([&] { train_sdr(one, p.embeddings, t); }) == ErrorCode::config_error);
}

TEST_CASE("Generated unseen class means are closer to the truth than the seen-mean baseline", "[sdr][slow]") {
    // Median over seeds of the fraction of unseen classes whose generated
    // mean is closer to the true mean than the mean of all seen features.
    std::vector<double> fractions;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const PreparedRun p = small_run(100 + seed, 100);
        TrainConfig t;
        t.seed = derive_seed(100 + seed, "train");
        const SdrResult r = train_sdr(p.seen_train, p.embeddings, t);
        Rng rng = make_rng(seed);
        const FeatureSet syn = synthesize(r.bundle, p.split.unseen, 200, p.embeddings, p.seen_train, r.vae, rng);
        const Vector baseline = p.seen_train.features.colwise().mean();
        std::size_t closer = 0;
        for (const auto& c : p.split.unseen) {
            const Vector gen = gather_rows(syn.features, syn.rows_of(c)).colwise().mean();
            const Vector truth = p.world->class_mean(c);
            if ((gen - truth).norm() < (baseline - truth).norm()) ++closer;
        }
        fractions.push_back(static_cast<double>(closer) / static_cast<double>(p.split.unseen.size()));
    }
    INFO("median fraction " << median_of(fractions));
    CHECK(median_of(fractions) >= 0.8);
}
