// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "catch_amalgamated.hpp"

#include "support/gradient_suite.hpp"
#include "zslforge/nn/adam.hpp"
#include "zslforge/nn/gradcheck.hpp"
#include "zslforge/nn/mlp.hpp"
#include "zslforge/nn/penalty.hpp"
#include "zslforge/nn/softmax.hpp"

using namespace zslforge;
using zslforge::testing::random_matrix;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

/// Straight-line re-implementation of a forward pass, element by element.
Matrix naive_forward(const MlpParams& p, const Matrix& x) {
    Matrix h = x;
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
        const Matrix& W = p.weights[l];
        Matrix out(h.rows(), W.rows());
        for (Eigen::Index i = 0; i < h.rows(); ++i) {
            for (Eigen::Index o = 0; o < W.rows(); ++o) {
                double s = p.biases[l][o];
                for (Eigen::Index k = 0; k < W.cols(); ++k) s += W(o, k) * h(i, k);
                const Activation a = p.activation_of(l);
                if (a == Activation::relu) s = s > 0 ? s : 0.0;
                if (a == Activation::leaky_relu) s = s > 0 ? s : 0.2 * s;
                out(i, o) = s;
            }
        }
        h = out;
    }
    return h;
}

MlpParams linear_layer(const Matrix& W, const Vector& b) {
    MlpParams p;
    p.hidden = Activation::leaky_relu;
    p.output = Activation::linear;
    p.weights = {W};
    p.biases = {b};
    return p;
}

struct Quadratic {
    Matrix theta;
};
std::vector<std::span<double>> tensors(Quadratic& q) { return zslforge::tensors(q.theta); }
std::vector<std::span<const double>> tensors(const Quadratic& q) { return zslforge::tensors(q.theta); }

} // namespace

TEST_CASE("forward with zero weights returns the final bias", "[nn][forward]") {
    Rng rng = make_rng(1);
    MlpParams p = MlpParams::create({4, 6, 3}, Activation::leaky_relu, Activation::linear, rng);
    for (auto& w : p.weights) w.setZero();
    p.biases[0].setZero();
    p.biases[1] << 0.5, -1.0, 2.0;
    const Matrix y = mlp_predict(p, random_matrix(7, 4, rng));
    for (Eigen::Index i = 0; i < y.rows(); ++i) CHECK((y.row(i).transpose() - p.biases[1]).norm() == 0.0);
}

TEST_CASE("identity layer reproduces its input", "[nn][forward]") {
    Rng rng = make_rng(2);
    const auto p = linear_layer(Matrix::Identity(5, 5), Vector::Zero(5));
    const Matrix x = random_matrix(4, 5, rng);
    CHECK((mlp_predict(p, x) - x).norm() == 0.0);
}

TEST_CASE("forward matches a straight-line implementation", "[nn][forward][oracle]") {
    Rng rng = make_rng(3);
    for (auto out : {Activation::linear, Activation::relu}) {
        for (auto hidden : {Activation::leaky_relu, Activation::relu}) {
            const MlpParams p = MlpParams::create({6, 9, 7, 3}, hidden, out, rng);
            const Matrix x = random_matrix(11, 6, rng);
            CHECK((mlp_predict(p, x) - naive_forward(p, x)).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("forward rejects a column mismatch", "[nn][forward]") {
    Rng rng = make_rng(4);
    const MlpParams p = MlpParams::create({3, 2}, Activation::leaky_relu, Activation::linear, rng);
    CHECK_THROWS_AS(mlp_forward(p, Matrix::Zero(2, 4)), Error);
}

TEST_CASE("initialization is bounded by fan-in", "[nn][init]") {
    Rng rng = make_rng(5);
    const MlpParams p = MlpParams::create({16, 8, 4}, Activation::leaky_relu, Activation::linear, rng);
    CHECK(p.weights[0].cwiseAbs().maxCoeff() <= 0.25);
    CHECK(p.weights[1].cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
    Rng again = make_rng(5);
    const MlpParams q = MlpParams::create({16, 8, 4}, Activation::leaky_relu, Activation::linear, again);
    CHECK((p.weights[0] - q.weights[0]).norm() == 0.0);
}

TEST_CASE("backward with zero upstream is zero", "[nn][backward]") {
    Rng rng = make_rng(6);
    const MlpParams p = MlpParams::create({4, 5, 3}, Activation::leaky_relu, Activation::linear, rng);
    const Matrix x = random_matrix(3, 4, rng);
    const auto g = mlp_backward(p, mlp_forward(p, x), Matrix::Zero(3, 3));
    for (const auto& t : tensors(g.params)) {
        for (double v : t) CHECK(v == 0.0);
    }
    CHECK(g.input.norm() == 0.0);
}

TEST_CASE("backward of one linear layer is upstream^T x", "[nn][backward]") {
    Rng rng = make_rng(7);
    const auto p = linear_layer(random_matrix(3, 4, rng), random_matrix(3, 1, rng).col(0));
    const Matrix x = random_matrix(5, 4, rng);
    const Matrix up = random_matrix(5, 3, rng);
    const auto g = mlp_backward(p, mlp_forward(p, x), up);
    CHECK((g.params.weights[0] - up.transpose() * x).norm() < 1e-12);
    CHECK((g.params.biases[0] - up.colwise().sum().transpose()).norm() < 1e-12);
    CHECK((g.input - up * p.weights[0]).norm() < 1e-12);
}

TEST_CASE("backward matches finite differences on random nets", "[nn][backward][fd]") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng = make_rng(100 + seed);
        const MlpParams p = MlpParams::create({4, 6, 5, 2}, Activation::leaky_relu, Activation::linear, rng);
        const Matrix x = random_matrix(3, 4, rng);
        const Matrix up = random_matrix(3, 2, rng);
        auto loss = [&](const MlpParams& q) {
            const ForwardCache c = mlp_forward(q, x);
            return LossEval<MlpParams>{c.output.cwiseProduct(up).sum(), mlp_backward(q, c, up).params, activation_signature(q, c)};
        };
        const auto r = finite_diff_check(loss, p, 1e-6);
        CHECK(r.passed);
        CHECK(r.checked > 0);
    }
}

TEST_CASE("input gradient of a linear scalar net is its weight row", "[nn][input-gradient]") {
    Matrix w(1, 3);
    w << 1.5, -2.0, 0.25;
    const auto p = linear_layer(w, Vector::Constant(1, 3.0));
    Rng rng = make_rng(8);
    const Matrix g = input_gradient(p, random_matrix(4, 3, rng));
    for (Eigen::Index i = 0; i < 4; ++i) CHECK((g.row(i) - w.row(0)).norm() == 0.0);
}

TEST_CASE("input gradient vanishes in a dead relu region", "[nn][input-gradient]") {
    Rng rng = make_rng(9);
    MlpParams p = MlpParams::create({3, 4, 1}, Activation::relu, Activation::linear, rng);
    p.biases[0].setConstant(-100.0);
    CHECK(input_gradient(p, random_matrix(5, 3, rng)).norm() == 0.0);
}

TEST_CASE("input gradient matches finite differences", "[nn][input-gradient][fd]") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng = make_rng(200 + seed);
        const MlpParams p = MlpParams::create({5, 7, 6, 1}, Activation::leaky_relu, Activation::linear, rng);
        const Matrix x = random_matrix(4, 5, rng);
        auto loss = [&](const Matrix& xp) {
            const ForwardCache c = mlp_forward(p, xp);
            return LossEval<Matrix>{c.output.sum(), input_gradient(p, xp), activation_signature(p, c)};
        };
        CHECK(finite_diff_check(loss, x, 1e-6).passed);
    }
}

TEST_CASE("input gradient needs a scalar output", "[nn][input-gradient]") {
    Rng rng = make_rng(10);
    const MlpParams p = MlpParams::create({3, 2}, Activation::leaky_relu, Activation::linear, rng);
    try {
        input_gradient(p, Matrix::Zero(1, 3));
        FAIL("expected NotScalarOutput");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::not_scalar_output);
    }
}

TEST_CASE("gradient penalty on a linear critic w = [3, 4]", "[nn][penalty][oracle]") {
    Matrix w(1, 2);
    w << 3.0, 4.0;
    const auto D = linear_layer(w, Vector::Constant(1, 0.7));
    Rng rng = make_rng(11);
    const PenaltyResult r = gradient_penalty(D, random_matrix(6, 2, rng), 1.0);
    CHECK_THAT(r.value, WithinAbs(16.0, 1e-9));
    CHECK_THAT(r.grad.weights[0](0, 0), WithinAbs(4.8, 1e-9));
    CHECK_THAT(r.grad.weights[0](0, 1), WithinAbs(6.4, 1e-9));
    CHECK(r.grad.biases[0].norm() == 0.0);
    CHECK(r.degenerate_rows == 0);
}

TEST_CASE("gradient penalty scales with alpha", "[nn][penalty]") {
    Matrix w(1, 2);
    w << 3.0, 4.0;
    const auto D = linear_layer(w, Vector::Zero(1));
    const PenaltyResult r = gradient_penalty(D, Matrix::Ones(2, 2), 10.0);
    CHECK_THAT(r.value, WithinAbs(160.0, 1e-9));
    CHECK_THAT(r.grad.weights[0](0, 1), WithinAbs(64.0, 1e-9));
}

TEST_CASE("gradient penalty with a zero-gradient critic is degenerate", "[nn][penalty]") {
    const auto D = linear_layer(Matrix::Zero(1, 3), Vector::Constant(1, 2.0));
    const PenaltyResult r = gradient_penalty(D, Matrix::Ones(4, 3), 2.0);
    CHECK_THAT(r.value, WithinAbs(2.0, 1e-15));
    CHECK(r.degenerate_rows == 4);
    CHECK(r.grad.weights[0].norm() == 0.0);
}

TEST_CASE("gradient penalty only counts the penalized columns", "[nn][penalty]") {
    Matrix w(1, 3);
    w << 3.0, 4.0, 12.0;
    const auto D = linear_layer(w, Vector::Zero(1));
    const PenaltyResult r = gradient_penalty(D, Matrix::Ones(2, 3), 1.0, 2);
    CHECK_THAT(r.value, WithinAbs(16.0, 1e-12));
    CHECK(r.grad.weights[0](0, 2) == 0.0);
}

TEST_CASE("gradient penalty matches finite differences on random critics", "[nn][penalty][fd]") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng = make_rng(300 + seed);
        const MlpParams D = MlpParams::create({4, 6, 5, 1}, Activation::leaky_relu, Activation::linear, rng);
        const Matrix x = random_matrix(5, 4, rng);
        auto loss = [&](const MlpParams& q) {
            const PenaltyResult r = gradient_penalty(q, x, 10.0);
            return LossEval<MlpParams>{r.value, r.grad, activation_signature(q, mlp_forward(q, x))};
        };
        const auto rep = finite_diff_check(loss, D, 1e-5);
        INFO("seed " << seed << " max rel error " << rep.max_rel_error);
        CHECK(rep.passed);
    }
}

TEST_CASE("gradient penalty needs a scalar critic", "[nn][penalty]") {
    Rng rng = make_rng(12);
    const MlpParams D = MlpParams::create({3, 2}, Activation::leaky_relu, Activation::linear, rng);
    CHECK_THROWS_AS(gradient_penalty(D, Matrix::Zero(1, 3), 1.0), Error);
}

TEST_CASE("adam first step has magnitude lr", "[nn][adam]") {
    Quadratic q{Matrix::Constant(1, 1, 0.3)};
    Quadratic g{Matrix::Constant(1, 1, 1.0)};
    auto [next, state] = adam_step(make_adam(0.01, 0.0), q, g);
    CHECK_THAT(q.theta(0, 0) - next.theta(0, 0), WithinRel(0.01, 1e-6));
    CHECK(state.step == 1);
    auto [next2, state2] = adam_step(state, next, g);
    CHECK(state2.step == 2);
    (void)next2;
}

TEST_CASE("adam weight decay pulls parameters toward zero", "[nn][adam]") {
    Quadratic q{Matrix::Constant(1, 1, 1.0)};
    Quadratic g{Matrix::Zero(1, 1)};
    auto [next, state] = adam_step(make_adam(0.01, 0.0005), q, g);
    CHECK(next.theta(0, 0) < 1.0);
}

TEST_CASE("adam with zero gradient and no decay is the identity", "[nn][adam]") {
    Rng rng = make_rng(13);
    Quadratic q{random_matrix(3, 3, rng)};
    Quadratic g{Matrix::Zero(3, 3)};
    AdamState s = make_adam(0.1, 0.0);
    for (int i = 0; i < 5; ++i) std::tie(q, s) = adam_step(s, q, g);
    Rng again = make_rng(13);
    CHECK((q.theta - random_matrix(3, 3, again)).norm() == 0.0);
}

TEST_CASE("adam is deterministic", "[nn][adam]") {
    Rng rng = make_rng(14);
    Quadratic q{random_matrix(4, 2, rng)};
    Quadratic g{random_matrix(4, 2, rng)};
    auto [a, sa] = adam_step(make_adam(0.01, 5e-4), q, g);
    auto [b, sb] = adam_step(make_adam(0.01, 5e-4), q, g);
    CHECK((a.theta.array() == b.theta.array()).all());
    CHECK(sa.first_moment == sb.first_moment);
}

TEST_CASE("adam rejects mismatched shapes", "[nn][adam]") {
    Quadratic q{Matrix::Zero(2, 2)};
    Quadratic g{Matrix::Zero(3, 2)};
    AdamState s = make_adam(0.01, 0.0);
    CHECK_THROWS_AS(adam_update(s, q, g), Error);
}

TEST_CASE("finite_diff_check on a quadratic", "[nn][gradcheck]") {
    Rng rng = make_rng(15);
    const Quadratic q{random_matrix(3, 4, rng)};
    auto loss = [](const Quadratic& p) { return LossEval<Quadratic>{p.theta.squaredNorm(), Quadratic{2.0 * p.theta}, 0}; };
    // Central differences are exact on a quadratic; what remains is rounding,
    // about eps * |f| / h ~ 1e-10 absolute against a 1e-4 denominator floor.
    const auto r = finite_diff_check(loss, q, 1e-6);
    CHECK(r.passed);
    CHECK(r.max_rel_error <= 1e-6);
    CHECK(r.checked == 12);
}

TEST_CASE("finite_diff_check catches a corrupted gradient", "[nn][gradcheck]") {
    Rng rng = make_rng(16);
    const Quadratic q{random_matrix(3, 4, rng)};
    auto loss = [](const Quadratic& p) { return LossEval<Quadratic>{p.theta.squaredNorm(), Quadratic{2.2 * p.theta}, 0}; };
    const auto r = finite_diff_check(loss, q, 1e-5);
    CHECK_FALSE(r.passed);
    CHECK(r.max_rel_error > 0.05);
}

TEST_CASE("softmax helpers", "[nn][softmax]") {
    const Matrix uniform = Matrix::Constant(3, 5, 0.7);
    const Vector h = softmax_entropy(uniform);
    for (Eigen::Index i = 0; i < 3; ++i) CHECK_THAT(h[i], WithinAbs(std::log(5.0), 1e-12));
    Matrix confident = Matrix::Zero(1, 4);
    confident(0, 2) = 800.0;
    CHECK(softmax_entropy(confident)[0] < 1e-12);
    const std::vector<std::size_t> t = {0, 1, 2};
    CHECK_THAT(softmax_cross_entropy(uniform, t).value, WithinAbs(std::log(5.0), 1e-12));
    Matrix ties(1, 3);
    ties << 1.0, 2.0, 2.0;
    CHECK(argmax_rows(ties)[0] == 1);
}
