#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "fsvi/felbo.hpp"
#include "fsvi/mlp.hpp"
#include "helpers.hpp"

using namespace fsvi;

namespace {

// Scalar fELBO-style loss of a tiny network at one labeled point and one
// OOD point; the finite-difference target for end-to-end gradient checks.
double end_to_end_loss(const MlpParams& params, std::span<const double> x_in, int label,
                       std::span<const double> x_ood, double lambda, AlphaHeadKind head) {
    const std::vector<AlphaVector> alphas_in = {alpha_head(forward_eval(params, x_in), head)};
    const std::vector<AlphaVector> alphas_ood = {alpha_head(forward_eval(params, x_ood), head)};
    const int labels[] = {label};
    return felbo_loss(alphas_in, labels, alphas_ood, lambda).loss;
}

ParamGrads end_to_end_grads(const MlpParams& params, std::span<const double> x_in, int label,
                            std::span<const double> x_ood, double lambda, AlphaHeadKind head) {
    Rng rng(0);
    const auto pass_in = forward(params, x_in, RunMode::eval, 0.0, rng);
    const auto pass_ood = forward(params, x_ood, RunMode::eval, 0.0, rng);
    const std::vector<AlphaVector> alphas_in = {alpha_head(pass_in.logits, head)};
    const std::vector<AlphaVector> alphas_ood = {alpha_head(pass_ood.logits, head)};
    const int labels[] = {label};
    const auto felbo = felbo_loss(alphas_in, labels, alphas_ood, lambda);
    ParamGrads grads = backward(params, pass_in.trace, felbo.grad_in[0], head);
    grads.accumulate(backward(params, pass_ood.trace, felbo.grad_ood[0], head));
    return grads;
}

} // namespace

TEST_SUITE("net") {

TEST_CASE("init is deterministic with zero biases and He-scaled weights") {
    const Architecture arch{2, {64, 64}, 3};
    Rng rng_a(42), rng_b(42);
    const auto params_a = init_params(arch, rng_a);
    const auto params_b = init_params(arch, rng_b);
    CHECK(params_a == params_b);

    for (const auto& b : params_a.biases) {
        for (double v : b) {
            CHECK(v == 0.0);
        }
    }
    // Sample variance of the 64 -> 64 layer should be near 2 / fan_in.
    const auto& w = params_a.weights[1];
    double mean = 0.0, var = 0.0;
    for (double v : w) mean += v;
    mean /= static_cast<double>(w.size());
    for (double v : w) var += (v - mean) * (v - mean);
    var /= static_cast<double>(w.size());
    CHECK(std::abs(var - 2.0 / 64.0) < 0.2 * (2.0 / 64.0));

    CHECK_THROWS_AS(init_params(Architecture{0, {4}, 2}, rng_a), std::invalid_argument);
    CHECK_THROWS_AS(init_params(Architecture{2, {0}, 2}, rng_a), std::invalid_argument);
}

TEST_CASE("forward basics") {
    const Architecture arch{2, {4}, 3};
    Rng rng(1);
    auto params = init_params(arch, rng);

    // All-zero parameters give all-zero logits.
    for (auto& w : params.weights) std::fill(w.begin(), w.end(), 0.0);
    const auto logits = forward_eval(params, std::vector<double>{0.3, -0.7});
    for (double z : logits) {
        CHECK(z == 0.0);
    }

    const std::vector<double> bad = {1.0, std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(forward_eval(params, bad), std::invalid_argument);
    const std::vector<double> short_input = {1.0};
    CHECK_THROWS_AS(forward_eval(params, short_input), std::invalid_argument);
}

TEST_CASE("dropout: rate 0 is a no-op, masks are seed-stable") {
    const Architecture arch{2, {8}, 2};
    Rng rng(3);
    const auto params = init_params(arch, rng);
    const std::vector<double> x = {0.5, -1.25};

    Rng r1(10);
    const auto train_pass = forward(params, x, RunMode::train, 0.0, r1);
    CHECK(train_pass.logits == forward_eval(params, x));

    Rng r2(11), r3(11);
    const auto drop_a = forward(params, x, RunMode::train, 0.5, r2);
    const auto drop_b = forward(params, x, RunMode::train, 0.5, r3);
    CHECK(drop_a.trace.dropout_masks == drop_b.trace.dropout_masks);
    CHECK(drop_a.logits == drop_b.logits);
    for (double m : drop_a.trace.dropout_masks[0]) {
        CHECK((m == 0.0 || m == 1.0));
    }
    // mc_sample also applies dropout; eval never does.
    Rng r4(11);
    const auto mc_pass = forward(params, x, RunMode::mc_sample, 0.5, r4);
    CHECK(mc_pass.logits == drop_a.logits);
    Rng r5(12);
    const auto eval_pass = forward(params, x, RunMode::eval, 0.5, r5);
    CHECK(eval_pass.logits == forward_eval(params, x));
}

TEST_CASE("alpha head") {
    const std::vector<double> zeros = {0.0, 0.0, 0.0};
    const auto a0 = alpha_head(zeros);
    for (int i = 0; i < 3; ++i) {
        CHECK(a0[i] == doctest::Approx(std::log(2.0) + 1e-3).epsilon(1e-12));
    }
    const std::vector<double> extreme = {100.0, 0.0};
    const auto a1 = alpha_head(extreme);
    CHECK(a1[0] == doctest::Approx(100.001).epsilon(1e-9));
    CHECK(a1[1] == doctest::Approx(std::log(2.0) + 1e-3).epsilon(1e-12));
    const std::vector<double> tiny = {-100.0, 0.0};
    const auto a2 = alpha_head(tiny);
    CHECK(std::abs(a2[0] - 1e-3) < 1e-12);

    // exp head: clamped exponent.
    const std::vector<double> wide = {-100.0, 2.0};
    const auto a3 = alpha_head(wide, AlphaHeadKind::exp);
    CHECK(a3[0] == doctest::Approx(std::exp(-15.0)).epsilon(1e-12));
    CHECK(a3[1] == doctest::Approx(std::exp(2.0)).epsilon(1e-12));
}

TEST_CASE("zero upstream gradient gives zero parameter gradients") {
    const Architecture arch{3, {5}, 2};
    Rng rng(5);
    const auto params = init_params(arch, rng);
    Rng fr(0);
    const auto pass = forward(params, std::vector<double>{0.1, 0.2, 0.3}, RunMode::eval, 0.0, fr);
    const std::vector<double> zero = {0.0, 0.0};
    const auto grads = backward_from_logits(params, pass.trace, zero);
    for (const auto& layer : grads.weights) {
        for (double g : layer) {
            CHECK(g == 0.0);
        }
    }
}

TEST_CASE("dead ReLU units get zero incoming-weight gradients") {
    const Architecture arch{1, {2}, 2};
    Rng rng(2);
    auto params = init_params(arch, rng);
    // Force unit 0 dead, unit 1 alive for x = 1.
    params.weights[0] = {-1.0, 1.0};
    params.biases[0] = {-0.5, 0.5};
    Rng fr(0);
    const auto pass = forward(params, std::vector<double>{1.0}, RunMode::eval, 0.0, fr);
    REQUIRE(pass.trace.pre_activations[0][0] < 0.0);
    REQUIRE(pass.trace.pre_activations[0][1] > 0.0);
    const std::vector<double> upstream = {1.0, -2.0};
    const auto grads = backward_from_logits(params, pass.trace, upstream);
    CHECK(grads.weights[0][0] == 0.0); // into dead unit
    CHECK(grads.weights[0][1] != 0.0);
}

TEST_CASE("end-to-end gradients match finite differences") {
    // Random small networks, fELBO loss, both head kinds.
    Rng rng(12345);
    for (int trial = 0; trial < 5; ++trial) {
        const int d = 1 + static_cast<int>(rng.below(3));
        const int h = 2 + static_cast<int>(rng.below(6));
        const int k = 2 + static_cast<int>(rng.below(2));
        const AlphaHeadKind head = trial % 2 == 0 ? AlphaHeadKind::softplus : AlphaHeadKind::exp;
        const Architecture arch{d, {h}, k};
        auto params = init_params(arch, rng);

        std::vector<double> x_in(static_cast<std::size_t>(d)), x_ood(static_cast<std::size_t>(d));
        for (double& v : x_in) v = rng.normal(0.0, 1.0);
        for (double& v : x_ood) v = rng.normal(0.0, 2.0);
        const int label = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
        const double lambda = 0.7;

        const auto analytic = end_to_end_grads(params, x_in, label, x_ood, lambda, head);

        const double h_step = 1e-5;
        double max_rel = 0.0;
        for (std::size_t layer = 0; layer < params.weights.size(); ++layer) {
            for (std::size_t i = 0; i < params.weights[layer].size(); ++i) {
                auto perturbed = params;
                perturbed.weights[layer][i] += h_step;
                const double up = end_to_end_loss(perturbed, x_in, label, x_ood, lambda, head);
                perturbed.weights[layer][i] -= 2.0 * h_step;
                const double down = end_to_end_loss(perturbed, x_in, label, x_ood, lambda, head);
                const double fd = (up - down) / (2.0 * h_step);
                const double analytic_g = analytic.weights[layer][i];
                max_rel = std::max(max_rel, std::abs(fd - analytic_g) /
                                                std::max(1.0, std::abs(analytic_g)));
            }
            for (std::size_t i = 0; i < params.biases[layer].size(); ++i) {
                auto perturbed = params;
                perturbed.biases[layer][i] += h_step;
                const double up = end_to_end_loss(perturbed, x_in, label, x_ood, lambda, head);
                perturbed.biases[layer][i] -= 2.0 * h_step;
                const double down = end_to_end_loss(perturbed, x_in, label, x_ood, lambda, head);
                const double fd = (up - down) / (2.0 * h_step);
                const double analytic_g = analytic.biases[layer][i];
                max_rel = std::max(max_rel, std::abs(fd - analytic_g) /
                                                std::max(1.0, std::abs(analytic_g)));
            }
        }
        CHECK(max_rel < 1e-4);
    }
}

TEST_CASE("adam first step moves by lr in the gradient's sign") {
    const Architecture arch{2, {3}, 2};
    Rng rng(9);
    auto params = init_params(arch, rng);
    const auto before = params.weights;

    ParamGrads grads = zero_grads(arch);
    Rng grng(10);
    for (auto& layer : grads.weights) {
        for (double& g : layer) {
            g = grng.normal(0.0, 3.0);
        }
    }
    const double lr = 1e-3;
    adam_step(params, grads, lr);
    CHECK(params.adam_step_count == 1);
    for (std::size_t layer = 0; layer < params.weights.size(); ++layer) {
        for (std::size_t i = 0; i < params.weights[layer].size(); ++i) {
            const double g = grads.weights[layer][i];
            if (g == 0.0) {
                continue;
            }
            const double delta = params.weights[layer][i] - before[layer][i];
            CHECK(std::abs(delta + lr * (g > 0 ? 1.0 : -1.0)) < 1e-6);
        }
    }
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    const Architecture arch{2, {3}, 2};
    Rng rng(14);
    auto params = init_params(arch, rng);
    const auto snapshot = params.weights;
    const auto grads = zero_grads(arch);
    for (int step = 0; step < 50; ++step) {
        adam_step(params, grads, 1e-2);
    }
    CHECK(params.weights == snapshot);
}

TEST_CASE("adam rejects non-finite gradients") {
    const Architecture arch{2, {3}, 2};
    Rng rng(15);
    auto params = init_params(arch, rng);
    auto grads = zero_grads(arch);
    grads.weights[0][0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(params, grads, 1e-3), TrainingError);
}

TEST_CASE("softmax") {
    const std::vector<double> logits = {1000.0, 999.0, 0.0};
    const auto p = softmax(logits);
    CHECK(p[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
    CHECK(p.argmax() == 0);
    const std::vector<double> zeros = {0.0, 0.0, 0.0, 0.0};
    const auto u = softmax(zeros);
    for (int i = 0; i < 4; ++i) {
        CHECK(u[i] == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("flatten/unflatten round-trip") {
    const Architecture arch{3, {4, 5}, 2};
    Rng rng(77);
    const auto params = init_params(arch, rng);
    const auto flat = flatten_params(params.weights, params.biases);
    CHECK(flat.size() == 3u * 4u + 4u + 4u * 5u + 5u + 5u * 2u + 2u);
    std::vector<std::vector<double>> weights, biases;
    unflatten_params(arch, flat, weights, biases);
    CHECK(weights == params.weights);
    CHECK(biases == params.biases);
    CHECK_THROWS_AS(unflatten_params(arch, std::vector<double>(3), weights, biases),
                    std::invalid_argument);
}

} // TEST_SUITE
