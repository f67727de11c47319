#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "growsched/neural.hpp"
#include "test_support.hpp"

namespace growsched {
namespace {

TwoLayerClassifier zero_model(std::size_t features) {
    TwoLayerClassifier m;
    m.hidden = {Matrix(kHiddenUnits, features), std::vector<double>(kHiddenUnits, 0.0)};
    m.output = {Matrix(kClassCount, kHiddenUnits), std::vector<double>(kClassCount, 0.0)};
    return m;
}

Matrix row_matrix(std::vector<std::vector<double>> rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    return m;
}

TEST(Init, ShapesBoundsAndDeterminism) {
    const auto a = init_model(15960, 9);
    EXPECT_EQ(a.hidden.weights.rows(), 30u);
    EXPECT_EQ(a.hidden.weights.cols(), 15960u);
    EXPECT_EQ(a.output.weights.rows(), 26u);
    EXPECT_EQ(a.output.weights.cols(), 30u);
    EXPECT_NO_THROW(a.validate());
    const double b1 = 1.0 / std::sqrt(15960.0);
    for (double w : a.hidden.weights.values()) EXPECT_LE(std::abs(w), b1);
    const double b2 = 1.0 / std::sqrt(30.0);
    for (double w : a.output.weights.values()) EXPECT_LE(std::abs(w), b2);
    for (double b : a.hidden.bias) EXPECT_EQ(b, 0.0);

    const auto b = init_model(15960, 9);
    EXPECT_EQ(a.hidden.weights, b.hidden.weights);
    EXPECT_EQ(a.output.weights, b.output.weights);
    EXPECT_NE(init_model(15960, 10).hidden.weights, a.hidden.weights);
}

TEST(Forward, ZeroInputZeroBiasGivesZeroLogits) {
    const auto m = init_model(12, 1);
    for (double z : forward(m, std::vector<double>(12, 0.0))) EXPECT_EQ(z, 0.0);
}

// Embedded 2 -> 2 -> 2 block: W1 = [[1,2],[3,-1]], b1 = [0.5,-1],
// W2 = [[2,0],[-1,1]], b2 = [0.25,0]. For x = [1,2]:
// h = [1+4+0.5, 3-2-1] = [5.5, 0]; z = [11+0.25, -5.5+0] = [11.25, -5.5].
TEST(Forward, HandComputedTwoByTwoBlock) {
    auto m = zero_model(2);
    m.hidden.weights(0, 0) = 1;
    m.hidden.weights(0, 1) = 2;
    m.hidden.weights(1, 0) = 3;
    m.hidden.weights(1, 1) = -1;
    m.hidden.bias[0] = 0.5;
    m.hidden.bias[1] = -1;
    m.output.weights(0, 0) = 2;
    m.output.weights(1, 0) = -1;
    m.output.weights(1, 1) = 1;
    m.output.bias[0] = 0.25;
    const auto z = forward(m, std::vector<double>{1, 2});
    EXPECT_EQ(z[0], 11.25);
    EXPECT_EQ(z[1], -5.5);
    for (std::size_t k = 2; k < kClassCount; ++k) EXPECT_EQ(z[k], 0.0);

    // ReLU clamps the negative hidden unit: x = [0,3] gives h = [6.5, -4] -> [6.5, 0].
    m.activation = Activation::Relu;
    const auto r = forward(m, std::vector<double>{0, 3});
    EXPECT_EQ(r[0], 13.25);
    EXPECT_EQ(r[1], -6.5);
}

TEST(Forward, IdentityActivationSuperposes) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    auto m = init_model(9, 3);
    for (auto& b : m.hidden.bias) b = u(rng);
    for (auto& b : m.output.bias) b = u(rng);
    std::vector<double> x(9), y(9), xy(9), zero(9, 0.0);
    for (std::size_t i = 0; i < 9; ++i) {
        x[i] = u(rng);
        y[i] = u(rng);
        xy[i] = x[i] + y[i];
    }
    const auto fx = forward(m, x), fy = forward(m, y), fxy = forward(m, xy), f0 = forward(m, zero);
    for (std::size_t k = 0; k < kClassCount; ++k) EXPECT_NEAR(fxy[k] - fx[k] - fy[k] + f0[k], 0.0, 1e-12);
}

TEST(Loss, UniformLogitsGiveLnClassCount) {
    const Matrix logits(1, kClassCount, 0.7);
    const auto w = default_class_weights();
    for (int label : {0, 5, 25}) {
        EXPECT_NEAR(weighted_cross_entropy(logits, std::vector<int>{label}, w).loss, std::log(26.0), 1e-9);
    }
}

TEST(Loss, PeakedLogitHandValue) {
    Matrix logits(1, kClassCount, 0.0);
    logits(0, 0) = 10.0;
    const double expected = std::log1p(25.0 * std::exp(-10.0));
    EXPECT_NEAR(weighted_cross_entropy(logits, std::vector<int>{0}, default_class_weights()).loss, expected, 1e-15);
    EXPECT_NEAR(expected, 1.134e-3, 1e-6);
}

TEST(Loss, WeightedMeanOfRowLosses) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-2, 2);
    Matrix logits(2, kClassCount);
    for (auto& v : logits.values()) v = u(rng);
    const auto w = default_class_weights();
    const double a = weighted_cross_entropy(row_matrix({{logits.row(0).begin(), logits.row(0).end()}}),
                                            std::vector<int>{0}, w).loss;
    const double b = weighted_cross_entropy(row_matrix({{logits.row(1).begin(), logits.row(1).end()}}),
                                            std::vector<int>{5}, w).loss;
    const double both = weighted_cross_entropy(logits, std::vector<int>{0, 5}, w).loss;
    EXPECT_NEAR(both, (200.0 * a + b) / 201.0, 1e-12);
}

TEST(Loss, RejectsBadLabels) {
    const Matrix logits(1, kClassCount);
    EXPECT_THROW(weighted_cross_entropy(logits, std::vector<int>{26}, default_class_weights()), std::invalid_argument);
    EXPECT_THROW(weighted_cross_entropy(logits, std::vector<int>{-1}, default_class_weights()), std::invalid_argument);
}

TEST(Backward, MatchesCentralDifferences) {
    std::mt19937_64 rng(17);
    const auto w = default_class_weights();
    for (auto act : {Activation::Identity, Activation::Relu}) {
        for (int trial = 0; trial < 5; ++trial) {
            auto inst = testing_support::random_gradient_instance(rng, 7, 4, act);
            EXPECT_LT(testing_support::max_gradient_relative_error(inst, w), 1e-4);
        }
    }
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
    std::mt19937_64 rng(1);
    auto inst = testing_support::random_gradient_instance(rng, 5, 3, Activation::Identity);
    const auto pass = forward_batch(inst.model, inst.inputs);
    const auto g = backward(inst.model, inst.inputs, pass, Matrix(3, kClassCount));
    for (double v : g.hidden_weights.values()) EXPECT_EQ(v, 0.0);
    for (double v : g.output_weights.values()) EXPECT_EQ(v, 0.0);
    for (double v : g.hidden_bias) EXPECT_EQ(v, 0.0);
    for (double v : g.output_bias) EXPECT_EQ(v, 0.0);
}

TEST(Backward, FrozenLayerStillHasGradients) {
    std::mt19937_64 rng(4);
    auto inst = testing_support::random_gradient_instance(rng, 5, 3, Activation::Identity);
    inst.model.output.frozen = true;
    const auto pass = forward_batch(inst.model, inst.inputs);
    const auto lg = weighted_cross_entropy(pass.logits, inst.labels, default_class_weights());
    const auto g = backward(inst.model, inst.inputs, pass, lg.grad_logits);
    double norm = 0.0;
    for (double v : g.output_weights.values()) norm += v * v;
    EXPECT_GT(norm, 0.0);
}

TEST(Multipliers, ShapeAndScaling) {
    EXPECT_EQ(gradient_multipliers(3, 5, 0.1), (std::vector<double>{0.1, 0.1, 0.1, 1, 1}));

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1, 1);
    Matrix g(30, 5);
    for (auto& v : g.values()) v = u(rng);

    auto ones = g;
    apply_column_multipliers(ones, std::vector<double>(5, 1.0));
    EXPECT_EQ(ones, g);

    auto zeros = g;
    apply_column_multipliers(zeros, std::vector<double>(5, 0.0));
    for (double v : zeros.values()) EXPECT_EQ(v, 0.0);

    auto mixed = g;
    apply_column_multipliers(mixed, gradient_multipliers(3, 5, 0.1));
    for (std::size_t r = 0; r < 30; ++r) {
        for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(mixed(r, c), c < 3 ? g(r, c) * 0.1 : g(r, c));
    }
}

TEST(Adam, HandComputedFirstStep) {
    const AdamConfig cfg;
    AdamMoments m(1);
    std::vector<double> p{1.0};
    const std::vector<double> g{0.5};
    adam_update(cfg, m, 1, p, g);
    // Bias-corrected first step: m_hat = g, v_hat = g^2.
    const double expected = 1.0 - 0.05 * 0.5 / (std::sqrt(0.25) + 1e-8);
    EXPECT_NEAR(p[0], expected, 1e-9);
    EXPECT_NEAR(p[0], 0.95, 1e-8);
}

TEST(Adam, ZeroGradientLeavesParametersBitUnchanged) {
    AdamMoments m(3);
    std::vector<double> p{0.1, -2.0, 3.5};
    const auto before = p;
    for (int step = 1; step <= 5; ++step) adam_update(AdamConfig{}, m, step, p, std::vector<double>(3, 0.0));
    EXPECT_EQ(p, before);
}

TEST(Adam, FrozenLayerIsSkipped) {
    std::mt19937_64 rng(6);
    auto inst = testing_support::random_gradient_instance(rng, 4, 3, Activation::Identity);
    inst.model.output.frozen = true;
    const auto before = inst.model;
    AdamOptimizer opt(inst.model);
    const auto pass = forward_batch(inst.model, inst.inputs);
    const auto lg = weighted_cross_entropy(pass.logits, inst.labels, default_class_weights());
    opt.step(inst.model, backward(inst.model, inst.inputs, pass, lg.grad_logits));
    EXPECT_EQ(opt.steps_taken(), 1);
    EXPECT_EQ(inst.model.output.weights, before.output.weights);
    EXPECT_EQ(inst.model.output.bias, before.output.bias);
    EXPECT_NE(inst.model.hidden.weights, before.hidden.weights);
}

TEST(Argmax, TiesGoToLowestIndex) {
    EXPECT_EQ(argmax(std::vector<double>{1, 3, 3, 2}), 1);
    EXPECT_EQ(argmax(std::vector<double>{0, 0}), 0);
}

}  // namespace
}  // namespace growsched
