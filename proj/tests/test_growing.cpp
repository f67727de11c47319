#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include <nlohmann/json.hpp>

#include "growsched/growing.hpp"

namespace growsched {
namespace {

CovvVector bits(std::initializer_list<int> values) {
    CovvVector v(values.size());
    std::size_t i = 0;
    for (int b : values) {
        if (b) v.set(i);
        ++i;
    }
    return v;
}

// Three features; label 0 iff feature 0 is set, otherwise label 1. Every
// pattern appears many times so both splits see both classes.
TrainTestSplit separable_split() {
    DatasetSnapshot train, test;
    train.features_count = test.features_count = 3;
    std::mt19937_64 rng(12);
    auto fill = [&](DatasetSnapshot& s, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            const int a = static_cast<int>(rng() % 2), b = static_cast<int>(rng() % 2), c = static_cast<int>(rng() % 2);
            s.x.push_back(bits({a, b, c}));
            s.y.push_back(a ? 0 : 1);
        }
    };
    fill(train, 120);
    fill(test, 40);
    return {train, test, true};
}

// Perceptron on {x, 1}: converges iff the labels are linearly separable.
bool perceptron_separates(const DatasetSnapshot& data) {
    std::vector<double> w(data.features_count + 1, 0.0);
    for (int epoch = 0; epoch < 1000; ++epoch) {
        bool clean = true;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const int target = data.y[i] == 0 ? 1 : -1;
            double s = w.back();
            for (std::size_t f = 0; f < data.features_count; ++f) s += data.x[i].test(f) ? w[f] : 0.0;
            if (target * s <= 0) {
                clean = false;
                for (std::size_t f = 0; f < data.features_count; ++f) w[f] += data.x[i].test(f) ? target : 0;
                w.back() += target;
            }
        }
        if (clean) return true;
    }
    return false;
}

TrainConfig quick_config(std::uint64_t seed) {
    TrainConfig c;
    c.seed = seed;
    c.batch_size = 16;
    return c;
}

TEST(ModelFile, RoundTripIsBitExact) {
    ModelState s{init_model(40, 3, Activation::Relu), 3, {{10, 38, 40}}};
    s.model.hidden.bias[4] = 1.0 / 3.0;
    s.model.output.bias[7] = -std::nextafter(0.1, 1.0);
    const auto back = parse_state(serialize_state(s));
    EXPECT_EQ(back.model.hidden.weights, s.model.hidden.weights);
    EXPECT_EQ(back.model.hidden.bias, s.model.hidden.bias);
    EXPECT_EQ(back.model.output.weights, s.model.output.weights);
    EXPECT_EQ(back.model.output.bias, s.model.output.bias);
    EXPECT_EQ(back.model.activation, Activation::Relu);
    EXPECT_EQ(back.seed, 3u);
    EXPECT_EQ(back.history, s.history);
    std::vector<double> x(40, 0.0);
    x[3] = x[17] = 1.0;
    EXPECT_EQ(forward(back.model, x), forward(s.model, x));
}

TEST(ModelFile, OlderFormatVersionIsRejected) {
    auto j = nlohmann::json::parse(serialize_state({init_model(4, 1), 1, {}}));
    j["format_version"] = 1;
    try {
        parse_state(j.dump());
        FAIL() << "expected ModelFormatError";
    } catch (const ModelFormatError& e) {
        EXPECT_NE(std::string(e.what()).find("version 1"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_state("{not json"), ModelFormatError);
}

TEST(ModelFile, LoadExtendSaveAddsOneHistoryEntry) {
    const auto dir = std::filesystem::temp_directory_path() / "growsched_test_growing";
    std::filesystem::create_directories(dir);
    const auto path = dir / "m.json";
    save_state({init_model(5, 2), 2, {}}, path);
    auto s = load_state(path);
    extend_input_layer(s, 8, 1234);
    save_state(s, path);
    const auto back = load_state(path);
    ASSERT_EQ(back.history.size(), 1u);
    EXPECT_EQ(back.history[0], (ExtensionRecord{1234, 5, 8}));
    EXPECT_EQ(back.features_count(), 8u);
    std::filesystem::remove_all(dir);
}

TEST(Extend, PadsZeroColumnsAndKeepsOldOnes) {
    auto m = init_model(15960, 4);
    const auto before = m.hidden.weights;
    extend_input_layer(m, 15962);
    ASSERT_EQ(m.hidden.weights.cols(), 15962u);
    ASSERT_EQ(m.hidden.weights.rows(), 30u);
    for (std::size_t r = 0; r < 30; ++r) {
        for (std::size_t c = 0; c < 15960; ++c) ASSERT_EQ(m.hidden.weights(r, c), before(r, c));
        EXPECT_EQ(m.hidden.weights(r, 15960), 0.0);
        EXPECT_EQ(m.hidden.weights(r, 15961), 0.0);
    }
    EXPECT_THROW(extend_input_layer(m, 100), std::invalid_argument);
}

TEST(Extend, EqualWidthIsNoOpWithoutHistory) {
    ModelState s{init_model(6, 1), 1, {}};
    const auto before = s.model.hidden.weights;
    extend_input_layer(s, 6, 99);
    EXPECT_EQ(s.model.hidden.weights, before);
    EXPECT_TRUE(s.history.empty());
}

TEST(Extend, OldInputLogitsAreIdentical) {
    std::mt19937_64 rng(30);
    auto m = init_model(20, 8, Activation::Relu);
    for (auto& b : m.hidden.bias) b = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    auto grown = m;
    extend_input_layer(grown, 27);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> x(20);
        for (auto& v : x) v = static_cast<double>(rng() % 2);
        const auto old_logits = forward(m, x);
        x.resize(27, 0.0);
        ASSERT_EQ(forward(grown, x), old_logits);
    }
}

TEST(Train, SeparableToyReachesThresholds) {
    const auto data = separable_split();
    ASSERT_TRUE(perceptron_separates(data.train));
    const auto r = train_full(3, data, quick_config(5));
    EXPECT_EQ(r.outcome.mode, TrainMode::FullyRetrained);
    EXPECT_LE(r.outcome.epochs_used, 100u);
    EXPECT_EQ(r.outcome.attempts_used, 1u);
    EXPECT_GT(r.outcome.accuracy, 0.95);
    ASSERT_TRUE(r.outcome.group0_f1.has_value());
    EXPECT_GT(*r.outcome.group0_f1, 0.9);

    // Reported metrics are exactly those evalkit recomputes on the returned model.
    const auto m = evaluate(r.state.model, data.test);
    EXPECT_EQ(m.accuracy, r.outcome.accuracy);
    EXPECT_EQ(m.group0_f1(), r.outcome.group0_f1);
}

TEST(Train, PassingModelUsesZeroEpochs) {
    const auto data = separable_split();
    const auto trained = train_full(3, data, quick_config(5));
    ASSERT_NE(trained.outcome.mode, TrainMode::Failed);
    const auto r = train_growing(trained.state, 3, data, quick_config(6));
    EXPECT_EQ(r.outcome.mode, TrainMode::Grown);
    EXPECT_EQ(r.outcome.epochs_used, 0u);
    EXPECT_EQ(r.outcome.attempts_used, 1u);
    EXPECT_EQ(r.state.model.hidden.weights, trained.state.model.hidden.weights);
    EXPECT_FALSE(r.state.model.output.frozen);
}

TEST(Train, UnlearnableLabelsFailAfterEveryAttempt) {
    DatasetSnapshot train, test;
    train.features_count = test.features_count = 4;
    std::mt19937_64 rng(2);
    for (int i = 0; i < 80; ++i) {
        (i % 4 == 0 ? test : train).x.push_back(CovvVector(4));  // identical inputs
        (i % 4 == 0 ? test : train).y.push_back(static_cast<int>(rng() % 6));
    }
    auto cfg = quick_config(1);
    cfg.max_attempts = 2;
    cfg.epochs_limit = 5;
    const auto r = train_full(4, {train, test, false}, cfg);
    EXPECT_EQ(r.outcome.mode, TrainMode::Failed);
    EXPECT_EQ(r.outcome.attempts_used, 2u);
    EXPECT_EQ(r.outcome.epochs_used, 10u);
    EXPECT_EQ(to_string(r.outcome.mode), "failed");
}

TEST(Train, IdenticalInputsGiveIdenticalWeights) {
    const auto data = separable_split();
    auto cfg = quick_config(9);
    cfg.epochs_limit = 3;
    cfg.accepted_accuracy = 1.0;  // never strictly exceeded, so every epoch runs
    cfg.max_attempts = 2;
    const auto a = train_full(3, data, cfg);
    const auto b = train_full(3, data, cfg);
    EXPECT_EQ(a.state.model.hidden.weights, b.state.model.hidden.weights);
    EXPECT_EQ(a.state.model.output.weights, b.state.model.output.weights);
    EXPECT_EQ(a.outcome.epochs_used, 6u);
}

TEST(Train, RetryKeepsExtensionHistory) {
    const auto data = separable_split();
    ModelState s{init_model(2, 1), 1, {}};
    extend_input_layer(s, 3, 500);
    auto cfg = quick_config(2);
    cfg.epochs_limit = 1;
    cfg.accepted_accuracy = 1.0;
    cfg.max_attempts = 2;
    const auto r = train_growing(s, 2, data, cfg);
    EXPECT_EQ(r.outcome.attempts_used, 2u);
    EXPECT_EQ(r.state.history, s.history);
    EXPECT_EQ(r.state.seed, 3u);  // seed + attempt
}

TEST(Train, ZeroRateKeepsPretrainedColumnsFixed) {
    // Features 0-1 are pretrained; feature 2 is new and fully predictive.
    const auto data = separable_split();
    DatasetSnapshot train = data.train, test = data.test;
    for (auto* s : {&train, &test}) {
        for (std::size_t i = 0; i < s->size(); ++i) {
            CovvVector row(3);
            if (s->x[i].test(1)) row.set(0);
            if (s->x[i].test(2)) row.set(1);
            if (s->y[i] == 0) row.set(2);
            s->x[i] = row;
        }
    }
    ModelState s{init_model(2, 4), 4, {}};
    extend_input_layer(s, 3, 1);
    auto cfg = quick_config(3);
    cfg.pretrained_gradient_rate = 0.0;
    cfg.epochs_limit = 1;
    cfg.max_attempts = 1;
    cfg.accepted_accuracy = 1.0;
    const auto r = train_growing(s, 2, {train, test, true}, cfg);
    ASSERT_EQ(r.outcome.epochs_used, 1u);
    bool new_changed = false;
    for (std::size_t j = 0; j < kHiddenUnits; ++j) {
        EXPECT_EQ(r.state.model.hidden.weights(j, 0), s.model.hidden.weights(j, 0));
        EXPECT_EQ(r.state.model.hidden.weights(j, 1), s.model.hidden.weights(j, 1));
        new_changed = new_changed || r.state.model.hidden.weights(j, 2) != 0.0;
    }
    EXPECT_TRUE(new_changed);
    EXPECT_EQ(r.state.model.output.weights, s.model.output.weights);
}

TEST(TrainConfig, ValidationRejectsBadThresholds) {
    TrainConfig c;
    c.accepted_accuracy = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.epochs_limit = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.max_attempts = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace growsched
