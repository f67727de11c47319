#include "growsched/growing.hpp"

#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "growsched/random.hpp"

namespace growsched {

using nlohmann::ordered_json;

namespace {

ordered_json layer_to_json(const DenseLayer& layer) {
    ordered_json weights = ordered_json::array();
    for (std::size_t r = 0; r < layer.weights.rows(); ++r) {
        const auto row = layer.weights.row(r);
        weights.push_back(std::vector<double>(row.begin(), row.end()));
    }
    ordered_json out;
    out["weights"] = std::move(weights);
    out["bias"] = layer.bias;
    return out;
}

DenseLayer layer_from_json(const nlohmann::json& j, std::size_t rows, std::size_t cols, const char* name) {
    const auto& weights = j.at("weights");
    if (!weights.is_array() || weights.size() != rows) {
        throw ModelFormatError(std::string(name) + ": expected " + std::to_string(rows) + " weight rows");
    }
    DenseLayer layer{Matrix(rows, cols), j.at("bias").get<std::vector<double>>(), false};
    if (layer.bias.size() != rows) throw ModelFormatError(std::string(name) + ": bias length mismatch");
    for (std::size_t r = 0; r < rows; ++r) {
        const auto row = weights[r].get<std::vector<double>>();
        if (row.size() != cols) {
            throw ModelFormatError(std::string(name) + ": expected " + std::to_string(cols) + " weight columns");
        }
        std::copy(row.begin(), row.end(), layer.weights.row(r).begin());
    }
    return layer;
}

}  // namespace

std::string serialize_state(const ModelState& state) {
    state.model.validate();
    ordered_json doc;
    doc["format_version"] = kModelFormatVersion;
    doc["features_count"] = state.model.features_count();
    doc["hidden"] = kHiddenUnits;
    doc["classes"] = kClassCount;
    doc["activation"] = state.model.activation == Activation::Relu ? "relu" : "identity";
    doc["seed"] = state.seed;
    doc["layers"]["hidden"] = layer_to_json(state.model.hidden);
    doc["layers"]["output"] = layer_to_json(state.model.output);
    ordered_json history = ordered_json::array();
    for (const auto& e : state.history) {
        history.push_back({{"step_time", e.step_time_us}, {"old_count", e.old_count}, {"new_count", e.new_count}});
    }
    doc["extension_history"] = std::move(history);
    return doc.dump() + '\n';
}

ModelState parse_state(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ModelFormatError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        const auto version = doc.at("format_version").get<int>();
        if (version != kModelFormatVersion) {
            throw ModelFormatError("unsupported model format version " + std::to_string(version) + " (expected " +
                                   std::to_string(kModelFormatVersion) + ")");
        }
        const auto features = doc.at("features_count").get<std::size_t>();
        if (features == 0) throw ModelFormatError("features_count must be >= 1");
        if (doc.at("hidden").get<std::size_t>() != kHiddenUnits || doc.at("classes").get<std::size_t>() != kClassCount) {
            throw ModelFormatError("model dimensions must be hidden=30, classes=26");
        }
        ModelState state;
        const auto activation = doc.at("activation").get<std::string>();
        if (activation == "identity") {
            state.model.activation = Activation::Identity;
        } else if (activation == "relu") {
            state.model.activation = Activation::Relu;
        } else {
            throw ModelFormatError("unknown activation '" + activation + "'");
        }
        state.seed = doc.at("seed").get<std::uint64_t>();
        state.model.hidden = layer_from_json(doc.at("layers").at("hidden"), kHiddenUnits, features, "hidden");
        state.model.output = layer_from_json(doc.at("layers").at("output"), kClassCount, kHiddenUnits, "output");
        for (const auto& e : doc.at("extension_history")) {
            state.history.push_back({e.at("step_time").get<std::int64_t>(), e.at("old_count").get<std::size_t>(),
                                     e.at("new_count").get<std::size_t>()});
        }
        return state;
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("malformed model file: ") + e.what());
    }
}

void save_state(const ModelState& state, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << serialize_state(state);
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

ModelState load_state(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_state(buffer.str());
}

void extend_input_layer(TwoLayerClassifier& model, std::size_t new_features_count) {
    if (new_features_count < model.features_count()) {
        throw std::invalid_argument("cannot shrink input layer from " + std::to_string(model.features_count()) +
                                    " to " + std::to_string(new_features_count));
    }
    model.hidden.weights.pad_columns(new_features_count);
}

void extend_input_layer(ModelState& state, std::size_t new_features_count, std::int64_t step_time_us) {
    const std::size_t old_count = state.model.features_count();
    extend_input_layer(state.model, new_features_count);
    if (new_features_count != old_count) state.history.push_back({step_time_us, old_count, new_features_count});
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("train config: " + msg); };
    if (!(accepted_accuracy > 0.0 && accepted_accuracy <= 1.0)) fail("accepted_accuracy must be in (0,1]");
    if (!(accepted_group0_f1 > 0.0 && accepted_group0_f1 <= 1.0)) fail("accepted_group0_f1 must be in (0,1]");
    if (!(pretrained_gradient_rate >= 0.0 && pretrained_gradient_rate <= 1.0)) {
        fail("pretrained_gradient_rate must be in [0,1]");
    }
    if (epochs_limit == 0) fail("epochs_limit must be >= 1");
    if (max_attempts == 0) fail("max_attempts must be >= 1");
    if (batch_size == 0) fail("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (!(group0_weight > 0.0)) fail("group0_weight must be positive");
}

std::string_view to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::Grown:
            return "grown";
        case TrainMode::FullyRetrained:
            return "fully_retrained";
        case TrainMode::Failed:
            return "failed";
    }
    return "?";
}

bool meets_thresholds(const Metrics& metrics, const TrainConfig& config) {
    if (!(metrics.accuracy > config.accepted_accuracy)) return false;
    const auto f1 = metrics.group0_f1();
    return !f1 || *f1 > config.accepted_group0_f1;
}

namespace {

struct AttemptResult {
    bool success = false;
    std::size_t epochs = 0;
    Metrics metrics;
};

void check_data(std::size_t features_count, const TrainTestSplit& data) {
    if (data.train.empty()) throw std::invalid_argument("training set is empty");
    if (data.test.empty()) throw std::invalid_argument("test set is empty");
    if (data.train.features_count != features_count || data.test.features_count != features_count) {
        throw std::invalid_argument("model expects " + std::to_string(features_count) + " features, data has " +
                                    std::to_string(data.train.features_count));
    }
}

/// Runs up to epochs_limit epochs, evaluating after each, and stops at the
/// first epoch whose metrics pass the gate.
AttemptResult run_attempt(TwoLayerClassifier& model, const std::vector<double>& multipliers,
                          const TrainTestSplit& data, const TrainConfig& config, std::uint64_t seed) {
    const auto class_weights = default_class_weights(config.group0_weight);
    AdamOptimizer optimizer(model, AdamConfig{config.learning_rate});
    Rng rng(mix_seed(seed, 0x5f1e));
    const std::size_t n = data.train.size();
    const std::size_t features = data.train.features_count;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    AttemptResult result;
    for (std::size_t epoch = 1; epoch <= config.epochs_limit; ++epoch) {
        shuffle_in_place(order, rng);
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t rows = std::min(config.batch_size, n - start);
            Matrix inputs(rows, features);
            std::vector<int> labels(rows);
            for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t idx = order[start + r];
                const auto bits = data.train.x[idx].bits();
                std::copy(bits.begin(), bits.end(), inputs.row(r).begin());
                labels[r] = data.train.y[idx];
            }
            const auto pass = forward_batch(model, inputs);
            const auto loss = weighted_cross_entropy(pass.logits, labels, class_weights);
            auto grads = backward(model, inputs, pass, loss.grad_logits);
            if (!multipliers.empty()) apply_column_multipliers(grads.hidden_weights, multipliers);
            optimizer.step(model, grads);
        }
        result.epochs = epoch;
        result.metrics = evaluate(model, data.test);
        if (meets_thresholds(result.metrics, config)) {
            result.success = true;
            return result;
        }
    }
    return result;
}

void finish(TrainOutcome& outcome, const Metrics& metrics, std::chrono::steady_clock::time_point start) {
    outcome.accuracy = metrics.accuracy;
    outcome.group0_f1 = metrics.group0_f1();
    outcome.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Shared retry loop; attempt 0 uses `first` (already prepared), later
/// attempts start fresh.
TrainResult train_with_retries(ModelState first, const std::vector<double>& first_multipliers, TrainMode first_mode,
                               const TrainTestSplit& data, const TrainConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t features = first.features_count();
    TrainResult result{std::move(first), {}};

    const Metrics before = evaluate(result.state.model, data.test);
    if (meets_thresholds(before, config)) {
        result.outcome.mode = first_mode;
        result.outcome.attempts_used = 1;
        finish(result.outcome, before, start);
        return result;
    }

    Metrics last = before;
    for (std::size_t attempt = 0; attempt < config.max_attempts; ++attempt) {
        std::vector<double> multipliers;
        TrainMode mode = TrainMode::FullyRetrained;
        if (attempt == 0) {
            multipliers = first_multipliers;
            mode = first_mode;
        } else {
            result.state = ModelState{init_model(features, config.seed + attempt, config.activation),
                                      config.seed + attempt, std::move(result.state.history)};
        }
        const auto run = run_attempt(result.state.model, multipliers, data, config, config.seed + attempt);
        result.outcome.epochs_used += run.epochs;
        result.outcome.attempts_used = attempt + 1;
        last = run.metrics;
        if (run.success) {
            result.outcome.mode = mode;
            finish(result.outcome, last, start);
            return result;
        }
    }
    result.outcome.mode = TrainMode::Failed;
    finish(result.outcome, last, start);
    return result;
}

}  // namespace

TrainResult train_growing(ModelState state, std::size_t pretrained_features, const TrainTestSplit& data,
                          const TrainConfig& config) {
    config.validate();
    state.model.validate();
    check_data(state.features_count(), data);
    if (pretrained_features > state.features_count()) {
        throw std::invalid_argument("pretrained feature count exceeds model width");
    }
    state.model.hidden.frozen = false;
    state.model.output.frozen = true;
    const auto multipliers =
        gradient_multipliers(pretrained_features, state.features_count(), config.pretrained_gradient_rate);
    auto result = train_with_retries(std::move(state), multipliers, TrainMode::Grown, data, config);
    result.state.model.hidden.frozen = false;
    result.state.model.output.frozen = false;
    return result;
}

TrainResult train_full(std::size_t features_count, const TrainTestSplit& data, const TrainConfig& config) {
    config.validate();
    check_data(features_count, data);
    ModelState fresh{init_model(features_count, config.seed, config.activation), config.seed, {}};
    return train_with_retries(std::move(fresh), {}, TrainMode::FullyRetrained, data, config);
}

}  // namespace growsched
