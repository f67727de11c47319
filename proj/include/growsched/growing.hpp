#ifndef GROWSCHED_GROWING_HPP
#define GROWSCHED_GROWING_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "growsched/evalkit.hpp"
#include "growsched/neural.hpp"

namespace growsched {

inline constexpr int kModelFormatVersion = 2;

struct ExtensionRecord {
    std::int64_t step_time_us = 0;
    std::size_t old_count = 0;
    std::size_t new_count = 0;

    friend bool operator==(const ExtensionRecord&, const ExtensionRecord&) = default;
};

/// A classifier plus the bookkeeping that travels with it on disk. Optimizer
/// state is never part of it.
struct ModelState {
    TwoLayerClassifier model;
    std::uint64_t seed = 0;
    std::vector<ExtensionRecord> history;

    std::size_t features_count() const { return model.features_count(); }
};

class ModelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// JSON container; see docs/model_format.md. Weights round-trip bit-exactly.
std::string serialize_state(const ModelState& state);
ModelState parse_state(const std::string& text);
void save_state(const ModelState& state, const std::filesystem::path& path);
ModelState load_state(const std::filesystem::path& path);

/// Zero-pads the input layer on the right to `new_features_count` columns.
/// Logits for any old input extended with zeros are bit-identical afterwards.
/// Throws std::invalid_argument on shrink.
void extend_input_layer(TwoLayerClassifier& model, std::size_t new_features_count);

/// As above, recording (step_time, old, new) when the width changes.
void extend_input_layer(ModelState& state, std::size_t new_features_count, std::int64_t step_time_us);

struct TrainConfig {
    double learning_rate = 0.05;
    double group0_weight = 200.0;
    double pretrained_gradient_rate = 0.1;
    std::size_t epochs_limit = 100;
    double accepted_accuracy = 0.95;
    double accepted_group0_f1 = 0.9;
    std::size_t max_attempts = 10;
    std::size_t batch_size = 64;
    Activation activation = Activation::Identity;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class TrainMode { Grown, FullyRetrained, Failed };
std::string_view to_string(TrainMode mode);

struct TrainOutcome {
    TrainMode mode = TrainMode::Failed;
    std::size_t epochs_used = 0;    // summed over every attempt
    std::size_t attempts_used = 0;
    double accuracy = 0.0;
    std::optional<double> group0_f1;  // n/a when the test split has no group 0
    double wall_seconds = 0.0;
};

struct TrainResult {
    ModelState state;
    TrainOutcome outcome;
};

/// Early-stop gate: accuracy above the threshold and group-0 F1 above its
/// threshold (or unmeasurable).
bool meets_thresholds(const Metrics& metrics, const TrainConfig& config);

/// Transfer training of an already-extended model. The first attempt keeps
/// the output layer frozen and scales input-weight gradients of the first
/// `pretrained_features` columns by the pretrained gradient rate. When a
/// model already passes the gate it returns with zero epochs. Each further
/// attempt starts from a fresh model (seed + attempt) with everything
/// trainable.
TrainResult train_growing(ModelState state, std::size_t pretrained_features, const TrainTestSplit& data,
                          const TrainConfig& config);

/// Train from scratch with the same loss, optimizer, gate and retry policy.
TrainResult train_full(std::size_t features_count, const TrainTestSplit& data, const TrainConfig& config);

}  // namespace growsched

#endif  // GROWSCHED_GROWING_HPP
