#ifndef GROWSCHED_EVALKIT_HPP
#define GROWSCHED_EVALKIT_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "growsched/neural.hpp"
#include "growsched/trace.hpp"

namespace growsched {

struct SplitConfig {
    double test_fraction = 0.25;
    bool stratify = true;  // falls back to a plain split when a class has one sample
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainTestSplit {
    DatasetSnapshot train;
    DatasetSnapshot test;
    bool stratified = false;
};

/// Holdout split. Stratified when every present class has at least two
/// samples: each class contributes its proportional share to the test side
/// (largest-remainder rounding, clamped so both sides keep the class).
/// Throws std::invalid_argument for fewer than 4 rows.
TrainTestSplit stratified_split(const DatasetSnapshot& data, const SplitConfig& config);

using ConfusionMatrix = std::array<std::array<std::size_t, kClassCount>, kClassCount>;  // [truth][predicted]

struct Metrics {
    double accuracy = 0.0;
    std::size_t total = 0;
    ConfusionMatrix confusion{};
    std::array<std::size_t, kClassCount> support{};
    // n/a: precision with no predictions of the class, recall/F1 with no support.
    std::array<std::optional<double>, kClassCount> precision{};
    std::array<std::optional<double>, kClassCount> recall{};
    std::array<std::optional<double>, kClassCount> f1{};
    std::optional<double> macro_f1;

    std::optional<double> group0_f1() const { return f1[0]; }
};

Metrics metrics_from_confusion(const ConfusionMatrix& confusion);
Metrics evaluate_predictions(std::span<const int> labels, std::span<const int> predictions);

std::vector<int> predict(const TwoLayerClassifier& model, const DatasetSnapshot& data);

/// Argmax predictions scored against the snapshot labels.
Metrics evaluate(const TwoLayerClassifier& model, const DatasetSnapshot& test);

struct StepReport {
    std::int64_t step_time_us = 0;
    std::size_t features_count = 0;
    std::string model;
    std::size_t epochs = 0;
    std::size_t attempts = 0;
    double accuracy = 0.0;
    std::optional<double> group0_f1;

    friend bool operator==(const StepReport&, const StepReport&) = default;
};

enum class ReportFormat { Csv, Json };

/// Columns: step_time, features_count, model, epochs, attempts, accuracy,
/// group0_f1. n/a is an empty CSV cell or JSON null. Doubles use the shortest
/// round-trip representation.
std::string format_report(std::span<const StepReport> rows, ReportFormat format);
void write_report(std::span<const StepReport> rows, const std::filesystem::path& path, ReportFormat format);
std::vector<StepReport> read_report_csv(const std::filesystem::path& path);

std::string format_double(double value);

}  // namespace growsched

#endif  // GROWSCHED_EVALKIT_HPP
