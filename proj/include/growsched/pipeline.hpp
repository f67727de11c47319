#ifndef GROWSCHED_PIPELINE_HPP
#define GROWSCHED_PIPELINE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "growsched/evalkit.hpp"
#include "growsched/growing.hpp"
#include "growsched/oracle.hpp"
#include "growsched/schedsim.hpp"
#include "growsched/trace.hpp"

namespace growsched {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kGrowingArm = "growing";
inline constexpr const char* kFullyRetrainArm = "fully_retrain";

struct ArmSelection {
    bool growing = true;
    bool fully_retrain = true;
};

/// Parses a comma-separated subset of {growing, fully_retrain}.
ArmSelection parse_arms(const std::string& text);

struct RunConfig {
    SyntheticTraceConfig trace;
    std::optional<std::filesystem::path> trace_path;  // replaces the synthetic trace when set
    GroupingConfig grouping;
    TrainConfig train;
    SplitConfig split;
    SchedulerConfig scheduler;
    std::size_t history_windows = 3;  // earlier windows merged into each step's snapshot
    std::size_t bulk_growth_limit = 40;
    bool split_bulk_growth = false;  // train oversized growth in sub-steps of <= bulk_growth_limit
    bool parallel_arms = false;
    std::uint64_t seed = 1;  // drives per-step split and initialization seeds
    std::filesystem::path output_dir;  // empty: nothing is written
    ArmSelection arms;

    void validate() const;
};

inline constexpr std::size_t kDeskGrowthSteps = 20;
inline constexpr std::size_t kDeskValuesPerStep = 3;
inline constexpr std::size_t kDeskIncrement = 40;

/// Desk-scale defaults: 200 nodes, 40,000 tasks, 20 evenly spaced growth
/// injections. `seed` drives both the trace and training.
RunConfig desk_run_config(std::uint64_t seed = 1);

/// Stable key=value rendering of every field that influences outputs.
std::string canonical_config(const RunConfig& config);

/// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);

struct ArmSummary {
    std::string arm;
    std::size_t steps = 0;
    std::optional<double> mean_accuracy;
    std::optional<double> mean_group0_f1;  // over rows that have a value
    std::size_t total_epochs = 0;
    std::size_t failed_steps = 0;  // rows whose model failed the gate after every attempt
};

/// Unweighted aggregation of one arm's report rows. `modes` runs parallel to
/// `rows` and may be empty, in which case failed_steps stays 0.
ArmSummary summarize(const std::vector<StepReport>& rows, const std::vector<TrainMode>& modes, const std::string& arm);

struct RunManifest {
    std::string config_hash;
    std::string tool_version = kToolVersion;
    std::vector<StepReport> rows;
    std::vector<TrainMode> modes;  // parallel to rows
    std::vector<ArmSummary> summaries;
    std::size_t steps = 0;
    std::size_t skipped_steps = 0;
    std::size_t dropped_unschedulable = 0;
    std::size_t bulk_growth_warnings = 0;
    std::optional<std::filesystem::path> csv_path;
    std::optional<std::filesystem::path> json_path;
    std::optional<std::filesystem::path> manifest_path;
    std::optional<std::filesystem::path> model_path;
    std::optional<ModelState> final_growing_model;

    bool any_failed() const;
};

/// Replays the trace. Every batch of same-timestamp events that grows the
/// feature registry closes the current task window and fires one step: the
/// window plus up to `history_windows` earlier windows are re-encoded and
/// relabeled against the current registry and inventory, split, and trained
/// by each selected arm. Without any growth a single step fires at the end.
/// Tasks arriving after the last growth belong to no step. Writes steps.csv,
/// steps.json, manifest.json and growing_model.json when output_dir is set.
RunManifest run_simulation(const RunConfig& config);

std::string format_manifest(const RunManifest& manifest);

}  // namespace growsched

#endif  // GROWSCHED_PIPELINE_HPP
