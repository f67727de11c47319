#ifndef GROWSCHED_TRACE_HPP
#define GROWSCHED_TRACE_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "growsched/covv.hpp"
#include "growsched/oracle.hpp"

namespace growsched {

struct TaskSubmitEvent {
    TaskConstraintSet task;
    std::int64_t duration_us = 0;

    friend bool operator==(const TaskSubmitEvent&, const TaskSubmitEvent&) = default;
};

struct TraceEvent {
    std::int64_t time_us = 0;
    std::variant<MachineAttributeEvent, TaskSubmitEvent> body;

    bool is_task() const { return std::holds_alternative<TaskSubmitEvent>(body); }
    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

class TraceParseError : public std::runtime_error {
public:
    TraceParseError(std::size_t line, const std::string& message);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Reads JSONL events:
///   {"t":int,"kind":"machine","node":int,"attr":str,"val":str|null}
///   {"t":int,"kind":"task","id":int,"dur":int,"cons":[{"attr":str,"op":str,"operands":[str]}]}
/// Blank lines are skipped. Throws TraceParseError on malformed JSON, schema
/// violations, unknown operators, or time going backwards.
std::vector<TraceEvent> parse_events(std::istream& in);

std::string format_event(const TraceEvent& event);
void write_events(std::span<const TraceEvent> events, std::ostream& out);

struct GrowthInjection {
    std::int64_t time_us = 0;
    std::size_t count = 0;
};

struct SyntheticTraceConfig {
    std::size_t node_count = 200;
    std::size_t attribute_count = 6;
    std::size_t values_per_attribute = 10;
    std::size_t task_count = 40000;
    double constrained_fraction = 0.4;
    double restrictive_rate = 15.0;  // expected single-node tasks per 10,000
    std::vector<GrowthInjection> growth_schedule;
    double mean_duration_us = 60e6;
    std::int64_t span_us = 20LL * 86400 * 1000000;
    double unset_fraction = 0.1;
    double new_template_probability = 0.1;
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument.
    void validate() const;
};

/// `steps` injections of `values_per_step` new values at span*(j+1)/(steps+1).
std::vector<GrowthInjection> even_growth_schedule(std::size_t steps, std::size_t values_per_step, std::int64_t span_us);

/// Name of the attribute carrying each node's unique host value.
inline constexpr const char* kHostAttribute = "HOST";
std::string synthetic_attribute_name(std::size_t index);

/// Deterministic GCD-shaped trace: node bootstrap at t=0, then task
/// submissions interleaved with growth injections. Single-node tasks pin a
/// unique HOST value with EQ.
std::vector<TraceEvent> generate_events(const SyntheticTraceConfig& config);
std::string generate_trace(const SyntheticTraceConfig& config);

/// Bursts of unconstrained tasks each followed by a few HOST-pinned tasks;
/// stresses FIFO head-of-line delay for restrictive work.
struct BurstTraceConfig {
    std::size_t node_count = 40;
    std::size_t bursts = 30;
    std::size_t burst_size = 120;
    std::size_t restrictive_per_burst = 3;
    std::int64_t burst_interval_us = 30'000'000;
    std::int64_t duration_us = 2'000'000;
    std::uint64_t seed = 7;
};
std::vector<TraceEvent> generate_burst_events(const BurstTraceConfig& config);

/// Encoded, labeled rows for one retraining step. All rows share
/// features_count; Unschedulable tasks never appear.
struct DatasetSnapshot {
    std::vector<CovvVector> x;
    std::vector<int> y;
    std::size_t features_count = 0;
    std::int64_t step_time_us = 0;

    std::size_t size() const { return y.size(); }
    bool empty() const { return y.empty(); }
    /// Throws std::invalid_argument on ragged rows or out-of-range labels.
    void validate() const;
    DatasetSnapshot subset(std::span<const std::size_t> rows) const;
};

struct SnapshotBuild {
    DatasetSnapshot snapshot;
    std::size_t dropped_unschedulable = 0;
};

/// Encodes every task against the registry (registering operands), aligns all
/// rows to the final registry length, and labels each against the inventory.
SnapshotBuild build_snapshot(std::span<const TaskConstraintSet> tasks, FeatureRegistry& registry,
                             const NodeInventory& inventory, const GroupingConfig& grouping,
                             std::int64_t step_time_us);

/// JSON: {"features_count":n,"step_time":t,"rows":[{"y":g,"ones":[i,...]},...]}
void write_snapshot(const DatasetSnapshot& snapshot, std::ostream& out);
DatasetSnapshot read_snapshot(std::istream& in);

}  // namespace growsched

#endif  // GROWSCHED_TRACE_HPP
