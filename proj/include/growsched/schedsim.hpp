#ifndef GROWSCHED_SCHEDSIM_HPP
#define GROWSCHED_SCHEDSIM_HPP

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "growsched/neural.hpp"
#include "growsched/oracle.hpp"
#include "growsched/trace.hpp"

namespace growsched {

enum class SchedulerPolicy { Fifo, CoAnalyzer };

std::string_view to_string(SchedulerPolicy policy);
/// Accepts "fifo" and "co-analyzer".
SchedulerPolicy parse_policy(std::string_view text);

struct SchedulerConfig {
    SchedulerPolicy policy = SchedulerPolicy::Fifo;
    int priority_threshold = 0;  // predicted groups 0..threshold go to the high-priority queue
    std::size_t slots_per_node = 4;
    std::size_t dispatch_rate = 8;  // placement attempts per tick, shared by both queues
    std::size_t retrain_delay_ticks = 0;
    std::int64_t tick_us = 1'000'000;
    GroupingConfig grouping;

    /// Throws std::invalid_argument.
    void validate() const;
};

/// Predicts a group (or Unschedulable) for an arriving task. The vector is
/// encoded against the simulator's registry at submit time.
class TaskClassifier {
public:
    virtual ~TaskClassifier() = default;
    virtual int predict(const TaskConstraintSet& task, const CovvVector& encoded,
                        const NodeInventory& inventory) const = 0;
};

/// Argmax of a trained model. Shorter vectors are zero-padded to the model
/// width; a vector wider than the model throws std::invalid_argument.
class ModelClassifier final : public TaskClassifier {
public:
    explicit ModelClassifier(TwoLayerClassifier model);
    int predict(const TaskConstraintSet& task, const CovvVector& encoded,
                const NodeInventory& inventory) const override;

private:
    TwoLayerClassifier model_;
};

/// Perfect predictions by exhaustive suitability count.
class OracleClassifier final : public TaskClassifier {
public:
    explicit OracleClassifier(GroupingConfig grouping = {}) : grouping_(grouping) {}
    int predict(const TaskConstraintSet& task, const CovvVector& encoded,
                const NodeInventory& inventory) const override;

private:
    GroupingConfig grouping_;
};

/// Classifier swap requested at `tick`; it answers from
/// tick + retrain_delay_ticks onwards.
struct ClassifierUpdate {
    std::int64_t tick = 0;
    std::shared_ptr<const TaskClassifier> classifier;
};

struct LatencySample {
    std::uint64_t task_id = 0;
    int true_group = GroupLabel::kUnschedulable;
    std::optional<int> predicted_group;  // none under Fifo
    std::int64_t submit_tick = 0;
    std::int64_t placement_tick = 0;

    std::int64_t latency() const { return placement_tick - submit_tick; }
};

struct LatencyStats {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double p95 = 0.0;  // nearest rank
};

LatencyStats latency_stats(std::vector<std::int64_t> latencies);

/// State after dispatch in one processed tick. Idle stretches are skipped.
struct QueueSample {
    std::int64_t tick = 0;
    std::size_t high_priority = 0;
    std::size_t main = 0;
    std::size_t running = 0;
    std::size_t submitted = 0;
    std::size_t placed = 0;
    std::size_t unplaced = 0;
};

struct SimResult {
    SchedulerPolicy policy = SchedulerPolicy::Fifo;
    std::vector<LatencySample> samples;  // in placement order
    std::map<int, LatencyStats> by_group;
    LatencyStats overall;
    std::size_t submitted = 0;
    std::size_t placed = 0;
    std::size_t unplaced = 0;
    std::vector<QueueSample> queue_trace;
};

/// Tick loop: release finished tasks, apply due classifier updates, apply the
/// tick's events (tasks are labeled by the oracle and, under CoAnalyzer,
/// classified and routed), then dispatch. Under CoAnalyzer a non-empty
/// high-priority queue is the only one served that tick. Each queue is
/// scanned in arrival order; a task with a suitable node but no free slot is
/// skipped, a task with no suitable node at all is dropped as unplaced. Both
/// consume dispatch budget. Placement picks the lowest NodeId with a free
/// slot. Runs until the trace is exhausted and both queues are empty.
/// Throws std::invalid_argument when CoAnalyzer has no classifier.
SimResult simulate(std::span<const TraceEvent> events, std::shared_ptr<const TaskClassifier> classifier,
                   const SchedulerConfig& config, std::span<const ClassifierUpdate> updates = {});

std::string format_sim_result(const SimResult& result);
std::string format_queue_trace_csv(const SimResult& result);

}  // namespace growsched

#endif  // GROWSCHED_SCHEDSIM_HPP
