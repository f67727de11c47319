#include "growsched/schedsim.hpp"

#include <algorithm>
#include <cmath>
#include <list>
#include <numeric>
#include <queue>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace growsched {

std::string_view to_string(SchedulerPolicy policy) {
    return policy == SchedulerPolicy::Fifo ? "fifo" : "co-analyzer";
}

SchedulerPolicy parse_policy(std::string_view text) {
    if (text == "fifo") return SchedulerPolicy::Fifo;
    if (text == "co-analyzer") return SchedulerPolicy::CoAnalyzer;
    throw std::invalid_argument("unknown policy '" + std::string(text) + "' (expected fifo or co-analyzer)");
}

void SchedulerConfig::validate() const {
    if (dispatch_rate == 0) throw std::invalid_argument("dispatch_rate must be >= 1");
    if (slots_per_node == 0) throw std::invalid_argument("slots_per_node must be >= 1");
    if (tick_us <= 0) throw std::invalid_argument("tick_us must be positive");
    if (grouping.increment == 0) throw std::invalid_argument("grouping increment must be >= 1");
}

ModelClassifier::ModelClassifier(TwoLayerClassifier model) : model_(std::move(model)) { model_.validate(); }

int ModelClassifier::predict(const TaskConstraintSet&, const CovvVector& encoded, const NodeInventory&) const {
    const std::size_t width = model_.features_count();
    if (encoded.size() > width) {
        throw std::invalid_argument("task vector has " + std::to_string(encoded.size()) +
                                    " features but the model expects " + std::to_string(width));
    }
    std::vector<double> x(width, 0.0);
    const auto bits = encoded.bits();
    std::copy(bits.begin(), bits.end(), x.begin());
    const auto logits = forward(model_, x);
    return argmax(logits);
}

int OracleClassifier::predict(const TaskConstraintSet& task, const CovvVector&, const NodeInventory& inventory) const {
    return group_label(count_suitable(inventory, task), grouping_).group;
}

LatencyStats latency_stats(std::vector<std::int64_t> latencies) {
    LatencyStats stats;
    stats.count = latencies.size();
    if (latencies.empty()) return stats;
    std::sort(latencies.begin(), latencies.end());
    const double total = std::accumulate(latencies.begin(), latencies.end(), 0.0,
                                         [](double acc, std::int64_t v) { return acc + static_cast<double>(v); });
    const std::size_t n = latencies.size();
    stats.mean = total / static_cast<double>(n);
    stats.median = n % 2 == 1 ? static_cast<double>(latencies[n / 2])
                              : 0.5 * static_cast<double>(latencies[n / 2 - 1] + latencies[n / 2]);
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
    stats.p95 = static_cast<double>(latencies[std::max<std::size_t>(rank, 1) - 1]);
    return stats;
}

namespace {

struct Pending {
    TaskConstraintSet task;
    std::int64_t duration_ticks = 1;
    LatencySample sample;
};

struct Running {
    std::int64_t end_tick;
    NodeId node;
    bool operator>(const Running& other) const {
        return end_tick != other.end_tick ? end_tick > other.end_tick : node > other.node;
    }
};

class Simulator {
public:
    Simulator(const SchedulerConfig& config, std::shared_ptr<const TaskClassifier> classifier)
        : config_(config), classifier_(std::move(classifier)) {}

    SimResult run(std::span<const TraceEvent> events, std::span<const ClassifierUpdate> updates) {
        std::vector<ClassifierUpdate> due(updates.begin(), updates.end());
        std::stable_sort(due.begin(), due.end(), [](const auto& a, const auto& b) { return a.tick < b.tick; });
        std::size_t next_update = 0;
        std::size_t next_event = 0;
        result_.policy = config_.policy;

        std::int64_t tick = events.empty() ? 0 : tick_of(events.front().time_us);
        while (next_event < events.size() || !high_.empty() || !main_.empty()) {
            release(tick);
            while (next_update < due.size() &&
                   due[next_update].tick + static_cast<std::int64_t>(config_.retrain_delay_ticks) <= tick) {
                if (due[next_update].classifier) classifier_ = due[next_update].classifier;
                ++next_update;
            }
            while (next_event < events.size() && tick_of(events[next_event].time_us) <= tick) {
                apply(events[next_event], tick);
                ++next_event;
            }
            dispatch(tick);
            result_.queue_trace.push_back({tick, high_.size(), main_.size(), running_.size(), result_.submitted,
                                           result_.placed, result_.unplaced});

            if (!high_.empty() || !main_.empty()) {
                if (running_.empty() && next_event == events.size() && !progressed_) {
                    // Nothing can ever free a slot for these tasks.
                    result_.unplaced += high_.size() + main_.size();
                    high_.clear();
                    main_.clear();
                    break;
                }
                if (running_.empty() && !progressed_) {
                    tick = std::max(tick + 1, tick_of(events[next_event].time_us));
                } else {
                    ++tick;
                }
            } else if (next_event < events.size()) {
                tick = std::max(tick + 1, tick_of(events[next_event].time_us));
            }
        }
        finalize();
        return std::move(result_);
    }

private:
    std::int64_t tick_of(std::int64_t time_us) const { return time_us / config_.tick_us; }

    void release(std::int64_t tick) {
        while (!running_.empty() && running_.top().end_tick <= tick) {
            --used_[running_.top().node];
            running_.pop();
        }
    }

    void apply(const TraceEvent& event, std::int64_t tick) {
        if (const auto* machine = std::get_if<MachineAttributeEvent>(&event.body)) {
            apply_machine_event(inventory_, registry_, *machine);
            return;
        }
        const auto& submit = std::get<TaskSubmitEvent>(event.body);
        Pending pending;
        pending.task = submit.task;
        pending.duration_ticks = std::max<std::int64_t>(1, (submit.duration_us + config_.tick_us - 1) / config_.tick_us);
        pending.sample.task_id = submit.task.task_id;
        pending.sample.submit_tick = tick;
        pending.sample.true_group = group_label(count_suitable(inventory_, submit.task), config_.grouping).group;
        const CovvVector encoded = encode_task(submit.task, registry_);
        ++result_.submitted;

        bool high = false;
        if (config_.policy == SchedulerPolicy::CoAnalyzer) {
            const int predicted = classifier_->predict(submit.task, encoded, inventory_);
            pending.sample.predicted_group = predicted;
            high = predicted >= 0 && predicted <= config_.priority_threshold;
        }
        (high ? high_ : main_).push_back(std::move(pending));
    }

    std::optional<NodeId> free_suitable_node(const TaskConstraintSet& task, bool& any_suitable) const {
        any_suitable = false;
        for (const auto& [node, attributes] : inventory_.nodes()) {
            if (!node_satisfies(attributes, task)) continue;
            any_suitable = true;
            const auto it = used_.find(node);
            if (it == used_.end() || it->second < config_.slots_per_node) return node;
        }
        return std::nullopt;
    }

    void dispatch(std::int64_t tick) {
        progressed_ = false;
        auto& queue = (config_.policy == SchedulerPolicy::CoAnalyzer && !high_.empty()) ? high_ : main_;
        std::size_t budget = config_.dispatch_rate;
        for (auto it = queue.begin(); it != queue.end() && budget > 0;) {
            bool any_suitable = false;
            const auto node = free_suitable_node(it->task, any_suitable);
            if (!any_suitable) {
                ++result_.unplaced;
                --budget;
                progressed_ = true;
                it = queue.erase(it);
                continue;
            }
            if (!node) {
                ++it;
                continue;
            }
            --budget;
            progressed_ = true;
            ++used_[*node];
            running_.push({tick + it->duration_ticks, *node});
            it->sample.placement_tick = tick;
            result_.samples.push_back(it->sample);
            ++result_.placed;
            it = queue.erase(it);
        }
    }

    void finalize() {
        std::map<int, std::vector<std::int64_t>> per_group;
        std::vector<std::int64_t> all;
        for (const auto& s : result_.samples) {
            per_group[s.true_group].push_back(s.latency());
            all.push_back(s.latency());
        }
        for (auto& [group, values] : per_group) result_.by_group[group] = latency_stats(std::move(values));
        result_.overall = latency_stats(std::move(all));
    }

    SchedulerConfig config_;
    std::shared_ptr<const TaskClassifier> classifier_;
    NodeInventory inventory_;
    FeatureRegistry registry_;
    std::list<Pending> high_;
    std::list<Pending> main_;
    std::map<NodeId, std::size_t> used_;
    std::priority_queue<Running, std::vector<Running>, std::greater<>> running_;
    bool progressed_ = false;
    SimResult result_;
};

nlohmann::ordered_json stats_json(const LatencyStats& s) {
    return {{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"p95", s.p95}};
}

}  // namespace

SimResult simulate(std::span<const TraceEvent> events, std::shared_ptr<const TaskClassifier> classifier,
                   const SchedulerConfig& config, std::span<const ClassifierUpdate> updates) {
    config.validate();
    if (config.policy == SchedulerPolicy::CoAnalyzer && !classifier) {
        throw std::invalid_argument("co-analyzer policy requires a classifier");
    }
    return Simulator(config, std::move(classifier)).run(events, updates);
}

std::string format_sim_result(const SimResult& result) {
    nlohmann::ordered_json doc;
    doc["policy"] = std::string(to_string(result.policy));
    doc["submitted"] = result.submitted;
    doc["placed"] = result.placed;
    doc["unplaced"] = result.unplaced;
    doc["overall"] = stats_json(result.overall);
    nlohmann::ordered_json groups = nlohmann::ordered_json::object();
    for (const auto& [group, stats] : result.by_group) groups[std::to_string(group)] = stats_json(stats);
    doc["by_true_group"] = std::move(groups);
    return doc.dump(2) + '\n';
}

std::string format_queue_trace_csv(const SimResult& result) {
    std::string out = "tick,high_priority,main,running,submitted,placed,unplaced\n";
    for (const auto& q : result.queue_trace) {
        out += std::to_string(q.tick) + ',' + std::to_string(q.high_priority) + ',' + std::to_string(q.main) + ',' +
               std::to_string(q.running) + ',' + std::to_string(q.submitted) + ',' + std::to_string(q.placed) + ',' +
               std::to_string(q.unplaced) + '\n';
    }
    return out;
}

}  // namespace growsched
