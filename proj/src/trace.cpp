#include "growsched/trace.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "growsched/random.hpp"

namespace growsched {

using nlohmann::json;
using nlohmann::ordered_json;

TraceParseError::TraceParseError(std::size_t line, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

namespace {

template <typename T>
T require(const json& object, const char* key, std::size_t line) {
    auto it = object.find(key);
    if (it == object.end()) throw TraceParseError(line, std::string("missing key '") + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw TraceParseError(line, std::string("bad type for key '") + key + "'");
    }
}

Constraint parse_constraint(const json& object, std::size_t line) {
    if (!object.is_object()) throw TraceParseError(line, "constraint must be an object");
    Constraint c;
    c.attribute = require<std::string>(object, "attr", line);
    const auto op_token = require<std::string>(object, "op", line);
    auto op = parse_operator(op_token);
    if (!op) throw TraceParseError(line, "unknown operator '" + op_token + "'");
    c.op = *op;
    if (auto it = object.find("operands"); it != object.end()) {
        c.operands = require<std::vector<std::string>>(object, "operands", line);
    }
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw TraceParseError(line, e.what());
    }
    return c;
}

TraceEvent parse_line(const std::string& text, std::size_t line) {
    json object;
    try {
        object = json::parse(text);
    } catch (const json::parse_error& e) {
        throw TraceParseError(line, std::string("malformed JSON: ") + e.what());
    }
    if (!object.is_object()) throw TraceParseError(line, "event must be a JSON object");

    TraceEvent event;
    event.time_us = require<std::int64_t>(object, "t", line);
    const auto kind = require<std::string>(object, "kind", line);
    if (kind == "machine") {
        MachineAttributeEvent body;
        body.node = require<NodeId>(object, "node", line);
        body.attribute = require<std::string>(object, "attr", line);
        if (!is_valid_attribute_key(body.attribute)) throw TraceParseError(line, "invalid attribute key");
        auto val = object.find("val");
        if (val == object.end()) throw TraceParseError(line, "missing key 'val'");
        if (!val->is_null()) body.value = require<std::string>(object, "val", line);
        event.body = std::move(body);
    } else if (kind == "task") {
        TaskSubmitEvent body;
        body.task.task_id = require<std::uint64_t>(object, "id", line);
        body.duration_us = require<std::int64_t>(object, "dur", line);
        if (body.duration_us < 0) throw TraceParseError(line, "negative duration");
        auto cons = object.find("cons");
        if (cons == object.end() || !cons->is_array()) throw TraceParseError(line, "missing array 'cons'");
        for (const auto& c : *cons) body.task.constraints.push_back(parse_constraint(c, line));
        event.body = std::move(body);
    } else {
        throw TraceParseError(line, "unknown event kind '" + kind + "'");
    }
    return event;
}

}  // namespace

std::vector<TraceEvent> parse_events(std::istream& in) {
    std::vector<TraceEvent> events;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        TraceEvent event = parse_line(text, line);
        if (!events.empty() && event.time_us < events.back().time_us) {
            throw TraceParseError(line, "time regression: " + std::to_string(event.time_us) + " < " +
                                            std::to_string(events.back().time_us));
        }
        events.push_back(std::move(event));
    }
    return events;
}

std::string format_event(const TraceEvent& event) {
    ordered_json out;
    out["t"] = event.time_us;
    if (const auto* m = std::get_if<MachineAttributeEvent>(&event.body)) {
        out["kind"] = "machine";
        out["node"] = m->node;
        out["attr"] = m->attribute;
        out["val"] = m->value ? ordered_json(*m->value) : ordered_json(nullptr);
    } else {
        const auto& t = std::get<TaskSubmitEvent>(event.body);
        out["kind"] = "task";
        out["id"] = t.task.task_id;
        out["dur"] = t.duration_us;
        ordered_json cons = ordered_json::array();
        for (const auto& c : t.task.constraints) {
            ordered_json item;
            item["attr"] = c.attribute;
            item["op"] = std::string(to_string(c.op));
            item["operands"] = c.operands;
            cons.push_back(std::move(item));
        }
        out["cons"] = std::move(cons);
    }
    return out.dump();
}

void write_events(std::span<const TraceEvent> events, std::ostream& out) {
    for (const auto& event : events) out << format_event(event) << '\n';
}

void SyntheticTraceConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("trace config: " + msg); };
    if (node_count == 0) fail("node_count must be positive");
    if (attribute_count == 0 || attribute_count > 26 * 26) fail("attribute_count must be in [1, 676]");
    if (values_per_attribute == 0) fail("values_per_attribute must be positive");
    if (task_count == 0) fail("task_count must be positive");
    if (!(constrained_fraction >= 0.0 && constrained_fraction <= 1.0)) fail("constrained_fraction must be in [0,1]");
    if (!(restrictive_rate >= 0.0) || restrictive_rate / 10000.0 > constrained_fraction) {
        fail("restrictive_rate must be >= 0 and not exceed the constrained share");
    }
    if (!(unset_fraction >= 0.0 && unset_fraction <= 1.0)) fail("unset_fraction must be in [0,1]");
    if (!(new_template_probability > 0.0 && new_template_probability <= 1.0)) {
        fail("new_template_probability must be in (0,1]");
    }
    if (!(mean_duration_us > 0.0)) fail("mean_duration_us must be positive");
    if (span_us <= 0) fail("span_us must be positive");
    for (const auto& g : growth_schedule) {
        if (g.count == 0) fail("growth injection count must be positive");
        if (g.count > attribute_count * values_per_attribute) {
            fail("growth injection of " + std::to_string(g.count) + " values exceeds " +
                 std::to_string(attribute_count * values_per_attribute) +
                 " (attribute_count x values_per_attribute) per step");
        }
        if (g.time_us <= 0 || g.time_us > span_us) fail("growth injection time outside (0, span]");
    }
}

std::vector<GrowthInjection> even_growth_schedule(std::size_t steps, std::size_t values_per_step, std::int64_t span_us) {
    std::vector<GrowthInjection> out;
    for (std::size_t j = 0; j < steps; ++j) {
        const auto t = static_cast<std::int64_t>(static_cast<double>(span_us) * static_cast<double>(j + 1) /
                                                 static_cast<double>(steps + 1));
        out.push_back({std::max<std::int64_t>(t, 1), values_per_step});
    }
    return out;
}

std::string synthetic_attribute_name(std::size_t index) {
    return {static_cast<char>('A' + index / 26 % 26), static_cast<char>('A' + index % 26)};
}

namespace {

constexpr std::size_t kMinValueHolders = 3;

struct PendingEvent {
    TraceEvent event;
    int order = 0;  // machine events precede tasks at equal times
    std::size_t seq = 0;
};

struct ValueLess {
    bool operator()(const std::string& l, const std::string& r) const { return compare_values(l, r) < 0; }
};

class TemplateFactory {
public:
    TemplateFactory(std::size_t attribute_count, Rng& rng) : attribute_count_(attribute_count), rng_(rng) {}

    void add_value(std::size_t attribute, const std::string& value) { values_[attribute].insert(value); }

    std::vector<Constraint> make() {
        const std::size_t n = (bernoulli(rng_, 0.75) || attribute_count_ < 2) ? 1 : 2;
        std::vector<Constraint> out;
        std::set<std::size_t> used;
        while (out.size() < n) {
            const std::size_t a = uniform_index(rng_, attribute_count_);
            if (!used.insert(a).second || values_[a].empty()) continue;
            // The second constraint of a pair stays loose so pairs rarely
            // collapse to a handful of nodes.
            out.push_back(out.empty() ? make_one(a) : make_loose(a));
        }
        return out;
    }

private:
    std::string pick(std::size_t a) {
        const auto& pool = values_.at(a);
        auto it = pool.begin();
        std::advance(it, static_cast<long>(uniform_index(rng_, pool.size())));
        return *it;
    }

    std::vector<std::string> pick_set(std::size_t a, std::size_t k) {
        std::set<std::string> chosen;
        const std::size_t limit = std::min(k, values_.at(a).size());
        while (chosen.size() < limit) chosen.insert(pick(a));
        return {chosen.begin(), chosen.end()};
    }

    Constraint make_one(std::size_t a) {
        static const std::vector<double> weights{0.15, 0.2, 0.05, 0.1, 0.05, 0.15, 0.1, 0.1, 0.05, 0.05};
        static const std::vector<ConstraintOperator> ops{
            ConstraintOperator::Equal,       ConstraintOperator::NotEqual,  ConstraintOperator::LessThan,
            ConstraintOperator::LessOrEqual, ConstraintOperator::GreaterThan, ConstraintOperator::GreaterOrEqual,
            ConstraintOperator::InSet,       ConstraintOperator::NotInSet,  ConstraintOperator::Present,
            ConstraintOperator::Absent};
        Constraint c{synthetic_attribute_name(a), ops[weighted_index(rng_, weights)], {}};
        switch (c.op) {
            case ConstraintOperator::Present:
            case ConstraintOperator::Absent:
                break;
            case ConstraintOperator::InSet:
            case ConstraintOperator::NotInSet:
                c.operands = pick_set(a, 2 + uniform_index(rng_, 2));
                break;
            default:
                c.operands = {pick(a)};
        }
        return c;
    }

    Constraint make_loose(std::size_t a) {
        static const std::vector<double> weights{0.5, 0.3, 0.2};
        switch (weighted_index(rng_, weights)) {
            case 0:
                return {synthetic_attribute_name(a), ConstraintOperator::NotEqual, {pick(a)}};
            case 1:
                return {synthetic_attribute_name(a), ConstraintOperator::NotInSet, pick_set(a, 2)};
            default:
                return {synthetic_attribute_name(a), ConstraintOperator::Present, {}};
        }
    }

    std::size_t attribute_count_;
    Rng& rng_;
    std::map<std::size_t, std::set<std::string, ValueLess>> values_;
};

}  // namespace

std::vector<TraceEvent> generate_events(const SyntheticTraceConfig& config) {
    config.validate();
    Rng rng(mix_seed(config.seed, 0));
    std::vector<PendingEvent> pending;
    std::size_t seq = 0;
    auto push = [&](std::int64_t t, int order, decltype(TraceEvent::body) body) {
        pending.push_back({TraceEvent{t, std::move(body)}, order, seq++});
    };

    TemplateFactory templates(config.attribute_count, rng);

    // Skewed value popularity per attribute: weight (v+1)^-s.
    std::vector<std::vector<double>> popularity(config.attribute_count);
    for (auto& weights : popularity) {
        const double s = uniform_real(rng, 0.3, 1.2);
        for (std::size_t v = 0; v < config.values_per_attribute; ++v) {
            weights.push_back(std::pow(static_cast<double>(v + 1), -s));
        }
    }
    // Every value keeps at least kMinValueHolders nodes so that only the
    // unique host attribute yields single-node matches by construction.
    std::vector<std::vector<std::optional<std::size_t>>> assigned(
        config.node_count, std::vector<std::optional<std::size_t>>(config.attribute_count));
    std::vector<std::map<std::size_t, std::size_t>> holders(config.attribute_count);
    for (std::size_t a = 0; a < config.attribute_count; ++a) {
        std::vector<NodeId> order(config.node_count);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle_in_place(order, rng);
        std::size_t cursor = 0;
        for (std::size_t v = 0; v < config.values_per_attribute; ++v) {
            for (std::size_t k = 0; k < kMinValueHolders && cursor < order.size(); ++k) {
                assigned[order[cursor++]][a] = v;
                ++holders[a][v];
            }
        }
        for (; cursor < order.size(); ++cursor) {
            if (bernoulli(rng, config.unset_fraction)) continue;
            const std::size_t v = weighted_index(rng, popularity[a]);
            assigned[order[cursor]][a] = v;
            ++holders[a][v];
        }
    }
    for (std::size_t node = 0; node < config.node_count; ++node) {
        push(0, 0, MachineAttributeEvent{node, kHostAttribute, std::to_string(node)});
        for (std::size_t a = 0; a < config.attribute_count; ++a) {
            if (!assigned[node][a]) continue;
            const std::string value = std::to_string(*assigned[node][a]);
            push(0, 0, MachineAttributeEvent{node, synthetic_attribute_name(a), value});
            templates.add_value(a, value);
        }
    }

    // Growth injections: each new value lands on a small random node subset.
    auto schedule = config.growth_schedule;
    std::stable_sort(schedule.begin(), schedule.end(),
                     [](const auto& l, const auto& r) { return l.time_us < r.time_us; });
    std::vector<std::size_t> next_value(config.attribute_count, config.values_per_attribute);
    std::size_t injected = 0;
    struct Release {
        std::int64_t time_us;
        std::size_t attribute;
        std::string value;
    };
    std::vector<Release> releases;
    for (const auto& growth : schedule) {
        for (std::size_t k = 0; k < growth.count; ++k) {
            const std::size_t a = injected++ % config.attribute_count;
            const std::size_t v = next_value[a]++;
            const std::string value = std::to_string(v);
            const std::size_t hosts =
                kMinValueHolders + uniform_index(rng, std::max<std::size_t>(1, config.node_count / 25));
            std::vector<NodeId> candidates(config.node_count);
            for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
            shuffle_in_place(candidates, rng);
            // Overwrites never take an existing value below the holder floor.
            std::vector<NodeId> nodes;
            for (NodeId node : candidates) {
                if (nodes.size() == hosts) break;
                const auto& current = assigned[node][a];
                if (current && holders[a][*current] <= kMinValueHolders) continue;
                if (current) --holders[a][*current];
                assigned[node][a] = v;
                ++holders[a][v];
                nodes.push_back(node);
            }
            std::sort(nodes.begin(), nodes.end());
            for (NodeId node : nodes) {
                push(growth.time_us, 0, MachineAttributeEvent{node, synthetic_attribute_name(a), value});
            }
            releases.push_back({growth.time_us, a, value});
        }
    }

    // Task arrivals: stratified uniform times over (0, span].
    const double restrictive_p = config.restrictive_rate / 10000.0;
    const double loose_p = config.constrained_fraction - restrictive_p;
    std::vector<std::vector<Constraint>> pool;
    std::size_t release_cursor = 0;
    for (std::size_t i = 0; i < config.task_count; ++i) {
        const double slot = (static_cast<double>(i) + uniform01(rng)) / static_cast<double>(config.task_count);
        const auto t = std::max<std::int64_t>(1, static_cast<std::int64_t>(slot * static_cast<double>(config.span_us)));
        while (release_cursor < releases.size() && releases[release_cursor].time_us <= t) {
            templates.add_value(releases[release_cursor].attribute, releases[release_cursor].value);
            ++release_cursor;
        }

        TaskSubmitEvent task;
        task.task.task_id = i + 1;
        task.duration_us = std::max<std::int64_t>(1, static_cast<std::int64_t>(exponential(rng, config.mean_duration_us)));
        const double draw = uniform01(rng);
        if (draw < restrictive_p) {
            const auto node = uniform_index(rng, config.node_count);
            task.task.constraints.push_back({kHostAttribute, ConstraintOperator::Equal, {std::to_string(node)}});
        } else if (draw < restrictive_p + loose_p) {
            if (pool.empty() || bernoulli(rng, config.new_template_probability)) {
                pool.push_back(templates.make());
                task.task.constraints = pool.back();
            } else {
                task.task.constraints = pool[uniform_index(rng, pool.size())];
            }
        }
        push(t, 1, std::move(task));
    }

    std::stable_sort(pending.begin(), pending.end(), [](const PendingEvent& l, const PendingEvent& r) {
        if (l.event.time_us != r.event.time_us) return l.event.time_us < r.event.time_us;
        if (l.order != r.order) return l.order < r.order;
        return l.seq < r.seq;
    });
    std::vector<TraceEvent> events;
    events.reserve(pending.size());
    for (auto& p : pending) events.push_back(std::move(p.event));
    return events;
}

std::string generate_trace(const SyntheticTraceConfig& config) {
    std::ostringstream out;
    const auto events = generate_events(config);
    write_events(events, out);
    return out.str();
}

std::vector<TraceEvent> generate_burst_events(const BurstTraceConfig& config) {
    if (config.node_count == 0 || config.burst_interval_us <= 0) {
        throw std::invalid_argument("burst trace: node_count and burst_interval_us must be positive");
    }
    Rng rng(mix_seed(config.seed, 1));
    std::vector<TraceEvent> events;
    for (NodeId node = 0; node < config.node_count; ++node) {
        events.push_back({0, MachineAttributeEvent{node, kHostAttribute, std::to_string(node)}});
    }
    std::uint64_t id = 1;
    for (std::size_t b = 0; b < config.bursts; ++b) {
        const std::int64_t t = static_cast<std::int64_t>(b + 1) * config.burst_interval_us;
        for (std::size_t i = 0; i < config.burst_size; ++i) {
            events.push_back({t, TaskSubmitEvent{{id++, {}}, config.duration_us}});
        }
        for (std::size_t i = 0; i < config.restrictive_per_burst; ++i) {
            const auto node = uniform_index(rng, config.node_count);
            TaskConstraintSet task{id++, {{kHostAttribute, ConstraintOperator::Equal, {std::to_string(node)}}}};
            events.push_back({t, TaskSubmitEvent{std::move(task), config.duration_us}});
        }
    }
    return events;
}

void DatasetSnapshot::validate() const {
    if (x.size() != y.size()) throw std::invalid_argument("snapshot: |X| != |y|");
    for (const auto& row : x) {
        if (row.size() != features_count) throw std::invalid_argument("snapshot: ragged row");
    }
    for (int label : y) {
        if (label < 0 || label > kMaxGroup) throw std::invalid_argument("snapshot: label out of range");
    }
}

DatasetSnapshot DatasetSnapshot::subset(std::span<const std::size_t> rows) const {
    DatasetSnapshot out;
    out.features_count = features_count;
    out.step_time_us = step_time_us;
    out.x.reserve(rows.size());
    out.y.reserve(rows.size());
    for (std::size_t r : rows) {
        out.x.push_back(x.at(r));
        out.y.push_back(y.at(r));
    }
    return out;
}

SnapshotBuild build_snapshot(std::span<const TaskConstraintSet> tasks, FeatureRegistry& registry,
                             const NodeInventory& inventory, const GroupingConfig& grouping,
                             std::int64_t step_time_us) {
    std::vector<CovvVector> encoded;
    encoded.reserve(tasks.size());
    for (const auto& task : tasks) encoded.push_back(encode_task(task, registry));

    SnapshotBuild out;
    out.snapshot.features_count = registry.size();
    out.snapshot.step_time_us = step_time_us;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const GroupLabel label = group_label(count_suitable(inventory, tasks[i]), grouping);
        if (!label.schedulable()) {
            ++out.dropped_unschedulable;
            continue;
        }
        out.snapshot.x.push_back(align(encoded[i], registry));
        out.snapshot.y.push_back(label.group);
    }
    if (out.dropped_unschedulable > 0) {
        spdlog::warn("snapshot at t={}: dropped {} unschedulable task(s)", step_time_us, out.dropped_unschedulable);
    }
    return out;
}

void write_snapshot(const DatasetSnapshot& snapshot, std::ostream& out) {
    ordered_json doc;
    doc["features_count"] = snapshot.features_count;
    doc["step_time"] = snapshot.step_time_us;
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
        ordered_json row;
        row["y"] = snapshot.y[i];
        row["ones"] = snapshot.x[i].ones();
        rows.push_back(std::move(row));
    }
    doc["rows"] = std::move(rows);
    out << doc.dump() << '\n';
}

DatasetSnapshot read_snapshot(std::istream& in) {
    DatasetSnapshot snapshot;
    try {
        const auto doc = json::parse(in);
        snapshot.features_count = doc.at("features_count").get<std::size_t>();
        snapshot.step_time_us = doc.at("step_time").get<std::int64_t>();
        for (const auto& row : doc.at("rows")) {
            CovvVector v(snapshot.features_count);
            for (std::size_t pos : row.at("ones").get<std::vector<std::size_t>>()) {
                if (pos >= snapshot.features_count) throw std::invalid_argument("snapshot: column out of range");
                v.set(pos);
            }
            snapshot.x.push_back(std::move(v));
            snapshot.y.push_back(row.at("y").get<int>());
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("snapshot: ") + e.what());
    }
    snapshot.validate();
    return snapshot;
}

}  // namespace growsched
