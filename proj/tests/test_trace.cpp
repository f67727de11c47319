#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "growsched/trace.hpp"
#include "test_support.hpp"

namespace growsched {
namespace {

using Op = ConstraintOperator;

SyntheticTraceConfig small_config(std::uint64_t seed) {
    SyntheticTraceConfig cfg;
    cfg.node_count = 60;
    cfg.task_count = 2000;
    cfg.span_us = 1'000'000'000;
    cfg.growth_schedule = even_growth_schedule(4, 3, cfg.span_us);
    cfg.seed = seed;
    return cfg;
}

std::string parse_error_of(const std::string& text) {
    std::istringstream in(text);
    try {
        parse_events(in);
    } catch (const TraceParseError& e) {
        return e.what();
    }
    return {};
}

TEST(Parse, ThreeLinesInOrder) {
    std::istringstream in(
        R"({"t":0,"kind":"machine","node":1,"attr":"AM","val":"5"})"
        "\n\n"
        R"({"t":3,"kind":"task","id":9,"dur":100,"cons":[{"attr":"AM","op":"GE","operands":["5"]}]})"
        "\n"
        R"({"t":3,"kind":"machine","node":1,"attr":"AM","val":null})"
        "\n");
    const auto events = parse_events(in);
    ASSERT_EQ(events.size(), 3u);
    const auto& m = std::get<MachineAttributeEvent>(events[0].body);
    EXPECT_EQ(m.value, std::optional<std::string>("5"));
    const auto& t = std::get<TaskSubmitEvent>(events[1].body);
    EXPECT_EQ(t.task.task_id, 9u);
    EXPECT_EQ(t.duration_us, 100);
    ASSERT_EQ(t.task.constraints.size(), 1u);
    EXPECT_EQ(t.task.constraints[0].op, Op::GreaterOrEqual);
    EXPECT_FALSE(std::get<MachineAttributeEvent>(events[2].body).value.has_value());
}

TEST(Parse, UnknownOperatorNamesLineAndToken) {
    const auto msg = parse_error_of(
        R"({"t":0,"kind":"machine","node":1,"attr":"AM","val":"5"})"
        "\n"
        R"({"t":1,"kind":"task","id":1,"dur":1,"cons":[{"attr":"AM","op":"EQUALS","operands":["5"]}]})"
        "\n");
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("EQUALS"), std::string::npos) << msg;
}

TEST(Parse, MalformedJsonAndTimeRegressionAreReported) {
    EXPECT_NE(parse_error_of("{\"t\":0,\n").find("line 1"), std::string::npos);
    const auto msg = parse_error_of(
        R"({"t":5,"kind":"machine","node":1,"attr":"AM","val":"5"})"
        "\n"
        R"({"t":4,"kind":"machine","node":1,"attr":"AM","val":"6"})"
        "\n");
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("regression"), std::string::npos) << msg;
    EXPECT_NE(parse_error_of(R"({"t":0,"kind":"task","id":1,"cons":[]})"), "");
}

TEST(Generate, RoundTripsThroughTheCodec) {
    const auto events = generate_events(small_config(3));
    std::istringstream in(generate_trace(small_config(3)));
    EXPECT_EQ(parse_events(in), events);
}

TEST(Generate, DeterministicPerSeed) {
    EXPECT_EQ(generate_trace(small_config(5)), generate_trace(small_config(5)));
    EXPECT_NE(generate_trace(small_config(5)), generate_trace(small_config(6)));
}

TEST(Generate, BootstrapPrecedesTasksAndTimeIsMonotone) {
    const auto events = generate_events(small_config(1));
    bool seen_task = false;
    std::int64_t last = 0;
    for (const auto& e : events) {
        EXPECT_GE(e.time_us, last);
        last = e.time_us;
        if (e.is_task()) seen_task = true;
        if (!seen_task) {
            EXPECT_EQ(e.time_us, 0);
        }
    }
    EXPECT_TRUE(seen_task);
}

TEST(Generate, RejectsOversizedInjection) {
    auto cfg = small_config(1);
    cfg.growth_schedule = {{10, cfg.attribute_count * cfg.values_per_attribute + 1}};
    EXPECT_THROW(generate_events(cfg), std::invalid_argument);
}

TEST(Generate, ConstrainedShareNearTarget) {
    SyntheticTraceConfig cfg;
    cfg.task_count = 10000;
    cfg.constrained_fraction = 0.40;
    cfg.seed = 21;
    std::size_t tasks = 0;
    std::size_t constrained = 0;
    for (const auto& e : generate_events(cfg)) {
        if (const auto* t = std::get_if<TaskSubmitEvent>(&e.body)) {
            ++tasks;
            constrained += t->task.constraints.empty() ? 0 : 1;
        }
    }
    ASSERT_EQ(tasks, 10000u);
    EXPECT_NEAR(static_cast<double>(constrained) / 10000.0, 0.40, 0.02);
}

TEST(Generate, RestrictiveRateMatchesOracleCount) {
    SyntheticTraceConfig cfg;
    cfg.task_count = 20000;
    cfg.restrictive_rate = 15;
    cfg.growth_schedule = even_growth_schedule(20, 3, cfg.span_us);
    cfg.seed = 4;
    NodeInventory inv;
    FeatureRegistry reg;
    std::size_t group0 = 0;
    for (const auto& e : generate_events(cfg)) {
        if (const auto* m = std::get_if<MachineAttributeEvent>(&e.body)) {
            apply_machine_event(inv, reg, *m);
        } else {
            const auto& t = std::get<TaskSubmitEvent>(e.body).task;
            if (testing_support::reference_count(inv, t) == 1) ++group0;
        }
    }
    EXPECT_NEAR(static_cast<double>(group0), 30.0, 12.0);
}

TEST(Generate, EachInjectionAddsExactlyItsValues) {
    auto cfg = small_config(8);
    NodeInventory inv;
    FeatureRegistry reg;
    std::int64_t batch_time = -1;
    std::size_t before = 0;
    std::vector<std::size_t> growth;
    for (const auto& e : generate_events(cfg)) {
        const auto* m = std::get_if<MachineAttributeEvent>(&e.body);
        if (!m) continue;
        if (e.time_us != batch_time) {
            if (batch_time > 0) growth.push_back(reg.size() - before);
            batch_time = e.time_us;
            before = reg.size();
        }
        apply_machine_event(inv, reg, *m);
    }
    growth.push_back(reg.size() - before);
    EXPECT_EQ(growth, (std::vector<std::size_t>{3, 3, 3, 3}));
}

TEST(Snapshot, EmptyWindowGivesEmptySnapshot) {
    FeatureRegistry reg;
    NodeInventory inv;
    const auto built = build_snapshot({}, reg, inv, GroupingConfig{}, 5);
    EXPECT_TRUE(built.snapshot.empty());
    EXPECT_EQ(built.dropped_unschedulable, 0u);
}

TEST(Snapshot, UnconstrainedWindowIsAllZeroWithNodeCountLabel) {
    FeatureRegistry reg;
    NodeInventory inv;
    for (NodeId n = 0; n < 30; ++n) apply_machine_event(inv, reg, {n, "AM", std::to_string(n % 4)});
    const std::vector<TaskConstraintSet> tasks{{1, {}}, {2, {}}, {3, {}}};
    const auto built = build_snapshot(tasks, reg, inv, GroupingConfig{20}, 5);
    ASSERT_EQ(built.snapshot.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(built.snapshot.x[i].count(), 0u);
        EXPECT_EQ(built.snapshot.x[i].size(), reg.size());
        EXPECT_EQ(built.snapshot.y[i], testing_support::reference_group(30, 20));
    }
}

TEST(Snapshot, EngineeredSingleNodeTaskIsTheOnlyGroupZero) {
    FeatureRegistry reg;
    NodeInventory inv;
    for (NodeId n = 0; n < 30; ++n) {
        apply_machine_event(inv, reg, {n, kHostAttribute, std::to_string(n)});
        apply_machine_event(inv, reg, {n, "AM", std::to_string(n % 3)});
    }
    const std::vector<TaskConstraintSet> tasks{
        {1, {{"AM", Op::Equal, {"1"}}}},
        {2, {{kHostAttribute, Op::Equal, {"17"}}}},
        {3, {{"AM", Op::Equal, {"9"}}}},  // unschedulable
        {4, {}}};
    const auto built = build_snapshot(tasks, reg, inv, GroupingConfig{5}, 5);
    EXPECT_EQ(built.dropped_unschedulable, 1u);
    ASSERT_EQ(built.snapshot.size(), 3u);
    EXPECT_EQ(std::count(built.snapshot.y.begin(), built.snapshot.y.end(), 0), 1);
    EXPECT_EQ(built.snapshot.y[1], 0);
    // The operand "9" was registered while encoding, so every row is aligned
    // to the grown registry.
    for (const auto& row : built.snapshot.x) EXPECT_EQ(row.size(), reg.size());
    EXPECT_NO_THROW(built.snapshot.validate());
}

TEST(Snapshot, JsonRoundTrip) {
    FeatureRegistry reg;
    NodeInventory inv;
    for (NodeId n = 0; n < 10; ++n) apply_machine_event(inv, reg, {n, "AM", std::to_string(n)});
    const std::vector<TaskConstraintSet> tasks{{1, {{"AM", Op::GreaterOrEqual, {"5"}}}}, {2, {}}};
    const auto snap = build_snapshot(tasks, reg, inv, GroupingConfig{2}, 77).snapshot;
    std::stringstream buf;
    write_snapshot(snap, buf);
    const auto back = read_snapshot(buf);
    EXPECT_EQ(back.features_count, snap.features_count);
    EXPECT_EQ(back.step_time_us, 77);
    EXPECT_EQ(back.x, snap.x);
    EXPECT_EQ(back.y, snap.y);
}

TEST(Snapshot, ValidateRejectsRaggedRows) {
    DatasetSnapshot s;
    s.features_count = 3;
    s.x = {CovvVector(3), CovvVector(2)};
    s.y = {1, 1};
    EXPECT_THROW(s.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace growsched
