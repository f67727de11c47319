#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "growsched/oracle.hpp"
#include "test_support.hpp"

namespace growsched {
namespace {

using Op = ConstraintOperator;

NodeInventory am_inventory() {
    NodeInventory inv;
    for (NodeId n = 0; n < 10; ++n) inv.set(n, "AM", std::to_string(n));
    inv.set(10, "OTHER", "x");  // AM is UNSET here
    return inv;
}

TEST(Inventory, FirstEventCreatesNodeAndColumns) {
    NodeInventory inv;
    FeatureRegistry reg;
    apply_machine_event(inv, reg, {1, "AM", "5"});
    EXPECT_TRUE(inv.contains(1));
    EXPECT_EQ(inv.lookup(1, "AM").str(), "5");
    EXPECT_EQ(reg.size(), 2u);
}

TEST(Inventory, RemoveOfAbsentAttributeIsNoOp) {
    NodeInventory inv;
    FeatureRegistry reg;
    apply_machine_event(inv, reg, {1, "AM", "5"});
    const auto before = inv;
    apply_machine_event(inv, reg, {1, "XX", std::nullopt});
    apply_machine_event(inv, reg, {9, "AM", std::nullopt});
    EXPECT_EQ(inv, before);
    apply_machine_event(inv, reg, {1, "AM", std::nullopt});
    EXPECT_TRUE(inv.lookup(1, "AM").is_unset());
}

TEST(Inventory, NeverSeenValueGrowsRegistryByOne) {
    NodeInventory inv;
    FeatureRegistry reg;
    apply_machine_event(inv, reg, {1, "AM", "5"});
    apply_machine_event(inv, reg, {2, "AM", "5"});
    const auto before = reg.size();
    apply_machine_event(inv, reg, {3, "AM", "6"});
    EXPECT_EQ(reg.size(), before + 1);
}

TEST(NodeSatisfies, Examples) {
    EXPECT_TRUE(node_satisfies({}, {1, {}}));
    const TaskConstraintSet ge5{1, {{"AM", Op::GreaterOrEqual, {"5"}}}};
    EXPECT_TRUE(node_satisfies({{"AM", "7"}}, ge5));
    EXPECT_FALSE(node_satisfies({}, ge5));
    const TaskConstraintSet contradiction{1, {{"AM", Op::GreaterThan, {"3"}}, {"AM", Op::LessThan, {"2"}}}};
    for (int v = 0; v < 10; ++v) EXPECT_FALSE(node_satisfies({{"AM", std::to_string(v)}}, contradiction));
}

TEST(CountSuitable, Examples) {
    NodeInventory open;
    for (NodeId n = 0; n < 100; ++n) open.set(n, "HOST", std::to_string(n));
    EXPECT_EQ(count_suitable(open, {1, {}}), 100u);

    const auto inv = am_inventory();
    EXPECT_EQ(count_suitable(inv, {1, {{"AM", Op::GreaterOrEqual, {"5"}}}}), 5u);
    EXPECT_EQ(count_suitable(inv, {1, {{"AM", Op::GreaterThan, {"3"}}, {"AM", Op::LessThan, {"2"}}}}), 0u);
}

TEST(GroupLabel, Boundaries) {
    const GroupingConfig g500{500};
    EXPECT_EQ(group_label(0, g500).group, GroupLabel::kUnschedulable);
    EXPECT_FALSE(group_label(0, g500).schedulable());
    EXPECT_EQ(group_label(1, g500).group, 0);
    EXPECT_EQ(group_label(2, g500).group, 1);
    EXPECT_EQ(group_label(500, g500).group, 1);
    EXPECT_EQ(group_label(501, g500).group, 2);
    EXPECT_EQ(group_label(25 * 500, g500).group, 25);
    EXPECT_EQ(group_label(1'000'000, g500).group, 25);
    EXPECT_EQ(group_label(9525, GroupingConfig{360}).group, 25);
}

TEST(GroupLabel, MatchesIntegerReferenceEverywhere) {
    for (std::size_t inc : {1u, 7u, 40u, 360u, 500u}) {
        for (std::size_t c = 0; c < 20000; c += 1 + c / 50) {
            EXPECT_EQ(group_label(c, GroupingConfig{inc}).group, testing_support::reference_group(c, inc));
        }
    }
}

NodeInventory random_inventory(std::mt19937_64& rng, std::size_t nodes) {
    NodeInventory inv;
    for (NodeId n = 0; n < nodes; ++n) {
        inv.set(n, "HOST", std::to_string(n));
        for (const char* a : {"A", "B", "C"}) {
            if (rng() % 10 == 0) continue;
            inv.set(n, a, std::to_string(rng() % 8));
        }
    }
    return inv;
}

TaskConstraintSet random_task(std::mt19937_64& rng, std::uint64_t id) {
    static const char* attrs[] = {"A", "B", "C"};
    TaskConstraintSet t{id, {}};
    const int n = static_cast<int>(rng() % 4);
    for (int i = 0; i < n; ++i) t.constraints.push_back(testing_support::random_constraint(rng, attrs[rng() % 3], 9));
    if (rng() % 50 == 0) t.constraints.push_back({"HOST", Op::Equal, {std::to_string(rng() % 200)}});
    return t;
}

TEST(OracleProperty, LabelsAgreeWithBruteForceReference) {
    std::mt19937_64 rng(7);
    const auto inv = random_inventory(rng, 200);
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const auto task = random_task(rng, i);
        const auto count = count_suitable(inv, task);
        ASSERT_EQ(count, testing_support::reference_count(inv, task)) << "task " << i;
        ASSERT_EQ(group_label(count, GroupingConfig{20}).group, testing_support::reference_group(count, 20));
    }
}

TEST(OracleProperty, AddingAConstraintNeverIncreasesCount) {
    std::mt19937_64 rng(11);
    const auto inv = random_inventory(rng, 120);
    for (std::uint64_t i = 0; i < 500; ++i) {
        auto task = random_task(rng, i);
        const auto before = count_suitable(inv, task);
        task.constraints.push_back(testing_support::random_constraint(rng, "B", 9));
        EXPECT_LE(count_suitable(inv, task), before);
    }
}

TEST(InventoryJsonl, RoundTripsAndIsSorted) {
    std::mt19937_64 rng(3);
    const auto inv = random_inventory(rng, 30);
    std::stringstream buf;
    write_inventory_jsonl(inv, buf);
    const std::string text = buf.str();
    EXPECT_EQ(text.rfind(R"({"node":0,"attr":")", 0), 0u);
    std::istringstream in(text);
    EXPECT_EQ(read_inventory_jsonl(in), inv);
}

TEST(InventoryJsonl, MalformedLineNamesLineNumber) {
    std::istringstream in("{\"node\":1,\"attr\":\"A\",\"val\":\"1\"}\n{oops}\n");
    try {
        read_inventory_jsonl(in);
        FAIL() << "expected throw";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

}  // namespace
}  // namespace growsched
