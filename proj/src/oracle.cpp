#include "growsched/oracle.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace growsched {

void NodeInventory::set(NodeId node, const AttributeKey& attribute, std::string value) {
    nodes_[node].insert_or_assign(attribute, std::move(value));
}

void NodeInventory::remove(NodeId node, const AttributeKey& attribute) {
    auto it = nodes_.find(node);
    if (it == nodes_.end()) return;
    if (auto attr = it->second.find(attribute); attr != it->second.end()) it->second.erase(attr);
}

AttributeValue NodeInventory::lookup(NodeId node, const AttributeKey& attribute) const {
    auto it = nodes_.find(node);
    if (it == nodes_.end()) return AttributeValue::unset();
    auto attr = it->second.find(attribute);
    if (attr == it->second.end()) return AttributeValue::unset();
    return AttributeValue{attr->second};
}

void apply_machine_event(NodeInventory& inventory, FeatureRegistry& registry, const MachineAttributeEvent& event) {
    if (!event.value) {
        inventory.remove(event.node, event.attribute);
        return;
    }
    registry.register_observation(event.attribute, AttributeValue{*event.value});
    inventory.set(event.node, event.attribute, *event.value);
}

bool node_satisfies(const NodeAttributes& attributes, const TaskConstraintSet& task) {
    for (const auto& constraint : task.constraints) {
        auto it = attributes.find(constraint.attribute);
        const AttributeValue value = it == attributes.end() ? AttributeValue::unset() : AttributeValue{it->second};
        if (!value_satisfies(constraint, value)) return false;
    }
    return true;
}

std::size_t count_suitable(const NodeInventory& inventory, const TaskConstraintSet& task) {
    if (task.constraints.empty()) return inventory.node_count();
    std::size_t count = 0;
    for (const auto& [node, attributes] : inventory.nodes()) {
        if (node_satisfies(attributes, task)) ++count;
    }
    return count;
}

GroupLabel group_label(std::size_t suitable_count, const GroupingConfig& config) {
    if (config.increment == 0) throw std::invalid_argument("grouping increment must be >= 1");
    if (suitable_count == 0) return GroupLabel{GroupLabel::kUnschedulable};
    if (suitable_count == 1) return GroupLabel{0};
    const std::size_t bucket = (suitable_count + config.increment - 1) / config.increment;
    return GroupLabel{static_cast<int>(std::min<std::size_t>(bucket, kMaxGroup))};
}

void write_inventory_jsonl(const NodeInventory& inventory, std::ostream& out) {
    for (const auto& [node, attributes] : inventory.nodes()) {
        for (const auto& [attribute, value] : attributes) {
            nlohmann::ordered_json line;
            line["node"] = node;
            line["attr"] = attribute;
            line["val"] = value;
            out << line.dump() << '\n';
        }
    }
}

NodeInventory read_inventory_jsonl(std::istream& in) {
    NodeInventory inventory;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            inventory.set(j.at("node").get<NodeId>(), j.at("attr").get<std::string>(), j.at("val").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("inventory line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return inventory;
}

}  // namespace growsched
