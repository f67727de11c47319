#ifndef GROWSCHED_ORACLE_HPP
#define GROWSCHED_ORACLE_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "growsched/covv.hpp"

namespace growsched {

using NodeId = std::uint64_t;

/// Attributes set on one node. A missing key reads as UNSET.
using NodeAttributes = std::map<AttributeKey, std::string, std::less<>>;

/// Current machine -> attribute-values map; the labeling oracle's substrate.
class NodeInventory {
public:
    void set(NodeId node, const AttributeKey& attribute, std::string value);
    /// No-op when the node or attribute is absent.
    void remove(NodeId node, const AttributeKey& attribute);

    AttributeValue lookup(NodeId node, const AttributeKey& attribute) const;
    bool contains(NodeId node) const { return nodes_.contains(node); }
    std::size_t node_count() const { return nodes_.size(); }
    const std::map<NodeId, NodeAttributes>& nodes() const { return nodes_; }

    friend bool operator==(const NodeInventory&, const NodeInventory&) = default;

private:
    std::map<NodeId, NodeAttributes> nodes_;
};

struct MachineAttributeEvent {
    NodeId node = 0;
    AttributeKey attribute;
    std::optional<std::string> value;  // nullopt = REMOVE

    friend bool operator==(const MachineAttributeEvent&, const MachineAttributeEvent&) = default;
};

/// Applies a set/remove to the inventory and registers concrete values as
/// feature columns.
void apply_machine_event(NodeInventory& inventory, FeatureRegistry& registry, const MachineAttributeEvent& event);

bool node_satisfies(const NodeAttributes& attributes, const TaskConstraintSet& task);

/// Exhaustive scan over every node.
std::size_t count_suitable(const NodeInventory& inventory, const TaskConstraintSet& task);

struct GroupingConfig {
    std::size_t increment = 500;
};

inline constexpr int kGroupCount = 26;
inline constexpr int kMaxGroup = kGroupCount - 1;

/// Group 0..25, or Unschedulable when no node fits.
struct GroupLabel {
    static constexpr int kUnschedulable = -1;
    int group = kUnschedulable;

    bool schedulable() const { return group != kUnschedulable; }
    friend bool operator==(const GroupLabel&, const GroupLabel&) = default;
};

/// 0 nodes -> Unschedulable; 1 node -> group 0; else min(25, ceil(count / increment)).
GroupLabel group_label(std::size_t suitable_count, const GroupingConfig& config);

/// JSONL fixture format, one {"node","attr","val"} object per line, sorted by
/// node then attribute.
void write_inventory_jsonl(const NodeInventory& inventory, std::ostream& out);
NodeInventory read_inventory_jsonl(std::istream& in);

}  // namespace growsched

#endif  // GROWSCHED_ORACLE_HPP
