#ifndef GROWSCHED_COVV_HPP
#define GROWSCHED_COVV_HPP

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace growsched {

/// Name of a machine attribute, e.g. "AM". Case-sensitive, no whitespace.
using AttributeKey = std::string;

bool is_valid_attribute_key(std::string_view key);

/// A value held by a node for some attribute, or the per-attribute UNSET
/// sentinel meaning "attribute not set on this node".
class AttributeValue {
public:
    AttributeValue() = default;  // UNSET
    explicit AttributeValue(std::string value) : value_(std::move(value)) {}

    static AttributeValue unset() { return AttributeValue{}; }

    bool is_unset() const { return !value_.has_value(); }
    const std::string& str() const;  // precondition: !is_unset()

    friend bool operator==(const AttributeValue&, const AttributeValue&) = default;

private:
    std::optional<std::string> value_;
};

/// Orders two concrete values: integer order when both parse as decimal
/// integers, byte-lexicographic otherwise.
std::strong_ordering compare_values(std::string_view lhs, std::string_view rhs);

enum class ConstraintOperator {
    Equal,
    NotEqual,
    LessThan,
    LessOrEqual,
    GreaterThan,
    GreaterOrEqual,
    InSet,
    NotInSet,
    Present,
    Absent,
};

/// Wire names: EQ, NE, LT, LE, GT, GE, IN, NOT_IN, PRESENT, ABSENT.
std::string_view to_string(ConstraintOperator op);
std::optional<ConstraintOperator> parse_operator(std::string_view token);

struct Constraint {
    AttributeKey attribute;
    ConstraintOperator op = ConstraintOperator::Equal;
    std::vector<std::string> operands;

    /// Throws std::invalid_argument when the operand count does not fit the
    /// operator or the attribute key is malformed.
    void validate() const;

    friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// Conjunction of constraints attached to one task. Empty means unconstrained.
struct TaskConstraintSet {
    std::uint64_t task_id = 0;
    std::vector<Constraint> constraints;

    friend bool operator==(const TaskConstraintSet&, const TaskConstraintSet&) = default;
};

/// Append-only catalog of (attribute, value) columns. A column's position
/// never changes once assigned; each attribute's UNSET column is created the
/// first time the attribute is observed.
class FeatureRegistry {
public:
    struct Column {
        AttributeKey attribute;
        AttributeValue value;
    };

    std::size_t register_observation(const AttributeKey& attribute, const AttributeValue& value);

    std::optional<std::size_t> find(const AttributeKey& attribute, const AttributeValue& value) const;

    std::size_t size() const { return columns_.size(); }
    const Column& column(std::size_t index) const { return columns_.at(index); }
    const std::vector<Column>& columns() const { return columns_; }

    /// Positions of every column belonging to `attribute`, in insertion order.
    std::span<const std::size_t> columns_of(const AttributeKey& attribute) const;

private:
    static std::string index_key(const AttributeKey& attribute, const AttributeValue& value);

    std::vector<Column> columns_;
    std::unordered_map<std::string, std::size_t> index_;
    std::map<AttributeKey, std::vector<std::size_t>, std::less<>> by_attribute_;
};

/// Per-task bit vector in reversed notation: bit 1 marks an unacceptable
/// (attribute, value) column.
class CovvVector {
public:
    CovvVector() = default;
    explicit CovvVector(std::size_t length) : bits_(length, 0) {}

    std::size_t size() const { return bits_.size(); }
    bool test(std::size_t i) const { return bits_.at(i) != 0; }
    void set(std::size_t i, bool on = true) { bits_.at(i) = on ? 1 : 0; }
    std::size_t count() const;

    /// Element-wise OR; the shorter operand is treated as zero-padded.
    CovvVector& operator|=(const CovvVector& other);

    std::span<const std::uint8_t> bits() const { return bits_; }
    std::vector<double> to_dense() const;

    /// Column positions holding a 1, ascending.
    std::vector<std::size_t> ones() const;

    /// Right-pads with zeros (never truncates).
    void resize(std::size_t length);

    friend bool operator==(const CovvVector&, const CovvVector&) = default;

private:
    std::vector<std::uint8_t> bits_;
};

/// Whether a node holding `value` for the constraint's attribute satisfies it.
/// UNSET satisfies only NotEqual, NotInSet and Absent.
bool value_satisfies(const Constraint& constraint, const AttributeValue& value);

/// Registers the constraint's operands, then marks every column of the
/// constraint's attribute whose value fails it.
CovvVector encode_constraint(const Constraint& constraint, FeatureRegistry& registry);

/// OR of encode_constraint over all constraints; all-zero when unconstrained.
CovvVector encode_task(const TaskConstraintSet& task, FeatureRegistry& registry);

/// Zero-pads to the registry's current length. Throws std::length_error when
/// the vector is already longer than the registry.
CovvVector align(const CovvVector& vector, const FeatureRegistry& registry);

}  // namespace growsched

#endif  // GROWSCHED_COVV_HPP
