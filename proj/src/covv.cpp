#include "growsched/covv.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <stdexcept>

namespace growsched {

namespace {

constexpr std::array<std::pair<ConstraintOperator, std::string_view>, 10> kOperatorNames{{
    {ConstraintOperator::Equal, "EQ"},
    {ConstraintOperator::NotEqual, "NE"},
    {ConstraintOperator::LessThan, "LT"},
    {ConstraintOperator::LessOrEqual, "LE"},
    {ConstraintOperator::GreaterThan, "GT"},
    {ConstraintOperator::GreaterOrEqual, "GE"},
    {ConstraintOperator::InSet, "IN"},
    {ConstraintOperator::NotInSet, "NOT_IN"},
    {ConstraintOperator::Present, "PRESENT"},
    {ConstraintOperator::Absent, "ABSENT"},
}};

std::optional<std::int64_t> parse_decimal(std::string_view text) {
    if (text.empty()) return std::nullopt;
    std::int64_t out = 0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return out;
}

bool values_equal(std::string_view lhs, std::string_view rhs) {
    return compare_values(lhs, rhs) == std::strong_ordering::equal;
}

bool in_operands(const Constraint& c, std::string_view value) {
    return std::any_of(c.operands.begin(), c.operands.end(),
                       [&](const std::string& operand) { return values_equal(value, operand); });
}

}  // namespace

bool is_valid_attribute_key(std::string_view key) {
    if (key.empty()) return false;
    return std::none_of(key.begin(), key.end(),
                        [](unsigned char ch) { return std::isspace(ch) != 0 || std::iscntrl(ch) != 0; });
}

const std::string& AttributeValue::str() const {
    if (!value_) throw std::logic_error("AttributeValue::str() called on UNSET");
    return *value_;
}

std::strong_ordering compare_values(std::string_view lhs, std::string_view rhs) {
    const auto a = parse_decimal(lhs);
    const auto b = parse_decimal(rhs);
    if (a && b) return *a <=> *b;
    const int cmp = lhs.compare(rhs);
    if (cmp < 0) return std::strong_ordering::less;
    if (cmp > 0) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

std::string_view to_string(ConstraintOperator op) {
    for (const auto& [candidate, name] : kOperatorNames) {
        if (candidate == op) return name;
    }
    return "?";
}

std::optional<ConstraintOperator> parse_operator(std::string_view token) {
    for (const auto& [op, name] : kOperatorNames) {
        if (name == token) return op;
    }
    return std::nullopt;
}

void Constraint::validate() const {
    if (!is_valid_attribute_key(attribute)) {
        throw std::invalid_argument("invalid attribute key '" + attribute + "'");
    }
    switch (op) {
        case ConstraintOperator::Present:
        case ConstraintOperator::Absent:
            if (!operands.empty()) {
                throw std::invalid_argument(std::string(to_string(op)) + " takes no operands");
            }
            return;
        case ConstraintOperator::InSet:
        case ConstraintOperator::NotInSet:
            if (operands.empty()) {
                throw std::invalid_argument(std::string(to_string(op)) + " needs a non-empty operand set");
            }
            return;
        default:
            if (operands.size() != 1) {
                throw std::invalid_argument(std::string(to_string(op)) + " takes exactly one operand");
            }
            return;
    }
}

std::string FeatureRegistry::index_key(const AttributeKey& attribute, const AttributeValue& value) {
    // Attribute keys carry no whitespace, so '\n' cannot collide; the leading
    // tag keeps UNSET apart from any concrete value.
    std::string key = attribute;
    key += '\n';
    if (value.is_unset()) {
        key += 'U';
    } else {
        key += 'V';
        key += value.str();
    }
    return key;
}

std::size_t FeatureRegistry::register_observation(const AttributeKey& attribute, const AttributeValue& value) {
    if (auto existing = find(attribute, value)) return *existing;

    auto append = [this, &attribute](const AttributeValue& v) {
        const std::size_t pos = columns_.size();
        columns_.push_back(Column{attribute, v});
        index_.emplace(index_key(attribute, v), pos);
        by_attribute_[attribute].push_back(pos);
        return pos;
    };

    if (!by_attribute_.contains(attribute)) {
        const std::size_t unset_pos = append(AttributeValue::unset());
        if (value.is_unset()) return unset_pos;
    }
    return append(value);
}

std::optional<std::size_t> FeatureRegistry::find(const AttributeKey& attribute, const AttributeValue& value) const {
    auto it = index_.find(index_key(attribute, value));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::span<const std::size_t> FeatureRegistry::columns_of(const AttributeKey& attribute) const {
    auto it = by_attribute_.find(attribute);
    if (it == by_attribute_.end()) return {};
    return it->second;
}

std::size_t CovvVector::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

CovvVector& CovvVector::operator|=(const CovvVector& other) {
    if (other.size() > size()) bits_.resize(other.size(), 0);
    for (std::size_t i = 0; i < other.size(); ++i) bits_[i] |= other.bits_[i];
    return *this;
}

std::vector<double> CovvVector::to_dense() const {
    return std::vector<double>(bits_.begin(), bits_.end());
}

std::vector<std::size_t> CovvVector::ones() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i]) out.push_back(i);
    }
    return out;
}

void CovvVector::resize(std::size_t length) {
    if (length > bits_.size()) bits_.resize(length, 0);
}

bool value_satisfies(const Constraint& c, const AttributeValue& v) {
    if (v.is_unset()) {
        return c.op == ConstraintOperator::NotEqual || c.op == ConstraintOperator::NotInSet ||
               c.op == ConstraintOperator::Absent;
    }
    const std::string& value = v.str();
    switch (c.op) {
        case ConstraintOperator::Equal:
            return values_equal(value, c.operands.at(0));
        case ConstraintOperator::NotEqual:
            return !values_equal(value, c.operands.at(0));
        case ConstraintOperator::LessThan:
            return compare_values(value, c.operands.at(0)) < 0;
        case ConstraintOperator::LessOrEqual:
            return compare_values(value, c.operands.at(0)) <= 0;
        case ConstraintOperator::GreaterThan:
            return compare_values(value, c.operands.at(0)) > 0;
        case ConstraintOperator::GreaterOrEqual:
            return compare_values(value, c.operands.at(0)) >= 0;
        case ConstraintOperator::InSet:
            return in_operands(c, value);
        case ConstraintOperator::NotInSet:
            return !in_operands(c, value);
        case ConstraintOperator::Present:
            return true;
        case ConstraintOperator::Absent:
            return false;
    }
    return false;
}

CovvVector encode_constraint(const Constraint& constraint, FeatureRegistry& registry) {
    constraint.validate();
    registry.register_observation(constraint.attribute, AttributeValue::unset());
    for (const auto& operand : constraint.operands) {
        registry.register_observation(constraint.attribute, AttributeValue{operand});
    }

    CovvVector out(registry.size());
    for (std::size_t pos : registry.columns_of(constraint.attribute)) {
        if (!value_satisfies(constraint, registry.column(pos).value)) out.set(pos);
    }
    return out;
}

CovvVector encode_task(const TaskConstraintSet& task, FeatureRegistry& registry) {
    // Register every operand first so each constraint sees every column.
    for (const auto& constraint : task.constraints) {
        constraint.validate();
        registry.register_observation(constraint.attribute, AttributeValue::unset());
        for (const auto& operand : constraint.operands) {
            registry.register_observation(constraint.attribute, AttributeValue{operand});
        }
    }
    CovvVector out;
    for (const auto& constraint : task.constraints) out |= encode_constraint(constraint, registry);
    out.resize(registry.size());
    return out;
}

CovvVector align(const CovvVector& vector, const FeatureRegistry& registry) {
    if (vector.size() > registry.size()) {
        throw std::length_error("vector of length " + std::to_string(vector.size()) +
                                " exceeds registry length " + std::to_string(registry.size()));
    }
    CovvVector out = vector;
    out.resize(registry.size());
    return out;
}

}  // namespace growsched
