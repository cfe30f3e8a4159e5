#pragma once

#include "wirespec/devicespec.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wirespec {

enum class PinRole { Power, Ground, DigitalIo, AnalogIo, Signal, NoConnect };

enum class Category { Passive, Input, Output, Sensor, Ic, Power, Logic, Microcontroller };

std::string_view to_string(PinRole role);
std::string_view to_string(Category category);
std::optional<PinRole> parse_pin_role(std::string_view s);
std::optional<Category> parse_category(std::string_view s);

struct PinSpec {
    std::string canonical;
    std::vector<std::string> aliases;
    bool critical = false;
    PinRole role = PinRole::Signal;
};

struct ComponentRecord {
    std::string canonical_name;
    std::vector<std::string> name_aliases;
    Category category = Category::Passive;
    std::vector<PinSpec> pins;
    std::vector<std::string> requires_tags;

    bool requires_tag(std::string_view tag) const;
    const PinSpec* pin(std::string_view canonical) const;
    std::vector<std::string> critical_pins() const;
};

/// Lookup key: lowercase, trimmed, with whitespace, '-' and '_' removed.
/// Names made only of those characters ("-") keep their lowercase trimmed form.
std::string normalize_name(std::string_view name);

class KnowledgeBase {
public:
    KnowledgeBase() = default;

    /// Throws Error(SchemaError) on malformed records and Error(DuplicateAlias)
    /// when one normalized name would resolve to two records.
    static KnowledgeBase from_json(const nlohmann::json& doc);
    static KnowledgeBase load(const std::string& path);

    /// Exact hit on the normalized alias index; no fuzzy matching.
    const ComponentRecord* lookup(std::string_view name) const;

    /// The record for a BOM line: part_type first, then value.
    const ComponentRecord* resolve(const BomItem& item) const;

    const std::map<std::string, ComponentRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }

private:
    std::map<std::string, ComponentRecord> records_;
    std::map<std::string, std::string> alias_index_;
};

/// Canonical pin name for `pin_name` on this component, or nullopt.
std::optional<std::string> normalize_pin(const ComponentRecord& record, std::string_view pin_name);

/// True when the record is a supply source (power category or a microcontroller
/// board that exports its rails).
bool is_supply_source(const ComponentRecord& record);

ordered_json to_json(const ComponentRecord& record);

std::string default_kb_path();

} // namespace wirespec
