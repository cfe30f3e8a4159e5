#pragma once

#include <compare>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace wirespec {

using ordered_json = nlohmann::ordered_json;

/// Reference designator of a part in the schematic ("R1", "LED1", "UNO").
/// Never empty, never contains whitespace or '.', which separates part from
/// pin in endpoint strings.
class PartRef {
public:
    explicit PartRef(std::string value);

    static bool is_valid(std::string_view value) noexcept;

    const std::string& str() const noexcept { return value_; }

    auto operator<=>(const PartRef&) const = default;

private:
    std::string value_;
};

struct BomItem {
    PartRef ref;
    std::string part_type;
    std::optional<std::string> value;
    std::optional<std::string> note;

    bool operator==(const BomItem&) const = default;
};

/// One endpoint of a connection. Ordering is by the "PART.PIN" text so that
/// net membership sorts the way it prints.
struct PinRef {
    PartRef part;
    std::string pin;

    std::string str() const { return part.str() + "." + pin; }

    bool operator==(const PinRef&) const = default;
    bool operator<(const PinRef& other) const { return str() < other.str(); }
};

struct Connection {
    PinRef a;
    PinRef b;
    std::optional<std::string> note;

    bool operator==(const Connection&) const = default;
};

struct PinEntry {
    std::string pin;
    std::optional<std::string> note;

    bool operator==(const PinEntry&) const = default;
};

/// Part ref -> ordered pin list. Parts keep declaration order.
class PinoutMap {
public:
    using Entry = std::pair<PartRef, std::vector<PinEntry>>;

    /// Returns false (and stores nothing) when the pin is already listed.
    bool add_pin(const PartRef& part, PinEntry entry);
    /// Declares a part with no pins yet; no-op if present.
    void add_part(const PartRef& part);
    bool remove_pin(const PartRef& part, std::string_view pin);

    const std::vector<PinEntry>* pins_of(const PartRef& part) const;
    bool has_pin(const PartRef& part, std::string_view pin) const;

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    bool empty() const noexcept { return entries_.empty(); }

    bool operator==(const PinoutMap&) const = default;

private:
    std::vector<Entry> entries_;
};

struct CodeArtifact {
    std::string language_tag = "arduino-cpp";
    std::string source;
    std::optional<std::string> note;

    bool operator==(const CodeArtifact&) const = default;
};

struct Provenance {
    std::string model_id;
    std::string prompt_digest;
    int reflection_iterations = 0;
    std::string created_at;

    bool operator==(const Provenance&) const = default;
};

struct DeviceSpec {
    std::string description;
    std::vector<BomItem> bom;
    PinoutMap pinouts;
    std::vector<Connection> connections;
    std::optional<CodeArtifact> code;
    Provenance provenance;

    const BomItem* find_part(const PartRef& ref) const;

    bool operator==(const DeviceSpec&) const = default;
};

/// Connected component of the pin graph. Ids start at 1.
struct Net {
    int id = 0;
    std::vector<PinRef> members;
    std::optional<std::string> label;

    bool operator==(const Net&) const = default;
};

enum class ValidationKind { UndeclaredPart, MissingPin, SelfLoop };

struct ValidationFinding {
    ValidationKind kind;
    PinRef endpoint;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationFinding> findings;

    bool ok() const noexcept { return findings.empty(); }
};

/// Structural check: every connection endpoint names a BOM part and a pin
/// listed in that part's pinout. One finding per distinct offending part or pin.
ValidationReport validate(const DeviceSpec& spec);

/// Connected components of the connection graph. Nets are ordered by their
/// smallest member; members are sorted.
std::vector<Net> build_nets(std::span<const Connection> connections);

/// Canonical `.device.json` text. Throws Error(InvalidSpec) when validate()
/// reports anything.
std::string canonical_serialize(const DeviceSpec& spec);

/// Same layout as canonical_serialize without the validity gate; used where a
/// broken spec still has to be shown (reflection prompts, artifacts).
std::string render_document(const DeviceSpec& spec);
ordered_json to_json(const DeviceSpec& spec);

ordered_json to_json(const ValidationReport& report);

} // namespace wirespec
