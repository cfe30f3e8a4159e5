#pragma once

#include "wirespec/devicespec.hpp"
#include "wirespec/partsdb.hpp"
#include "wirespec/specparser.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace wirespec {

struct WholeSpec {
    bool operator==(const WholeSpec&) const = default;
};

struct CodeLine {
    int line = 0;  // 1-based
    std::string text;

    bool operator==(const CodeLine&) const = default;
};

using Locus = std::variant<WholeSpec, PartRef, PinRef, CodeLine>;

std::string describe(const Locus& locus);

struct Finding {
    std::string rule_id;
    Severity severity = Severity::Error;
    std::string message;
    Locus locus = WholeSpec{};

    bool operator==(const Finding&) const = default;
};

struct ErcReport {
    std::vector<Finding> findings;
    std::vector<std::string> rules_run;
    bool clean = true;

    std::size_t error_count() const;

    bool operator==(const ErcReport&) const = default;
};

struct RuleInfo {
    std::string_view id;
    Severity severity;
    std::string_view summary;
};

/// The registered rule catalogue, in evaluation order.
std::span<const RuleInfo> registered_rules();
bool is_registered_rule(std::string_view id);

struct ErcOptions {
    /// Subset of rule ids; all rules when empty. Unknown ids throw UnknownRule.
    std::vector<std::string> rules;
    /// When set, structural validation findings abort with PrereqFailed.
    bool require_valid = true;
    /// Diagnostics from the parse that produced the spec; RangeShortcut
    /// rejections resurface as E-RANGE findings.
    std::vector<ParseDiagnostic> diagnostics;
};

ErcReport run_erc(const DeviceSpec& spec, const KnowledgeBase& kb, const ErcOptions& options = {});

/// Remediation paragraph for a finding. Throws Error(UnknownRule).
std::string explain(const Finding& finding);

/// A pin reference found in microcontroller code by the lexical scan.
struct CodePinUse {
    int line = 0;
    std::string call;
    std::string argument;             // as written
    std::vector<std::string> candidates;  // board pin names it may denote
    std::string line_text;
};

std::vector<CodePinUse> scan_code_pins(std::string_view source);

ordered_json to_json(const Finding& finding);
ordered_json to_json(const ErcReport& report);

} // namespace wirespec
