#pragma once

#include "wirespec/devicespec.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace wirespec {

/// Half-open byte range [start, end) into the parsed input.
struct ByteSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    bool operator==(const ByteSpan&) const = default;
};

enum class Severity { Error, Warning };

std::string_view severity_name(Severity s);

struct ParseDiagnostic {
    Severity severity = Severity::Error;
    std::string code;  // machine-readable class, e.g. "RangeShortcut"
    std::string message;
    ByteSpan span;
};

struct StructuredBlock {
    std::string text;
    ByteSpan span;  // covers `text` exactly
};

struct CodeFence {
    std::string info_string;
    std::string body;
    ByteSpan span;  // covers `body` exactly
};

struct RawBlocks {
    std::vector<StructuredBlock> structured_blocks;
    std::vector<CodeFence> code_fences;
    std::vector<ParseDiagnostic> diagnostics;

    bool empty() const noexcept { return structured_blocks.empty() && code_fences.empty(); }
};

/// Splits raw model output into structured-data blocks and code fences.
/// Total over arbitrary input.
RawBlocks extract_blocks(std::string_view raw);

/// Parses "PART.PIN". Throws Error(MalformedEndpoint) or Error(RangeShortcut).
PinRef parse_pin_endpoint(std::string_view text);

/// True when the pin or part token is a range/wildcard shorthand
/// ("D2-D9", "LED1..LED4", "D*", "LED[1-4]").
bool looks_like_range(std::string_view token);

/// Which top-level sections the input actually carried.
struct SectionPresence {
    bool bom = false;
    bool pinouts = false;
    bool schematic = false;
    bool code = false;
};

struct ParseResult {
    DeviceSpec spec;
    std::vector<ParseDiagnostic> diagnostics;
    SectionPresence sections;

    std::size_t error_count() const;
};

/// Assembles a DeviceSpec from a model response or a canonical document.
/// Throws Error(NoParsableContent) when no section could be read.
ParseResult parse_device_spec(std::string_view raw);

ordered_json to_json(const ParseDiagnostic& d);
ordered_json to_json(const std::vector<ParseDiagnostic>& diagnostics);

} // namespace wirespec
