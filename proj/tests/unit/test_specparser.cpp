#include "support.hpp"

#include <doctest.h>

#include "wirespec/specparser.hpp"

using namespace wirespec;

namespace {

bool has_code(const std::vector<ParseDiagnostic>& diags, std::string_view code)
{
    return std::any_of(diags.begin(), diags.end(), [&](const auto& d) { return d.code == code; });
}

Errc endpoint_error(const std::string& text)
{
    try {
        parse_pin_endpoint(text);
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::IoError;  // sentinel: accepted
}

const std::string kResponse = R"(Sure, here is the design.

```json
{
  "bill_of_materials": [
    {"ref": "UNO", "part_type": "Arduino Uno"},
    {"ref": "R1", "part_type": "resistor", "value": "220"},
    {"ref": "LED1", "part_type": "LED"}
  ],
  "pinouts": {"UNO": ["D13", "GND"], "R1": ["1", "2"], "LED1": ["anode", "cathode"]},
  "schematic": [
    {"from": "UNO.D13", "to": "R1.1"},
    {"from": "R1.2", "to": "LED1.anode"},
    {"from": "LED1.cathode", "to": "UNO.GND"}
  ]
}
```

And the sketch:

```cpp
void setup() { pinMode(13, OUTPUT); }
void loop() {}
```
)";

} // namespace

TEST_CASE("extract_blocks finds fences with exact spans")
{
    auto blocks = extract_blocks(kResponse);
    REQUIRE(blocks.structured_blocks.size() == 1);
    REQUIRE(blocks.code_fences.size() == 1);
    const auto& b = blocks.structured_blocks[0];
    CHECK(std::string_view(kResponse).substr(b.span.start, b.span.end - b.span.start) == b.text);
    const auto& f = blocks.code_fences[0];
    CHECK(f.info_string == "cpp");
    CHECK(std::string_view(kResponse).substr(f.span.start, f.span.end - f.span.start) == f.body);
    CHECK(f.body.find("pinMode") != std::string::npos);
}

TEST_CASE("extract_blocks is total over garbage")
{
    std::mt19937 rng(7);
    for (int i = 0; i < 300; ++i) {
        auto junk = testing::random_text(rng, 80);
        CHECK_NOTHROW(extract_blocks(junk));
    }
    auto unterminated = extract_blocks("text\n```cpp\nvoid loop() {}\n");
    CHECK(has_code(unterminated.diagnostics, "UnterminatedFence"));
    CHECK(extract_blocks("").empty());
}

TEST_CASE("a model response assembles into a spec")
{
    auto r = parse_device_spec(kResponse);
    CHECK(r.error_count() == 0);
    CHECK(r.spec.bom.size() == 3);
    CHECK(r.spec.connections.size() == 3);
    REQUIRE(r.spec.code.has_value());
    CHECK(r.spec.code->source.find("setup") != std::string::npos);
    CHECK(r.sections.bom);
    CHECK(r.sections.code);
    CHECK(validate(r.spec).ok());
}

TEST_CASE("missing sections are diagnosed, not fatal")
{
    auto r = parse_device_spec(R"(```json
{"bill_of_materials": [{"ref": "R1", "part_type": "resistor"}]}
```)");
    CHECK(r.sections.bom);
    CHECK_FALSE(r.sections.schematic);
    CHECK(has_code(r.diagnostics, "MissingSection"));
    CHECK(r.error_count() == 3);
}

TEST_CASE("prose without any section is NoParsableContent")
{
    try {
        parse_device_spec("I would use an Arduino and an LED.");
        FAIL("expected NoParsableContent");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NoParsableContent);
    }
}

TEST_CASE("comments and trailing commas are repaired with a warning")
{
    auto r = parse_device_spec(R"(```json
{
  "bill_of_materials": [{"ref": "R1", "part_type": "resistor"},], // one part
  "pinouts": {"R1": ["1", "2"]},
  "schematic": []
}
```)");
    CHECK(r.spec.bom.size() == 1);
    CHECK(has_code(r.diagnostics, "RepairedComment"));
    CHECK(has_code(r.diagnostics, "RepairedTrailingComma"));
}

TEST_CASE("broken structured text reports a located syntax error")
{
    std::string raw = "```json\n{\"bill_of_materials\": [}\n```\n```cpp\nint x;\n```\n";
    auto r = parse_device_spec(raw);
    REQUIRE(has_code(r.diagnostics, "StructuredSyntax"));
    for (const auto& d : r.diagnostics) {
        CHECK(d.span.start <= d.span.end);
        CHECK(d.span.end <= raw.size());
    }
}

TEST_CASE("endpoint parsing")
{
    auto p = parse_pin_endpoint(" UNO.D13 ");
    CHECK(p.part.str() == "UNO");
    CHECK(p.pin == "D13");
    CHECK(parse_pin_endpoint("LCD1.D4").pin == "D4");
    CHECK(endpoint_error("UNO") == Errc::MalformedEndpoint);
    CHECK(endpoint_error("UNO.") == Errc::MalformedEndpoint);
    CHECK(endpoint_error(".D2") == Errc::MalformedEndpoint);
}

TEST_CASE("every range shortcut case is rejected")
{
    auto cases = testing::load_json("fixtures/range-cases.json")["cases"];
    REQUIRE(cases.size() == 20);
    for (const auto& c : cases) {
        INFO(c.get<std::string>());
        CHECK(endpoint_error(c.get<std::string>()) == Errc::RangeShortcut);
    }
}

TEST_CASE("legitimate pin names are never mistaken for ranges")
{
    auto names = testing::load_json("fixtures/pin-names.json")["endpoints"];
    REQUIRE(names.size() >= 100);
    for (const auto& n : names) {
        INFO(n.get<std::string>());
        CHECK_NOTHROW(parse_pin_endpoint(n.get<std::string>()));
    }
}

TEST_CASE("a range in the schematic becomes a RangeShortcut diagnostic")
{
    auto r = parse_device_spec(R"(```json
{"bill_of_materials": [{"ref": "UNO", "part_type": "Arduino Uno"}, {"ref": "R1", "part_type": "resistor"}],
 "pinouts": {"UNO": ["D2"], "R1": ["1"]},
 "schematic": [{"from": "UNO.D2-D5", "to": "R1.1"}, {"from": "UNO.D2", "to": "R1.1"}]}
```)");
    CHECK(has_code(r.diagnostics, "RangeShortcut"));
    CHECK(r.spec.connections.size() == 1);
}
