#include "support.hpp"

#include <doctest.h>

#include "wirespec/devicespec.hpp"
#include "wirespec/specparser.hpp"

using namespace wirespec;

namespace {

DeviceSpec two_resistors()
{
    DeviceSpec s;
    s.description = "two resistors in series";
    s.bom = {{PartRef("R1"), "resistor", "1k", {}}, {PartRef("R2"), "resistor", "2k", {}}};
    s.pinouts.add_pin(PartRef("R1"), {"1", {}});
    s.pinouts.add_pin(PartRef("R1"), {"2", {}});
    s.pinouts.add_pin(PartRef("R2"), {"1", {}});
    s.pinouts.add_pin(PartRef("R2"), {"2", {}});
    s.connections = {{{PartRef("R1"), "2"}, {PartRef("R2"), "1"}, {}}};
    return s;
}

} // namespace

TEST_CASE("part refs reject empty, dotted and spaced names")
{
    CHECK(PartRef::is_valid("LED1"));
    CHECK_FALSE(PartRef::is_valid(""));
    CHECK_FALSE(PartRef::is_valid("R 1"));
    CHECK_FALSE(PartRef::is_valid("R1.2"));
    CHECK_THROWS_AS(PartRef("a b"), Error);
    try {
        PartRef bad("x.y");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::InvalidPartRef);
    }
}

TEST_CASE("pinout map keeps declaration order and refuses duplicates")
{
    PinoutMap m;
    CHECK(m.add_pin(PartRef("B"), {"2", {}}));
    CHECK(m.add_pin(PartRef("A"), {"1", {}}));
    CHECK_FALSE(m.add_pin(PartRef("B"), {"2", "again"}));
    m.add_part(PartRef("C"));
    REQUIRE(m.entries().size() == 3);
    CHECK(m.entries()[0].first.str() == "B");
    CHECK(m.entries()[2].second.empty());
    CHECK(m.has_pin(PartRef("A"), "1"));
    CHECK(m.remove_pin(PartRef("A"), "1"));
    CHECK_FALSE(m.has_pin(PartRef("A"), "1"));
    CHECK(m.pins_of(PartRef("Z")) == nullptr);
}

TEST_CASE("validate reports each offending part and pin once")
{
    auto s = two_resistors();
    CHECK(validate(s).ok());

    s.connections.push_back({{PartRef("R3"), "1"}, {PartRef("R1"), "9"}, {}});
    s.connections.push_back({{PartRef("R3"), "2"}, {PartRef("R1"), "9"}, {}});
    s.connections.push_back({{PartRef("R2"), "2"}, {PartRef("R2"), "2"}, {}});
    auto report = validate(s);
    int undeclared = 0, missing = 0, loops = 0;
    for (const auto& f : report.findings) {
        undeclared += f.kind == ValidationKind::UndeclaredPart;
        missing += f.kind == ValidationKind::MissingPin;
        loops += f.kind == ValidationKind::SelfLoop;
    }
    CHECK(undeclared == 1);
    CHECK(missing == 1);
    CHECK(loops == 1);
    CHECK(to_json(report)["findings"].size() == 3);
}

TEST_CASE("canonical serialization refuses invalid specs")
{
    auto s = two_resistors();
    s.connections.push_back({{PartRef("Q9"), "1"}, {PartRef("R1"), "1"}, {}});
    try {
        canonical_serialize(s);
        FAIL("expected InvalidSpec");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::InvalidSpec);
    }
    CHECK_NOTHROW(render_document(s));
}

TEST_CASE("canonical layout is stable and parses back")
{
    auto s = two_resistors();
    auto text = canonical_serialize(s);
    CHECK(text == canonical_serialize(s));
    CHECK(text.back() == '\n');
    auto doc = nlohmann::ordered_json::parse(text);
    std::vector<std::string> keys;
    for (const auto& [k, v] : doc.items()) {
        keys.push_back(k);
    }
    CHECK(keys == std::vector<std::string>{"description", "bill_of_materials", "pinouts", "schematic",
                                           "code", "provenance"});
    CHECK(doc["code"].is_null());
    CHECK(parse_device_spec(text).spec == s);
}

TEST_CASE("fuzzed specs round-trip through the canonical form")
{
    std::mt19937 rng(1234);
    for (int i = 0; i < 200; ++i) {
        auto s = testing::random_spec(rng);
        REQUIRE(validate(s).ok());
        auto text = canonical_serialize(s);
        auto back = parse_device_spec(text);
        CHECK(back.error_count() == 0);
        REQUIRE(back.spec == s);
        CHECK(canonical_serialize(back.spec) == text);
    }
}

TEST_CASE("nets match a union-find oracle")
{
    std::mt19937 rng(99);
    for (int i = 0; i < 200; ++i) {
        auto nodes = std::uniform_int_distribution<std::size_t>(1, 60)(rng);
        auto edges = std::uniform_int_distribution<std::size_t>(0, 120)(rng);
        auto conns = testing::random_graph(rng, nodes, edges);
        auto nets = build_nets(conns);
        REQUIRE(testing::as_sets(nets) == testing::oracle_nets(conns));
    }
}

TEST_CASE("nets are numbered from 1 in order of their smallest member")
{
    std::vector<Connection> conns = {
        {{PartRef("Z"), "1"}, {PartRef("Y"), "1"}, {}},
        {{PartRef("B"), "2"}, {PartRef("A"), "1"}, {}},
        {{PartRef("A"), "1"}, {PartRef("C"), "3"}, {}},
    };
    auto nets = build_nets(conns);
    REQUIRE(nets.size() == 2);
    CHECK(nets[0].id == 1);
    CHECK(nets[1].id == 2);
    CHECK(nets[0].members.front().str() == "A.1");
    CHECK(nets[0].members.size() == 3);
    CHECK(nets[1].members == std::vector<PinRef>{{PartRef("Y"), "1"}, {PartRef("Z"), "1"}});
    CHECK(build_nets({}).empty());
}
