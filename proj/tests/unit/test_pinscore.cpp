#include "support.hpp"

#include <doctest.h>

#include "wirespec/pinscore.hpp"

using namespace wirespec;

namespace {

const KnowledgeBase& kb()
{
    static const auto instance = KnowledgeBase::load(default_kb_path());
    return instance;
}

} // namespace

TEST_CASE("complete pinouts pass both criteria")
{
    const auto& rec = *kb().lookup("HC-SR04");
    std::vector<std::string> pins = {"VCC", "Trig", "Echo", "GND"};
    auto s = score_pinout(rec, pins);
    CHECK(s.strict);
    CHECK(s.permissive);
}

TEST_CASE("aliases and duplicates count once")
{
    const auto& rec = *kb().lookup("LED");
    std::vector<std::string> pins = {"anode", "A", "+", "cathode"};
    auto s = score_pinout(rec, pins);
    CHECK(s.strict);
    CHECK(s.unknown_generated.empty());
}

TEST_CASE("unknown extras break strict only")
{
    const auto& rec = *kb().lookup("LED");
    std::vector<std::string> pins = {"anode", "cathode", "gate"};
    auto s = score_pinout(rec, pins);
    CHECK_FALSE(s.strict);
    CHECK(s.permissive);
    CHECK(s.unknown_generated == std::vector<std::string>{"gate"});
}

TEST_CASE("missing critical pins fail both")
{
    const auto& rec = *kb().lookup("HC-SR04");
    std::vector<std::string> pins = {"VCC", "Trig", "Echo"};
    auto s = score_pinout(rec, pins);
    CHECK_FALSE(s.permissive);
    CHECK_FALSE(s.strict);
    CHECK(s.missing_critical == std::vector<std::string>{"GND"});
}

TEST_CASE("aggregate rates")
{
    CHECK_THROWS_AS(aggregate(std::span<const PinoutScore>{}), Error);
    std::vector<PinoutScore> scores(4);
    scores[0].strict = scores[0].permissive = true;
    scores[1].permissive = true;
    auto agg = aggregate(scores);
    CHECK(agg.n == 4);
    CHECK(agg.strict_rate == 0.25);
    CHECK(agg.permissive_rate == 0.5);
}

TEST_CASE("overrides replace the automated verdict and are validated")
{
    PinoutScore s;
    s.component = "LED";
    CHECK_THROWS_AS(apply_override(s, {true, false, "rev", ""}), Error);
    apply_override(s, {true, true, "rev", "datasheet calls it K"});
    CHECK(s.effective_strict());
    auto j = to_json(s);
    CHECK(j["strict"] == true);
    CHECK(j["override"]["automated_strict"] == false);
}

TEST_CASE("score_document scores known components and lists the rest")
{
    nlohmann::json gen = {{"LED", {"anode", "cathode"}},
                          {"ultrasonic sensor", {"VCC", "GND", "Trig"}},
                          {"warp core", {"x"}}};
    nlohmann::json overrides = {{{"component", "HC-SR04"}, {"strict", false}, {"permissive", true},
                                 {"reviewer", "r"}, {"note", "echo is optional here"}}};
    auto report = score_document(kb(), gen, &overrides);
    CHECK(report.unscored == std::vector<std::string>{"warp core"});
    REQUIRE(report.aggregate.has_value());
    CHECK(report.aggregate->n == 2);
    CHECK(report.aggregate->permissive_pass == 2);
    CHECK(report.aggregate->strict_pass == 1);
}
