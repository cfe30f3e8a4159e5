#include "support.hpp"

#include <doctest.h>

#include "wirespec/bench.hpp"

#include <chrono>

using namespace wirespec;

namespace {

const KnowledgeBase& kb()
{
    static const auto instance = KnowledgeBase::load(default_kb_path());
    return instance;
}

const PromptTemplate& tpl()
{
    static const auto instance = PromptTemplate::load(default_template_path());
    return instance;
}

BenchReport run_corpus(const std::string& name, int jobs = 1)
{
    auto provider = make_provider("replay:" + testing::data_path("transcripts/" + name), {});
    BenchOptions opts;
    opts.jobs = jobs;
    return run_benchmark(load_tasks(default_tasks_path()), *provider, tpl(), kb(), opts);
}

Errc error_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::IoError;
}

} // namespace

TEST_CASE("the task corpus has the expected shape")
{
    auto tasks = load_tasks(default_tasks_path());
    REQUIRE(tasks.size() == 25);
    std::map<std::string, int> counts;
    for (const auto& t : tasks) {
        ++counts[t.category];
        CHECK_FALSE(t.description.empty());
        CHECK(std::any_of(t.auto_checks.begin(), t.auto_checks.end(),
                          [](const AutoCheck& c) { return c.kind == CheckKind::ErcClean; }));
    }
    CHECK(counts == std::map<std::string, int>{
                        {"input", 3}, {"protocols", 4}, {"output", 11}, {"sensors", 3}, {"logic", 4}});
}

TEST_CASE("task parsing errors")
{
    CHECK(error_of([] { parse_tasks(nlohmann::json::array()); }) == Errc::SchemaError);
    CHECK(error_of([] { parse_tasks({{"tasks", 3}}); }) == Errc::SchemaError);
    nlohmann::json one = {{"id", "a"}, {"category", "input"}, {"title", "A"}, {"description", "d"},
                          {"auto_checks", {{{"kind", "erc_clean"}}}}};
    CHECK(parse_tasks(nlohmann::json::array({one})).size() == 1);
    CHECK(error_of([&] { parse_tasks(nlohmann::json::array({one, one})); }) == Errc::DuplicateId);
    auto bad = one;
    bad["auto_checks"] = {{{"kind", "telepathy"}}};
    CHECK(error_of([&] { parse_tasks(nlohmann::json::array({bad})); }) == Errc::SchemaError);
    bad = one;
    bad["category"] = "cooking";
    CHECK(error_of([&] { parse_tasks(nlohmann::json::array({bad})); }) == Errc::SchemaError);
}

TEST_CASE("verdict names")
{
    for (auto v : {Verdict::Pass, Verdict::Fail, Verdict::NeedsReview}) {
        CHECK(parse_verdict(to_string(v)) == v);
    }
    CHECK_THROWS_AS(parse_verdict("maybe"), Error);
}

TEST_CASE("rate cells ignore undecided tasks")
{
    RateCell c;
    CHECK_FALSE(c.rate().has_value());
    c.needs_review = 2;
    CHECK_FALSE(c.rate().has_value());
    c.pass = 3;
    c.fail = 1;
    CHECK(*c.rate() == 0.75);
}

TEST_CASE("the correct corpus passes everything")
{
    auto report = run_corpus("bench-correct");
    REQUIRE(report.per_task.size() == 25);
    CHECK(report.aggregates.schematic.pass == 25);
    CHECK(report.aggregates.code.pass == 25);
    CHECK(*report.aggregates.schematic.rate() == 1.0);
    CHECK(report.per_task[0].first == "input-button");
    CHECK(report.per_task[0].second.termination == "stop_token");
}

TEST_CASE("one corrupted schematic costs exactly one task")
{
    auto report = run_corpus("bench-corrupted");
    CHECK(report.aggregates.schematic.pass == 24);
    CHECK(report.aggregates.schematic.fail == 1);
    CHECK(*report.aggregates.schematic.rate() == 0.96);
    const auto* bad = report.find("output-led-sequence");
    REQUIRE(bad != nullptr);
    CHECK(bad->schematic == Verdict::Fail);
    CHECK(bad->code == Verdict::NeedsReview);
    CHECK(bad->erc_errors >= 1);
}

TEST_CASE("parallel runs give the same report")
{
    auto serial = to_json(run_corpus("bench-corrupted", 1));
    auto parallel = to_json(run_corpus("bench-corrupted", 4));
    CHECK(serial.dump() == parallel.dump());
}

TEST_CASE("manual verdicts win and contradictions are logged")
{
    auto report = run_corpus("bench-corrupted");
    auto updated = ingest_manual_verdicts(
        report, nlohmann::json::parse(R"([
            {"id": "output-led-sequence", "code": "pass", "notes": "sketch is fine"},
            {"id": "input-button", "schematic": "fail"}
        ])"));
    CHECK(updated.find("output-led-sequence")->code == Verdict::Pass);
    CHECK(updated.find("output-led-sequence")->source == "manual");
    CHECK(updated.find("input-button")->schematic == Verdict::Fail);
    CHECK(updated.aggregates.schematic.pass == 23);
    REQUIRE(updated.log.size() == 1);
    CHECK(updated.log[0].find("input-button") != std::string::npos);

    CHECK(error_of([&] {
        ingest_manual_verdicts(report, nlohmann::json::parse(R"([{"id": "nope", "code": "pass"}])"));
    }) == Errc::UnknownTaskId);
}

TEST_CASE("report rendering and JSON round trip")
{
    auto report = run_corpus("bench-corrupted");
    auto text = render_report(report);
    CHECK(text.find("Overall Performance: 96% / 100%") != std::string::npos);
    CHECK(text.find("LED - Sequence") != std::string::npos);
    CHECK(text.find("Awaiting review") != std::string::npos);

    auto j = to_json(report);
    CHECK(j["aggregates"]["schematic_rate"] == 0.96);
    auto back = report_from_json(j);
    CHECK(to_json(back).dump() == j.dump());
}

TEST_CASE("the benchmark is fast offline")
{
    auto t0 = std::chrono::steady_clock::now();
    run_corpus("bench-correct");
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(60));
}

TEST_CASE("generation failures fail both verdicts without aborting the run")
{
    auto tasks = load_tasks(default_tasks_path());
    tasks.resize(1);
    ScriptedProvider provider({"prose", "prose", "prose", "prose"});
    auto report = run_benchmark(tasks, provider, tpl(), kb());
    CHECK(report.per_task[0].second.schematic == Verdict::Fail);
    CHECK(report.per_task[0].second.code == Verdict::Fail);
}
