#pragma once

#include "wirespec/pipeline.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace wirespec {

inline constexpr std::array<std::string_view, 5> kBenchCategories = {
    "input", "protocols", "output", "sensors", "logic"};

enum class Verdict { Pass, Fail, NeedsReview };

std::string_view to_string(Verdict v);
Verdict parse_verdict(std::string_view s);

enum class CheckKind { ErcClean, RequiresPart, RequiresNet, CodeContains };

struct AutoCheck {
    CheckKind kind = CheckKind::ErcClean;
    std::vector<std::string> args;  // part name | two "part name.pin" endpoints | token
};

struct ManualVerdict {
    std::optional<Verdict> schematic;
    std::optional<Verdict> code;
    std::string notes;
};

struct BenchTask {
    std::string id;
    std::string category;
    std::string title;
    std::string description;
    std::vector<AutoCheck> auto_checks;
    std::optional<ManualVerdict> manual_verdict;
};

/// Throws Error(SchemaError) on malformed or empty input, Error(DuplicateId).
std::vector<BenchTask> parse_tasks(const nlohmann::json& doc);
std::vector<BenchTask> load_tasks(const std::string& path);
std::string default_tasks_path();

struct TaskResult {
    std::string category;
    std::string title;
    Verdict schematic = Verdict::NeedsReview;
    Verdict code = Verdict::NeedsReview;
    std::string source = "auto";  // auto | manual
    std::vector<std::string> reasons;
    std::string termination;
    int iterations = 0;
    std::size_t erc_errors = 0;
};

struct RateCell {
    std::size_t pass = 0;
    std::size_t fail = 0;
    std::size_t needs_review = 0;

    std::optional<double> rate() const;
};

struct BenchAggregates {
    RateCell schematic;
    RateCell code;
    std::map<std::string, std::pair<RateCell, RateCell>> by_category;  // schematic, code
};

struct BenchReport {
    std::vector<std::pair<std::string, TaskResult>> per_task;  // corpus order
    BenchAggregates aggregates;
    std::vector<std::string> log;

    const TaskResult* find(std::string_view id) const;
    void recompute();
};

struct BenchOptions {
    GenerationParams params{};
    GenerationLimits limits{};
    int jobs = 1;
};

/// Decides the verdicts for one finished run. Conservative: a pass needs every
/// listed check to pass and a clean ERC; undecidable stays needs_review.
TaskResult judge(const BenchTask& task, const GenerationRun& run, const KnowledgeBase& kb);

/// One greedy run per task. Throws Error(EmptyInput) for no tasks; provider
/// errors propagate.
BenchReport run_benchmark(const std::vector<BenchTask>& tasks, Provider& provider,
                          const PromptTemplate& tpl, const KnowledgeBase& kb,
                          const BenchOptions& options = {});

/// Applies expert verdicts ([{id, schematic?, code?, notes?}]). Manual wins;
/// overturned automated decisions are logged. Throws Error(UnknownTaskId).
BenchReport ingest_manual_verdicts(BenchReport report, const nlohmann::json& verdicts);

std::string render_report(const BenchReport& report);

ordered_json to_json(const BenchReport& report);
BenchReport report_from_json(const ordered_json& doc);

} // namespace wirespec
