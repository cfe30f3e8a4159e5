#pragma once

#include "wirespec/devicespec.hpp"
#include "wirespec/erc.hpp"
#include "wirespec/errors.hpp"
#include "wirespec/llmgateway.hpp"
#include "wirespec/partsdb.hpp"
#include "wirespec/specparser.hpp"

#include <optional>
#include <string>
#include <vector>

namespace wirespec {

enum class SnippetKind { Positive, Negative };

struct Snippet {
    SnippetKind kind = SnippetKind::Positive;
    std::string title;
    std::string text;
};

struct WorkedExample {
    std::string description;
    std::string response;
};

inline constexpr std::string_view kPositiveMarker = "[POSITIVE SNIPPET]";
inline constexpr std::string_view kNegativeMarker = "[NEGATIVE SNIPPET]";

/// Prompt material for generation, reflection and refinement.
struct PromptTemplate {
    std::string preamble;
    std::string format_instructions;
    WorkedExample one_shot_example;
    std::vector<Snippet> snippets;
    std::vector<std::string> reflection_checklist;
    std::string stop_token = "ALL-CHECKS-PASSED";

    /// Throws Error(SchemaError) unless there are >= 2 positive and >= 1
    /// negative snippets, a non-empty checklist and a stop token that occurs
    /// nowhere else in the template.
    void check() const;

    static PromptTemplate from_json(const nlohmann::json& doc);
    static PromptTemplate load(const std::string& path);
};

std::string default_template_path();

std::string assemble_generation_prompt(const PromptTemplate& tpl, const std::string& description);

std::string assemble_reflection_prompt(const PromptTemplate& tpl, const DeviceSpec& spec,
                                       const ErcReport& last_erc);

std::string assemble_refine_prompt(const PromptTemplate& tpl, const DeviceSpec& current,
                                   const std::string& user_text);

/// Error(ParseFailure) raised when no round parses; carries the last round's
/// parser diagnostics.
class GenerationFailed : public Error {
public:
    GenerationFailed(const std::string& message, std::vector<ParseDiagnostic> diagnostics)
        : Error(Errc::ParseFailure, message), diagnostics_(std::move(diagnostics)) {}

    const std::vector<ParseDiagnostic>& diagnostics() const noexcept { return diagnostics_; }

private:
    std::vector<ParseDiagnostic> diagnostics_;
};

enum class Termination { StopToken, MaxIterations, ParseFailure };

std::string_view to_string(Termination t);

struct GenerationRound {
    int index = 0;  // 0 = initial completion
    std::string prompt_digest;
    std::string response_text;
    bool parsed = false;
    bool stop_token = false;
    std::vector<ParseDiagnostic> diagnostics;
    std::optional<DeviceSpec> spec;  // working spec after this round, if any
};

struct GenerationRun {
    std::string description;
    DeviceSpec spec;
    std::vector<ParseDiagnostic> diagnostics;  // from the parse that produced `spec`
    int iterations = 0;
    Termination termination = Termination::MaxIterations;
    std::string transcript_ref;
    std::vector<ErcReport> erc_history;
    std::vector<GenerationRound> rounds;
    std::vector<std::string> warnings;

    const ErcReport& final_erc() const { return erc_history.back(); }
};

struct GenerationLimits {
    int max_reflections = 3;
};

struct PipelineContext {
    Provider& provider;
    const PromptTemplate& tpl;
    const KnowledgeBase& kb;
    GenerationParams params{};
    GenerationLimits limits{};
};

/// Initial completion, then up to `max_reflections` reflection rounds; stops
/// early once a response carries the stop token. Throws Error(ParseFailure)
/// when no round yields a parsable spec.
GenerationRun generate_device(const std::string& description, const PipelineContext& ctx);

struct Turn {
    std::string user_text;
    GenerationRun run;
};

struct Session {
    std::string id;
    std::vector<Turn> turns;

    const DeviceSpec* current() const { return turns.empty() ? nullptr : &turns.back().run.spec; }
};

/// First (or fresh) generation turn on a session.
Session generate_turn(Session session, const std::string& description, const PipelineContext& ctx);

/// Clarification turn over the current spec. Throws Error(NoBaseSpec) on a
/// session without a generated spec.
Session refine(Session session, const std::string& user_text, const PipelineContext& ctx);

/// Run summary; byte-stable for equal runs.
ordered_json to_json(const GenerationRun& run);

/// Writes run.json, per-round specs and ERC reports, and final.device.json.
void write_run_artifacts(const GenerationRun& run, const std::string& dir);

} // namespace wirespec
