#pragma once

#include "wirespec/partsdb.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wirespec {

/// Expert verdict that replaces the automated flags for one component.
struct ScoreOverride {
    bool strict = false;
    bool permissive = false;
    std::string reviewer;
    std::string note;
};

struct PinoutScore {
    std::string component;
    bool strict = false;
    bool permissive = false;
    std::vector<std::string> missing_critical;
    std::vector<std::string> missing_noncritical;
    std::vector<std::string> unknown_generated;
    std::optional<ScoreOverride> override_verdict;

    bool effective_strict() const { return override_verdict ? override_verdict->strict : strict; }
    bool effective_permissive() const
    {
        return override_verdict ? override_verdict->permissive : permissive;
    }
};

struct ScoreAggregate {
    std::size_t n = 0;
    std::size_t strict_pass = 0;
    std::size_t permissive_pass = 0;
    double strict_rate = 0.0;
    double permissive_rate = 0.0;
};

/// strict: the generated names cover exactly the component's pins.
/// permissive: every critical pin is present; unknown extras are reported only.
PinoutScore score_pinout(const ComponentRecord& record, std::span<const std::string> generated);

/// Throws Error(EmptyInput) for an empty list.
ScoreAggregate aggregate(std::span<const PinoutScore> scores);

/// Attaches an override. Throws Error(SchemaError) for strict without permissive.
void apply_override(PinoutScore& score, ScoreOverride verdict);

ordered_json to_json(const PinoutScore& score);
ordered_json to_json(const ScoreAggregate& agg);

struct PinoutReport {
    std::vector<PinoutScore> scores;
    std::vector<std::string> unscored;  // generated components absent from the KB
    std::optional<ScoreAggregate> aggregate;
};

/// Scores a generated-pinouts document ({"name": [pins...]}) against the KB,
/// applying optional overrides ([{component, strict, permissive, reviewer, note}]).
PinoutReport score_document(const KnowledgeBase& kb, const nlohmann::json& generated,
                            const nlohmann::json* overrides);

ordered_json to_json(const PinoutReport& report);

} // namespace wirespec
