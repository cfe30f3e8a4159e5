#include "wirespec/pinscore.hpp"

#include "wirespec/errors.hpp"

#include <algorithm>
#include <set>

namespace wirespec {

PinoutScore score_pinout(const ComponentRecord& record, std::span<const std::string> generated)
{
    PinoutScore score;
    score.component = record.canonical_name;

    std::set<std::string> present;
    std::set<std::string> unknown;
    for (const auto& name : generated) {
        if (auto canonical = normalize_pin(record, name)) {
            present.insert(*canonical);
        } else {
            unknown.insert(name);
        }
    }

    for (const auto& pin : record.pins) {
        if (present.count(pin.canonical) != 0) {
            continue;
        }
        (pin.critical ? score.missing_critical : score.missing_noncritical).push_back(pin.canonical);
    }
    score.unknown_generated.assign(unknown.begin(), unknown.end());

    score.permissive = score.missing_critical.empty();
    score.strict = score.permissive && score.missing_noncritical.empty() &&
                   score.unknown_generated.empty();
    return score;
}

ScoreAggregate aggregate(std::span<const PinoutScore> scores)
{
    if (scores.empty()) {
        throw Error(Errc::EmptyInput, "cannot aggregate zero scores");
    }
    ScoreAggregate agg;
    agg.n = scores.size();
    for (const auto& s : scores) {
        agg.strict_pass += s.effective_strict() ? 1 : 0;
        agg.permissive_pass += s.effective_permissive() ? 1 : 0;
    }
    agg.strict_rate = static_cast<double>(agg.strict_pass) / static_cast<double>(agg.n);
    agg.permissive_rate = static_cast<double>(agg.permissive_pass) / static_cast<double>(agg.n);
    return agg;
}

void apply_override(PinoutScore& score, ScoreOverride verdict)
{
    if (verdict.strict && !verdict.permissive) {
        throw Error(Errc::SchemaError,
                    "override for " + score.component + " is strict but not permissive");
    }
    score.override_verdict = std::move(verdict);
}

ordered_json to_json(const PinoutScore& score)
{
    ordered_json j;
    j["component"] = score.component;
    j["strict"] = score.effective_strict();
    j["permissive"] = score.effective_permissive();
    j["missing_critical"] = score.missing_critical;
    j["missing_noncritical"] = score.missing_noncritical;
    j["unknown_generated"] = score.unknown_generated;
    if (score.override_verdict) {
        ordered_json o;
        o["automated_strict"] = score.strict;
        o["automated_permissive"] = score.permissive;
        o["reviewer"] = score.override_verdict->reviewer;
        o["note"] = score.override_verdict->note;
        j["override"] = std::move(o);
    }
    return j;
}

ordered_json to_json(const ScoreAggregate& agg)
{
    ordered_json j;
    j["n"] = agg.n;
    j["strict_rate"] = agg.strict_rate;
    j["permissive_rate"] = agg.permissive_rate;
    return j;
}

namespace {

std::vector<std::string> pin_names(const nlohmann::json& list, const std::string& component)
{
    if (!list.is_array()) {
        throw Error(Errc::SchemaError, "pins for '" + component + "' must be an array");
    }
    std::vector<std::string> out;
    for (const auto& p : list) {
        if (p.is_string()) {
            out.push_back(p.get<std::string>());
        } else if (p.is_object() && p.contains("pin") && p["pin"].is_string()) {
            out.push_back(p["pin"].get<std::string>());
        } else {
            throw Error(Errc::SchemaError, "bad pin entry for '" + component + "'");
        }
    }
    return out;
}

} // namespace

PinoutReport score_document(const KnowledgeBase& kb, const nlohmann::json& generated,
                            const nlohmann::json* overrides)
{
    if (!generated.is_object()) {
        throw Error(Errc::SchemaError, "generated pinouts must map component name to pin list");
    }
    PinoutReport report;
    for (const auto& [name, pins] : generated.items()) {
        const auto* rec = kb.lookup(name);
        if (rec == nullptr) {
            report.unscored.push_back(name);
            continue;
        }
        auto names = pin_names(pins, name);
        report.scores.push_back(score_pinout(*rec, names));
    }

    if (overrides != nullptr) {
        if (!overrides->is_array()) {
            throw Error(Errc::SchemaError, "overrides must be an array");
        }
        for (const auto& o : *overrides) {
            if (!o.is_object() || !o.contains("component") || !o.contains("strict") ||
                !o.contains("permissive")) {
                throw Error(Errc::SchemaError, "override needs component, strict, permissive");
            }
            const auto* rec = kb.lookup(o["component"].get<std::string>());
            auto it = std::find_if(report.scores.begin(), report.scores.end(),
                                   [&](const PinoutScore& s) {
                                       return rec != nullptr && s.component == rec->canonical_name;
                                   });
            if (it == report.scores.end()) {
                throw Error(Errc::SchemaError, "override for unscored component '" +
                                                   o["component"].get<std::string>() + "'");
            }
            apply_override(*it, {o["strict"].get<bool>(), o["permissive"].get<bool>(),
                                 o.value("reviewer", ""), o.value("note", "")});
        }
    }

    if (!report.scores.empty()) {
        report.aggregate = aggregate(report.scores);
    }
    return report;
}

ordered_json to_json(const PinoutReport& report)
{
    ordered_json j;
    auto scores = ordered_json::array();
    for (const auto& s : report.scores) {
        scores.push_back(to_json(s));
    }
    j["scores"] = std::move(scores);
    j["aggregate"] = report.aggregate ? to_json(*report.aggregate) : ordered_json(nullptr);
    j["unscored"] = report.unscored;
    return j;
}

} // namespace wirespec
