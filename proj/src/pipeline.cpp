#include "wirespec/pipeline.hpp"

#include "wirespec/errors.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

namespace wirespec {

namespace {

std::string get_string(const nlohmann::json& doc, const char* key)
{
    auto it = doc.find(key);
    if (it == doc.end() || !it->is_string()) {
        throw Error(Errc::SchemaError, std::string("template: missing string '") + key + "'");
    }
    return it->get<std::string>();
}

} // namespace

void PromptTemplate::check() const
{
    auto positives = std::count_if(snippets.begin(), snippets.end(),
                                   [](const Snippet& s) { return s.kind == SnippetKind::Positive; });
    auto negatives = static_cast<long>(snippets.size()) - positives;
    if (positives < 2 || negatives < 1) {
        throw Error(Errc::SchemaError, "template needs >= 2 positive and >= 1 negative snippets");
    }
    if (reflection_checklist.empty()) {
        throw Error(Errc::SchemaError, "template reflection checklist is empty");
    }
    if (stop_token.empty()) {
        throw Error(Errc::SchemaError, "template stop token is empty");
    }
    std::string all = preamble + format_instructions + one_shot_example.description +
                      one_shot_example.response;
    for (const auto& s : snippets) {
        all += s.title + s.text;
    }
    for (const auto& item : reflection_checklist) {
        all += item;
    }
    if (all.find(stop_token) != std::string::npos) {
        throw Error(Errc::SchemaError, "stop token must not appear in the template text");
    }
    if (all.find(kNegativeMarker) != std::string::npos ||
        all.find(kPositiveMarker) != std::string::npos) {
        throw Error(Errc::SchemaError, "snippet markers must not appear in the template text");
    }
}

PromptTemplate PromptTemplate::from_json(const nlohmann::json& doc)
{
    if (!doc.is_object()) {
        throw Error(Errc::SchemaError, "template must be an object");
    }
    PromptTemplate tpl;
    tpl.preamble = get_string(doc, "preamble");
    tpl.format_instructions = get_string(doc, "format_instructions");
    auto shot = doc.find("one_shot_example");
    if (shot == doc.end() || !shot->is_object()) {
        throw Error(Errc::SchemaError, "template needs exactly one one_shot_example object");
    }
    tpl.one_shot_example = {get_string(*shot, "description"), get_string(*shot, "response")};
    for (const auto& s : doc.value("snippets", nlohmann::json::array())) {
        auto kind = get_string(s, "kind");
        if (kind != "positive" && kind != "negative") {
            throw Error(Errc::SchemaError, "snippet kind must be positive or negative");
        }
        tpl.snippets.push_back({kind == "positive" ? SnippetKind::Positive : SnippetKind::Negative,
                                get_string(s, "title"), get_string(s, "text")});
    }
    for (const auto& item : doc.value("reflection_checklist", nlohmann::json::array())) {
        tpl.reflection_checklist.push_back(item.get<std::string>());
    }
    tpl.stop_token = doc.value("stop_token", tpl.stop_token);
    tpl.check();
    return tpl;
}

PromptTemplate PromptTemplate::load(const std::string& path)
{
    try {
        return from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::SchemaError, "template " + path + ": " + e.what());
    }
}

std::string default_template_path()
{
    return std::string(WIRESPEC_DATA_DIR) + "/template.prompt.json";
}

std::string assemble_generation_prompt(const PromptTemplate& tpl, const std::string& description)
{
    std::ostringstream p;
    p << tpl.preamble << "\n\n";
    p << "# Output format\n" << tpl.format_instructions << "\n\n";
    p << "# Worked example\n";
    p << "## Device description\n" << tpl.one_shot_example.description << "\n\n";
    p << "## Response\n" << tpl.one_shot_example.response << "\n\n";
    p << "# Partial examples\n";
    for (const auto& s : tpl.snippets) {
        p << (s.kind == SnippetKind::Positive ? kPositiveMarker : kNegativeMarker) << ' '
          << s.title << '\n'
          << s.text << "\n\n";
    }
    p << "# Task\n## Device description\n" << description;
    return p.str();
}

std::string assemble_reflection_prompt(const PromptTemplate& tpl, const DeviceSpec& spec,
                                       const ErcReport& last_erc)
{
    std::ostringstream p;
    p << tpl.preamble << "\n\n";
    p << "# Review checklist\n"
         "Check the device specification below for each of these common errors:\n";
    for (std::size_t i = 0; i < tpl.reflection_checklist.size(); ++i) {
        p << (i + 1) << ". " << tpl.reflection_checklist[i] << '\n';
    }
    p << "\n# Current device specification\n```json\n" << render_document(spec) << "```\n";
    if (spec.code) {
        p << "\n```cpp\n" << spec.code->source;
        if (!spec.code->source.empty() && spec.code->source.back() != '\n') {
            p << '\n';
        }
        p << "```\n";
    }
    p << "\n# Automated check findings\n";
    if (last_erc.findings.empty()) {
        p << "none\n";
    } else {
        for (const auto& f : last_erc.findings) {
            p << "- " << explain(f) << '\n';
        }
    }
    p << "\n# Instructions\n"
         "If any error remains, reply with the complete corrected specification in the "
         "output format above. If you find no further errors, reply with exactly: "
      << tpl.stop_token << '\n';
    return p.str();
}

std::string assemble_refine_prompt(const PromptTemplate& tpl, const DeviceSpec& current,
                                   const std::string& user_text)
{
    std::ostringstream p;
    p << tpl.preamble << "\n\n";
    p << "# Output format\n" << tpl.format_instructions << "\n\n";
    p << "# Current device specification\n```json\n" << render_document(current) << "```\n";
    if (current.code) {
        p << "\n```cpp\n" << current.code->source;
        if (!current.code->source.empty() && current.code->source.back() != '\n') {
            p << '\n';
        }
        p << "```\n";
    }
    p << "\n# Requested change\n" << user_text << "\n\n";
    p << "# Task\nRevise the device so it satisfies the requested change. Reply with the "
         "complete specification, every section included, in the output format above.\n";
    return p.str();
}

namespace {

// Reflection prompt for a round whose previous response could not be read.
std::string unparsable_reflection_prompt(const PromptTemplate& tpl, const std::string& response,
                                         const std::vector<ParseDiagnostic>& diagnostics)
{
    std::ostringstream p;
    p << tpl.preamble << "\n\n";
    p << "# Output format\n" << tpl.format_instructions << "\n\n";
    p << "# Previous response\nThe previous response could not be read as a device "
         "specification.\n\n"
      << response << "\n\n# Parser diagnostics\n";
    if (diagnostics.empty()) {
        p << "none\n";
    }
    for (const auto& d : diagnostics) {
        p << "- " << severity_name(d.severity) << ' ' << d.code << ": " << d.message << '\n';
    }
    p << "\n# Instructions\nReply with the complete specification in the output format above.\n";
    return p.str();
}

std::optional<ParseResult> try_parse(const std::string& text, std::vector<ParseDiagnostic>& diags)
{
    try {
        auto r = parse_device_spec(text);
        diags = r.diagnostics;
        return r;
    } catch (const Error& e) {
        if (e.code() != Errc::NoParsableContent) {
            throw;
        }
        diags.clear();
        return std::nullopt;
    }
}

// Sections a revision omits are carried over from the previous working spec.
ParseResult merge_revision(ParseResult revision, const DeviceSpec* previous,
                           const std::vector<ParseDiagnostic>& previous_diags)
{
    if (previous == nullptr) {
        return revision;
    }
    auto drop_missing = [&](const char* name) {
        auto msg = std::string("missing section: ") + name;
        std::erase_if(revision.diagnostics, [&](const ParseDiagnostic& d) {
            return d.code == "MissingSection" && d.message == msg;
        });
    };
    auto& s = revision.spec;
    if (!revision.sections.bom) {
        s.bom = previous->bom;
        drop_missing("bill_of_materials");
    }
    if (!revision.sections.pinouts) {
        s.pinouts = previous->pinouts;
        drop_missing("pinouts");
    }
    if (!revision.sections.schematic) {
        s.connections = previous->connections;
        drop_missing("schematic");
        for (const auto& d : previous_diags) {
            if (d.code == "RangeShortcut") {
                revision.diagnostics.push_back(d);
            }
        }
    }
    if (!revision.sections.code) {
        s.code = previous->code;
        drop_missing("code");
    }
    return revision;
}

ErcReport check(const DeviceSpec& spec, const std::vector<ParseDiagnostic>& diags,
                const KnowledgeBase& kb)
{
    ErcOptions opts;
    opts.require_valid = false;
    opts.diagnostics = diags;
    return run_erc(spec, kb, opts);
}

GenerationRun run_loop(const std::string& description, const std::string& first_prompt,
                       const PipelineContext& ctx)
{
    if (ctx.limits.max_reflections < 0) {
        throw Error(Errc::ConfigError, "max_reflections must be >= 0");
    }

    GenerationRun run;
    run.description = description;
    run.transcript_ref = ctx.provider.describe();

    std::optional<DeviceSpec> working;
    std::vector<ParseDiagnostic> working_diags;
    std::string spec_timestamp;
    std::string last_response;
    std::vector<ParseDiagnostic> last_diags;
    bool last_parsed = false;
    bool stopped = false;
    auto first_digest = prompt_digest(first_prompt, ctx.params);

    for (int round = 0; round <= ctx.limits.max_reflections; ++round) {
        std::string prompt;
        if (round == 0) {
            prompt = first_prompt;
        } else if (working) {
            prompt = assemble_reflection_prompt(ctx.tpl, *working, run.erc_history.back());
        } else {
            prompt = unparsable_reflection_prompt(ctx.tpl, last_response, last_diags);
        }

        GenerationRound r;
        r.index = round;
        r.prompt_digest = prompt_digest(prompt, ctx.params);
        auto completion = ctx.provider.complete(prompt, ctx.params);
        r.response_text = completion.text;
        r.stop_token = round > 0 && completion.text.find(ctx.tpl.stop_token) != std::string::npos;
        ++run.iterations;

        auto parsed = try_parse(completion.text, r.diagnostics);
        last_parsed = parsed.has_value();
        if (parsed) {
            auto merged = merge_revision(std::move(*parsed), working ? &*working : nullptr,
                                         working_diags);
            r.parsed = true;
            r.diagnostics = merged.diagnostics;
            working = std::move(merged.spec);
            working_diags = std::move(merged.diagnostics);
            spec_timestamp = completion.timestamp;
        } else if (!r.stop_token) {
            run.warnings.push_back("round " + std::to_string(round) +
                                   ": response could not be parsed; keeping previous spec");
        }
        last_response = completion.text;
        last_diags = r.diagnostics;

        if (working) {
            working->description = description;
            run.erc_history.push_back(check(*working, working_diags, ctx.kb));
            r.spec = working;
        }
        run.rounds.push_back(std::move(r));

        if (run.rounds.back().stop_token) {
            stopped = true;
            break;
        }
    }

    if (!working) {
        throw GenerationFailed("no round produced a parsable device specification", last_diags);
    }
    if (stopped) {
        run.termination = Termination::StopToken;
    } else if (!last_parsed) {
        run.termination = Termination::ParseFailure;
    } else {
        run.termination = Termination::MaxIterations;
    }

    run.spec = std::move(*working);
    run.spec.provenance.model_id = ctx.params.model_id;
    run.spec.provenance.prompt_digest = first_digest;
    run.spec.provenance.reflection_iterations = run.iterations - 1;
    run.spec.provenance.created_at = spec_timestamp;
    run.diagnostics = std::move(working_diags);
    // Provenance is part of the document; recheck so the last report matches it.
    run.erc_history.back() = check(run.spec, run.diagnostics, ctx.kb);
    return run;
}

} // namespace

std::string_view to_string(Termination t)
{
    switch (t) {
    case Termination::StopToken: return "stop_token";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::ParseFailure: return "parse_failure";
    }
    return "max_iterations";
}

GenerationRun generate_device(const std::string& description, const PipelineContext& ctx)
{
    return run_loop(description, assemble_generation_prompt(ctx.tpl, description), ctx);
}

Session generate_turn(Session session, const std::string& description, const PipelineContext& ctx)
{
    auto run = generate_device(description, ctx);
    session.turns.push_back({description, std::move(run)});
    return session;
}

Session refine(Session session, const std::string& user_text, const PipelineContext& ctx)
{
    const auto* base = session.current();
    if (base == nullptr) {
        throw Error(Errc::NoBaseSpec, "refine needs a generated device first");
    }
    auto run = run_loop(base->description, assemble_refine_prompt(ctx.tpl, *base, user_text), ctx);
    session.turns.push_back({user_text, std::move(run)});
    return session;
}

ordered_json to_json(const GenerationRun& run)
{
    ordered_json j;
    j["description"] = run.description;
    j["iterations"] = run.iterations;
    j["termination"] = to_string(run.termination);
    j["transcript_ref"] = run.transcript_ref;
    j["spec"] = to_json(run.spec);
    j["diagnostics"] = to_json(run.diagnostics);
    j["erc"] = to_json(run.final_erc());
    auto history = ordered_json::array();
    for (const auto& r : run.erc_history) {
        ordered_json h;
        h["errors"] = r.error_count();
        h["warnings"] = r.findings.size() - r.error_count();
        h["clean"] = r.clean;
        history.push_back(std::move(h));
    }
    j["erc_history"] = std::move(history);
    auto rounds = ordered_json::array();
    for (const auto& r : run.rounds) {
        ordered_json o;
        o["index"] = r.index;
        o["prompt_digest"] = r.prompt_digest;
        o["parsed"] = r.parsed;
        o["stop_token"] = r.stop_token;
        o["diagnostics"] = to_json(r.diagnostics);
        rounds.push_back(std::move(o));
    }
    j["rounds"] = std::move(rounds);
    j["warnings"] = run.warnings;
    return j;
}

void write_run_artifacts(const GenerationRun& run, const std::string& dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto base = fs::path(dir);
    write_file((base / "run.json").string(), to_json(run).dump(2) + "\n");
    std::size_t erc_index = 0;
    for (const auto& r : run.rounds) {
        auto stem = "round-" + std::to_string(r.index);
        write_file((base / (stem + ".response.txt")).string(), r.response_text);
        if (r.spec) {
            write_file((base / (stem + ".device.json")).string(), render_document(*r.spec));
            if (erc_index < run.erc_history.size()) {
                write_file((base / (stem + ".erc.json")).string(),
                           to_json(run.erc_history[erc_index++]).dump(2) + "\n");
            }
        }
    }
    write_file((base / "final.device.json").string(), render_document(run.spec));
}

} // namespace wirespec
