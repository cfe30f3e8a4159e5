#include "wirespec/cli.hpp"

#include "wirespec/bench.hpp"
#include "wirespec/errors.hpp"
#include "wirespec/export.hpp"
#include "wirespec/pinscore.hpp"
#include "wirespec/service.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <iostream>
#include <sstream>

namespace wirespec {

namespace {

struct Common {
    std::string kb_path = default_kb_path();
    std::string template_path = default_template_path();
    std::string providers_path;
    std::string model_id = GenerationParams{}.model_id;
    double temperature = 0.0;
    int max_tokens = GenerationParams{}.max_tokens;
    int max_reflections = GenerationLimits{}.max_reflections;

    GenerationParams params() const
    {
        GenerationParams p;
        p.model_id = model_id;
        p.temperature = temperature;
        p.max_tokens = max_tokens;
        return p;
    }

    std::vector<ProviderConfig> providers() const
    {
        return providers_path.empty() ? std::vector<ProviderConfig>{}
                                      : load_provider_configs(providers_path);
    }
};

void add_kb(CLI::App* cmd, Common& c)
{
    cmd->add_option("--kb", c.kb_path, "Parts knowledge base (JSON)")->capture_default_str();
}

void add_generation(CLI::App* cmd, Common& c)
{
    cmd->add_option("--template", c.template_path, "Prompt template (JSON)")->capture_default_str();
    cmd->add_option("--providers", c.providers_path, "Provider configuration file");
    cmd->add_option("--model-id", c.model_id, "Model id recorded in provenance and digests")
        ->capture_default_str();
    cmd->add_option("--temperature", c.temperature, "Sampling temperature")->capture_default_str();
    cmd->add_option("--max-tokens", c.max_tokens, "Completion token limit")->capture_default_str();
    cmd->add_option("--max-reflections", c.max_reflections, "Reflection rounds after the first")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
}

nlohmann::json load_json(const std::string& path)
{
    auto text = read_file(path);
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        throw Error(Errc::SchemaError, path + ": not valid JSON");
    }
    return j;
}

void emit(std::ostream& out, const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        out << text;
    } else {
        write_file(path, text);
    }
}

int exit_for(const Error& e)
{
    switch (e.code()) {
    case Errc::ParseFailure:
    case Errc::NoParsableContent:
    case Errc::PrereqFailed:
    case Errc::InvalidSpec:
        return kExitFindings;
    default:
        return kExitUsage;
    }
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Device specification toolkit: generate, check, score and export microcontroller "
                 "device designs."};
    app.name("wirespec");
    app.require_subcommand(1);
    app.fallthrough(false);

    Common common;
    std::function<int()> action;

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a device spec from a description");
    std::string desc_file, provider, out_dir, record;
    gen->add_option("--description-file", desc_file, "Description text ('-' for stdin)")->required();
    gen->add_option("--provider", provider, "replay:<file-or-dir> or a configured provider name")
        ->required();
    gen->add_option("--out", out_dir, "Directory for run artifacts");
    gen->add_option("--record", record, "Append new completions to this transcript");
    add_kb(gen, common);
    add_generation(gen, common);
    gen->callback([&] {
        action = [&] {
            auto description = read_file(desc_file);
            while (!description.empty() && (description.back() == '\n' || description.back() == '\r')) {
                description.pop_back();
            }
            auto kb = KnowledgeBase::load(common.kb_path);
            auto tpl = PromptTemplate::load(common.template_path);
            auto prov = make_provider(provider, common.providers(), record);
            PipelineContext ctx{*prov, tpl, kb, common.params(), {common.max_reflections}};
            auto run = generate_device(description, ctx);
            if (!out_dir.empty()) {
                write_run_artifacts(run, out_dir);
            }
            out << to_json(run).dump(2) << '\n';
            err << "termination: " << to_string(run.termination) << ", iterations: "
                << run.iterations << ", ERC errors: " << run.final_erc().error_count() << '\n';
            return run.final_erc().clean ? kExitOk : kExitFindings;
        };
    });

    // validate
    auto* val = app.add_subcommand("validate", "Parse a spec and check its structure");
    std::string spec_path;
    val->add_option("--spec", spec_path, "Device spec or model response ('-' for stdin)")->required();
    val->callback([&] {
        action = [&] {
            auto parsed = parse_device_spec(read_file(spec_path));
            auto report = validate(parsed.spec);
            ordered_json j;
            j["diagnostics"] = to_json(parsed.diagnostics);
            j["validation"] = to_json(report);
            out << j.dump(2) << '\n';
            bool ok = report.ok() && parsed.error_count() == 0;
            if (!ok) {
                err << parsed.error_count() << " parse error(s), " << report.findings.size()
                    << " structural finding(s)\n";
            }
            return ok ? kExitOk : kExitFindings;
        };
    });

    // erc
    auto* erc = app.add_subcommand("erc", "Run electrical rule checks on a spec");
    std::vector<std::string> rules;
    bool require_valid = false;
    erc->add_option("--spec", spec_path, "Device spec ('-' for stdin)")->required();
    erc->add_option("--rules", rules, "Rule ids to run (default: all)")->delimiter(',');
    erc->add_flag("--require-valid", require_valid,
                  "Refuse to check specs that fail structural validation");
    add_kb(erc, common);
    erc->callback([&] {
        action = [&] {
            auto parsed = parse_device_spec(read_file(spec_path));
            auto kb = KnowledgeBase::load(common.kb_path);
            ErcOptions opts{rules, require_valid, parsed.diagnostics};
            auto report = run_erc(parsed.spec, kb, opts);
            out << to_json(report).dump(2) << '\n';
            for (const auto& f : report.findings) {
                err << f.rule_id << ": " << f.message << '\n';
            }
            return report.findings.empty() ? kExitOk : kExitFindings;
        };
    });

    // score pinouts
    auto* score = app.add_subcommand("score", "Score generated artifacts");
    score->require_subcommand(1);
    auto* pinouts = score->add_subcommand("pinouts", "Score generated pinouts against the KB");
    std::string generated, report_path, overrides;
    pinouts->add_option("--generated", generated, "Generated pinouts {name: [pins]}")->required();
    pinouts->add_option("--report", report_path, "Write the report here (default stdout)");
    pinouts->add_option("--overrides", overrides, "Expert overrides [{component, strict, permissive}]");
    add_kb(pinouts, common);
    pinouts->callback([&] {
        action = [&] {
            auto kb = KnowledgeBase::load(common.kb_path);
            auto gen_doc = load_json(generated);
            std::optional<nlohmann::json> ov;
            if (!overrides.empty()) {
                ov = load_json(overrides);
            }
            auto report = score_document(kb, gen_doc, ov ? &*ov : nullptr);
            emit(out, report_path, to_json(report).dump(2) + "\n");
            if (report.aggregate) {
                err << "strict " << report.aggregate->strict_pass << "/" << report.aggregate->n
                    << ", permissive " << report.aggregate->permissive_pass << "/"
                    << report.aggregate->n << '\n';
            }
            return kExitOk;
        };
    });

    // bench
    auto* bench = app.add_subcommand("bench", "Benchmark harness");
    bench->require_subcommand(1);
    auto* brun = bench->add_subcommand("run", "Run every task once and judge the results");
    std::string tasks_path = default_tasks_path(), in_path, verdicts_path;
    int jobs = 1;
    brun->add_option("--tasks", tasks_path, "Task corpus")->capture_default_str();
    brun->add_option("--provider", provider, "replay:<file-or-dir> or a configured provider name")
        ->required();
    brun->add_option("--out", report_path, "Write the JSON report here (default stdout)");
    brun->add_option("--jobs", jobs, "Tasks run concurrently")->check(CLI::PositiveNumber);
    add_kb(brun, common);
    add_generation(brun, common);
    brun->callback([&] {
        action = [&] {
            auto tasks = load_tasks(tasks_path);
            auto kb = KnowledgeBase::load(common.kb_path);
            auto tpl = PromptTemplate::load(common.template_path);
            auto prov = make_provider(provider, common.providers());
            BenchOptions opts{common.params(), {common.max_reflections}, jobs};
            auto started = std::chrono::steady_clock::now();
            auto report = run_benchmark(tasks, *prov, tpl, kb, opts);
            auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started);
            emit(out, report_path, to_json(report).dump(2) + "\n");
            err << render_report(report) << "(" << tasks.size() << " tasks in " << secs.count()
                << " s)\n";
            bool failed = report.aggregates.schematic.fail + report.aggregates.code.fail > 0;
            return failed ? kExitFindings : kExitOk;
        };
    });
    auto* bver = bench->add_subcommand("verdicts", "Merge expert verdicts into a report");
    bver->add_option("--in", in_path, "Bench report")->required();
    bver->add_option("--verdicts", verdicts_path, "Expert verdicts [{id, schematic?, code?, notes?}]")
        ->required();
    bver->add_option("--out", report_path, "Write the merged report here (default stdout)");
    bver->callback([&] {
        action = [&] {
            auto report = report_from_json(ordered_json::parse(read_file(in_path)));
            report = ingest_manual_verdicts(std::move(report), load_json(verdicts_path));
            emit(out, report_path, to_json(report).dump(2) + "\n");
            for (const auto& line : report.log) {
                err << line << '\n';
            }
            bool failed = report.aggregates.schematic.fail + report.aggregates.code.fail > 0;
            return failed ? kExitFindings : kExitOk;
        };
    });
    auto* brender = bench->add_subcommand("render", "Print a report as a table");
    brender->add_option("--in", in_path, "Bench report")->required();
    brender->callback([&] {
        action = [&] {
            out << render_report(report_from_json(ordered_json::parse(read_file(in_path))));
            return kExitOk;
        };
    });

    // export
    auto* exp = app.add_subcommand("export", "Render a spec as a flat netlist or graph document");
    std::string format = "flat", out_path;
    exp->add_option("--spec", spec_path, "Device spec ('-' for stdin)")->required();
    exp->add_option("--format", format, "flat or graph")
        ->check(CLI::IsMember({"flat", "graph"}))
        ->capture_default_str();
    exp->add_option("--out", out_path, "Output file (default stdout)");
    add_kb(exp, common);
    exp->callback([&] {
        action = [&] {
            auto parsed = parse_device_spec(read_file(spec_path));
            std::string text;
            if (format == "flat") {
                auto kb = KnowledgeBase::load(common.kb_path);
                text = to_flat_netlist(parsed.spec, &kb);
            } else {
                text = to_graph_doc(parsed.spec);
            }
            emit(out, out_path, text);
            return kExitOk;
        };
    });

    // parts
    auto* parts = app.add_subcommand("parts", "Query the parts knowledge base");
    parts->require_subcommand(1);
    auto* show = parts->add_subcommand("show", "Show one component record");
    std::string part_name;
    show->add_option("name", part_name, "Component name or alias")->required();
    add_kb(show, common);
    show->callback([&] {
        action = [&] {
            auto kb = KnowledgeBase::load(common.kb_path);
            const auto* rec = kb.lookup(part_name);
            if (rec == nullptr) {
                err << "no component named '" << part_name << "'\n";
                return kExitFindings;
            }
            out << to_json(*rec).dump(2) << '\n';
            return kExitOk;
        };
    });
    auto* list = parts->add_subcommand("list", "List component names");
    add_kb(list, common);
    list->callback([&] {
        action = [&] {
            auto kb = KnowledgeBase::load(common.kb_path);
            for (const auto& [name, rec] : kb.records()) {
                out << name << '\t' << to_string(rec.category) << '\n';
            }
            return kExitOk;
        };
    });

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    std::string host = "127.0.0.1", state_dir = "wirespec-state", ui_dir;
    int port = 8080;
    serve->add_option("--port", port, "TCP port")->capture_default_str();
    serve->add_option("--host", host, "Bind address")->capture_default_str();
    serve->add_option("--state-dir", state_dir, "Session artifacts directory")->capture_default_str();
    serve->add_option("--with-ui", ui_dir, "Serve this static directory at /");
    add_kb(serve, common);
    add_generation(serve, common);
    serve->callback([&] {
        action = [&] {
            ServiceConfig cfg;
            cfg.state_dir = state_dir;
            cfg.kb = std::make_shared<KnowledgeBase>(KnowledgeBase::load(common.kb_path));
            cfg.tpl = std::make_shared<PromptTemplate>(PromptTemplate::load(common.template_path));
            cfg.params = common.params();
            cfg.limits = {common.max_reflections};
            cfg.providers = common.providers();
            if (!ui_dir.empty()) {
                cfg.ui_dir = ui_dir;
            }
            Service service(std::move(cfg));
            err << "listening on http://" << host << ":" << port << '\n';
            if (!service.listen(host, port)) {
                err << "could not bind " << host << ":" << port << '\n';
                return kExitUsage;
            }
            return kExitOk;
        };
    });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        // Synopsis of the deepest subcommand that was reached.
        const CLI::App* deepest = &app;
        while (!deepest->get_subcommands().empty()) {
            deepest = deepest->get_subcommands().front();
        }
        err << deepest->help();
        return kExitUsage;
    }

    if (!action) {
        err << app.help();
        return kExitUsage;
    }
    try {
        return action();
    } catch (const Error& e) {
        err << "error [" << errc_name(e.code()) << "]: " << e.what() << '\n';
        if (const auto* gf = dynamic_cast<const GenerationFailed*>(&e)) {
            for (const auto& d : gf->diagnostics()) {
                err << "  " << d.code << ": " << d.message << '\n';
            }
        }
        return exit_for(e);
    } catch (const nlohmann::json::exception& e) {
        err << "error [SchemaError]: " << e.what() << '\n';
        return kExitUsage;
    }
}

} // namespace wirespec
