#include "wirespec/bench.hpp"

#include "wirespec/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

namespace wirespec {

std::string_view to_string(Verdict v)
{
    switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::NeedsReview: return "needs_review";
    }
    return "needs_review";
}

Verdict parse_verdict(std::string_view s)
{
    if (s == "pass") return Verdict::Pass;
    if (s == "fail") return Verdict::Fail;
    if (s == "needs_review") return Verdict::NeedsReview;
    throw Error(Errc::SchemaError, "unknown verdict '" + std::string(s) + "'");
}

namespace {

std::string need_string(const nlohmann::json& j, const char* key, const std::string& ctx)
{
    auto it = j.find(key);
    if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
        throw Error(Errc::SchemaError, ctx + ": missing string '" + key + "'");
    }
    return it->get<std::string>();
}

AutoCheck parse_check(const nlohmann::json& j, const std::string& ctx)
{
    if (!j.is_object()) {
        throw Error(Errc::SchemaError, ctx + ": auto_check must be an object");
    }
    auto kind = need_string(j, "kind", ctx);
    AutoCheck c;
    if (kind == "erc_clean") {
        c.kind = CheckKind::ErcClean;
    } else if (kind == "requires_part") {
        c.kind = CheckKind::RequiresPart;
        c.args = {need_string(j, "name", ctx)};
    } else if (kind == "requires_net") {
        c.kind = CheckKind::RequiresNet;
        auto pins = j.find("pins");
        if (pins == j.end() || !pins->is_array() || pins->size() != 2) {
            throw Error(Errc::SchemaError, ctx + ": requires_net needs two pins");
        }
        for (const auto& p : *pins) {
            auto s = p.get<std::string>();
            if (s.find('.') == std::string::npos) {
                throw Error(Errc::SchemaError, ctx + ": requires_net pin '" + s +
                                                   "' must be 'part name.pin'");
            }
            c.args.push_back(s);
        }
    } else if (kind == "code_contains") {
        c.kind = CheckKind::CodeContains;
        c.args = {need_string(j, "token", ctx)};
    } else {
        throw Error(Errc::SchemaError, ctx + ": unknown check kind '" + kind + "'");
    }
    return c;
}

ManualVerdict parse_manual(const nlohmann::json& j)
{
    ManualVerdict m;
    if (j.contains("schematic") && !j["schematic"].is_null()) {
        m.schematic = parse_verdict(j["schematic"].get<std::string>());
    }
    if (j.contains("code") && !j["code"].is_null()) {
        m.code = parse_verdict(j["code"].get<std::string>());
    }
    m.notes = j.value("notes", "");
    return m;
}

ordered_json rate_json(const RateCell& c)
{
    auto r = c.rate();
    return r ? ordered_json(*r) : ordered_json(nullptr);
}

ordered_json cell_json(const RateCell& c)
{
    ordered_json j;
    j["pass"] = c.pass;
    j["fail"] = c.fail;
    j["needs_review"] = c.needs_review;
    return j;
}

void count(RateCell& cell, Verdict v)
{
    switch (v) {
    case Verdict::Pass: ++cell.pass; break;
    case Verdict::Fail: ++cell.fail; break;
    case Verdict::NeedsReview: ++cell.needs_review; break;
    }
}

// Manual verdicts replace automated ones; overturning a decided verdict is logged.
void apply_manual(const std::string& id, TaskResult& result, const ManualVerdict& m,
                  std::vector<std::string>& log)
{
    auto apply = [&](const char* what, Verdict& slot, const std::optional<Verdict>& v) {
        if (!v) {
            return;
        }
        if (slot != Verdict::NeedsReview && slot != *v) {
            log.push_back(id + ": manual " + what + " verdict '" + std::string(to_string(*v)) +
                          "' overrides automated '" + std::string(to_string(slot)) + "'");
        }
        slot = *v;
        result.source = "manual";
    };
    apply("schematic", result.schematic, m.schematic);
    apply("code", result.code, m.code);
    if (!m.notes.empty()) {
        result.reasons.push_back("manual: " + m.notes);
    }
}

std::string pct(const RateCell& c)
{
    auto r = c.rate();
    return r ? std::to_string(std::lround(*r * 100.0)) + "%" : "n/a";
}

std::string_view mark(Verdict v)
{
    switch (v) {
    case Verdict::Pass: return "✓";
    case Verdict::Fail: return "✗";
    case Verdict::NeedsReview: return "?";
    }
    return "?";
}

// Does `member` sit on a part of kind `name` at pin `pin`?
bool matches_endpoint(const PinRef& member, const DeviceSpec& spec, const KnowledgeBase& kb,
                      const std::string& name, const std::string& pin)
{
    const auto* item = spec.find_part(member.part);
    if (item == nullptr) {
        return false;
    }
    const auto* want = kb.lookup(name);
    const auto* have = kb.resolve(*item);
    if (want != nullptr) {
        if (have != want) {
            return false;
        }
        auto a = normalize_pin(*have, member.pin);
        return a && a == normalize_pin(*have, pin);
    }
    bool same_part = normalize_name(item->part_type) == normalize_name(name) ||
                     (item->value && normalize_name(*item->value) == normalize_name(name));
    return same_part && normalize_name(member.pin) == normalize_name(pin);
}

bool has_part(const DeviceSpec& spec, const KnowledgeBase& kb, const std::string& name)
{
    const auto* want = kb.lookup(name);
    return std::any_of(spec.bom.begin(), spec.bom.end(), [&](const BomItem& item) {
        if (want != nullptr) {
            return kb.resolve(item) == want;
        }
        return normalize_name(item.part_type) == normalize_name(name);
    });
}

bool has_net(const DeviceSpec& spec, const KnowledgeBase& kb, const std::string& a,
             const std::string& b)
{
    auto split = [](const std::string& s) {
        auto dot = s.rfind('.');
        return std::pair{s.substr(0, dot), s.substr(dot + 1)};
    };
    auto [an, ap] = split(a);
    auto [bn, bp] = split(b);
    for (const auto& net : build_nets(spec.connections)) {
        for (const auto& x : net.members) {
            if (!matches_endpoint(x, spec, kb, an, ap)) {
                continue;
            }
            for (const auto& y : net.members) {
                if (!(x == y) && matches_endpoint(y, spec, kb, bn, bp)) {
                    return true;
                }
            }
        }
    }
    return false;
}

} // namespace

std::optional<double> RateCell::rate() const
{
    if (pass + fail == 0) {
        return std::nullopt;
    }
    return static_cast<double>(pass) / static_cast<double>(pass + fail);
}

std::vector<BenchTask> parse_tasks(const nlohmann::json& doc)
{
    const nlohmann::json* list = &doc;
    if (doc.is_object() && doc.contains("tasks")) {
        list = &doc["tasks"];
    }
    if (!list->is_array() || list->empty()) {
        throw Error(Errc::SchemaError, "task file must hold a non-empty task list");
    }
    std::vector<BenchTask> tasks;
    std::set<std::string> ids;
    for (const auto& j : *list) {
        if (!j.is_object()) {
            throw Error(Errc::SchemaError, "task entries must be objects");
        }
        BenchTask t;
        t.id = need_string(j, "id", "task");
        auto ctx = "task " + t.id;
        t.category = need_string(j, "category", ctx);
        if (std::find(kBenchCategories.begin(), kBenchCategories.end(), t.category) ==
            kBenchCategories.end()) {
            throw Error(Errc::SchemaError, ctx + ": unknown category '" + t.category + "'");
        }
        t.title = j.value("title", t.id);
        t.description = need_string(j, "description", ctx);
        for (const auto& c : j.value("auto_checks", nlohmann::json::array())) {
            t.auto_checks.push_back(parse_check(c, ctx));
        }
        if (j.contains("manual_verdict") && !j["manual_verdict"].is_null()) {
            t.manual_verdict = parse_manual(j["manual_verdict"]);
        }
        if (!ids.insert(t.id).second) {
            throw Error(Errc::DuplicateId, "duplicate task id '" + t.id + "'");
        }
        tasks.push_back(std::move(t));
    }
    return tasks;
}

std::vector<BenchTask> load_tasks(const std::string& path)
{
    auto text = read_file(path);
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw Error(Errc::SchemaError, path + ": empty task file");
    }
    try {
        return parse_tasks(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::SchemaError, path + ": " + e.what());
    }
}

std::string default_tasks_path()
{
    return std::string(WIRESPEC_DATA_DIR) + "/micro25.tasks.json";
}

const TaskResult* BenchReport::find(std::string_view id) const
{
    for (const auto& [k, v] : per_task) {
        if (k == id) {
            return &v;
        }
    }
    return nullptr;
}

void BenchReport::recompute()
{
    aggregates = {};
    for (const auto& [id, r] : per_task) {
        count(aggregates.schematic, r.schematic);
        count(aggregates.code, r.code);
        auto& [s, c] = aggregates.by_category[r.category];
        count(s, r.schematic);
        count(c, r.code);
    }
}

TaskResult judge(const BenchTask& task, const GenerationRun& run, const KnowledgeBase& kb)
{
    TaskResult r;
    r.category = task.category;
    r.title = task.title;
    r.termination = std::string(to_string(run.termination));
    r.iterations = run.iterations;
    const auto& erc = run.final_erc();
    r.erc_errors = erc.error_count();
    const auto& spec = run.spec;

    bool schematic_failed = !erc.clean;
    bool schematic_decisive = false;
    bool code_failed = false;
    bool code_decisive = false;
    if (!erc.clean) {
        std::set<std::string> rules;
        for (const auto& f : erc.findings) {
            if (f.severity == Severity::Error) {
                rules.insert(f.rule_id);
            }
        }
        std::string joined;
        for (const auto& id : rules) {
            joined += (joined.empty() ? "" : ", ") + id;
        }
        r.reasons.push_back("ERC errors: " + joined);
    }

    for (const auto& check : task.auto_checks) {
        switch (check.kind) {
        case CheckKind::ErcClean:
            break;  // always applied
        case CheckKind::RequiresPart:
            schematic_decisive = true;
            if (!has_part(spec, kb, check.args[0])) {
                schematic_failed = true;
                r.reasons.push_back("missing part: " + check.args[0]);
            }
            break;
        case CheckKind::RequiresNet:
            schematic_decisive = true;
            if (!has_net(spec, kb, check.args[0], check.args[1])) {
                schematic_failed = true;
                r.reasons.push_back("missing net: " + check.args[0] + " - " + check.args[1]);
            }
            break;
        case CheckKind::CodeContains:
            code_decisive = true;
            if (!spec.code || spec.code->source.find(check.args[0]) == std::string::npos) {
                code_failed = true;
                r.reasons.push_back("code lacks: " + check.args[0]);
            }
            break;
        }
    }

    bool schematic_warnings = false;
    for (const auto& f : erc.findings) {
        if (f.rule_id == "W-CODE-PIN") {
            code_failed = true;
            r.reasons.push_back("code uses an unwired pin: " + f.message);
        } else if (f.severity == Severity::Warning) {
            schematic_warnings = true;
        }
    }
    if (!spec.code) {
        code_failed = true;
        r.reasons.push_back("no code artifact");
    }

    if (schematic_failed) {
        r.schematic = Verdict::Fail;
    } else if (!schematic_decisive || schematic_warnings) {
        r.schematic = Verdict::NeedsReview;
    } else {
        r.schematic = Verdict::Pass;
    }

    if (code_failed) {
        r.code = Verdict::Fail;
    } else if (!erc.clean || !code_decisive) {
        r.code = Verdict::NeedsReview;  // code cannot be judged against a broken circuit
    } else {
        r.code = Verdict::Pass;
    }
    return r;
}

BenchReport run_benchmark(const std::vector<BenchTask>& tasks, Provider& provider,
                          const PromptTemplate& tpl, const KnowledgeBase& kb,
                          const BenchOptions& options)
{
    if (tasks.empty()) {
        throw Error(Errc::EmptyInput, "no benchmark tasks");
    }
    std::vector<TaskResult> results(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (auto i = next++; i < tasks.size(); i = next++) {
            try {
                PipelineContext ctx{provider, tpl, kb, options.params, options.limits};
                results[i] = judge(tasks[i], generate_device(tasks[i].description, ctx), kb);
            } catch (const Error& e) {
                if (e.code() != Errc::ParseFailure) {
                    errors[i] = std::current_exception();
                    continue;
                }
                auto& r = results[i];
                r.category = tasks[i].category;
                r.title = tasks[i].title;
                r.schematic = r.code = Verdict::Fail;
                r.termination = "parse_failure";
                r.reasons.push_back(e.what());
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    auto jobs = static_cast<std::size_t>(std::max(1, options.jobs));
    jobs = std::min(jobs, tasks.size());
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    BenchReport report;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].manual_verdict) {
            apply_manual(tasks[i].id, results[i], *tasks[i].manual_verdict, report.log);
        }
        report.per_task.emplace_back(tasks[i].id, std::move(results[i]));
    }
    report.recompute();
    return report;
}

BenchReport ingest_manual_verdicts(BenchReport report, const nlohmann::json& verdicts)
{
    const nlohmann::json* list = &verdicts;
    if (verdicts.is_object() && verdicts.contains("verdicts")) {
        list = &verdicts["verdicts"];
    }
    if (!list->is_array()) {
        throw Error(Errc::SchemaError, "verdict file must hold a list of verdicts");
    }
    // Validate every id before touching the report.
    for (const auto& v : *list) {
        auto id = need_string(v, "id", "verdict");
        if (report.find(id) == nullptr) {
            throw Error(Errc::UnknownTaskId, "verdict for unknown task '" + id + "'");
        }
    }
    for (const auto& v : *list) {
        auto id = v["id"].get<std::string>();
        for (auto& [k, r] : report.per_task) {
            if (k == id) {
                apply_manual(id, r, parse_manual(v), report.log);
            }
        }
    }
    report.recompute();
    return report;
}

std::string render_report(const BenchReport& report)
{
    std::ostringstream out;
    auto row = [&](const std::string& a, const std::string& b, const std::string& c,
                   const std::string& d) {
        out << std::left << std::setw(11) << a << std::setw(34) << b << std::setw(11) << c << d
            << '\n';
    };
    row("Category", "Task", "Schematic", "Code");
    row("--------", "----", "---------", "----");
    if (report.per_task.empty()) {
        return out.str();
    }
    auto glyph = [](Verdict v) {
        // setw counts bytes; pad the multi-byte marks by hand.
        auto m = std::string(mark(v));
        return m + std::string(10, ' ');
    };
    for (auto category : kBenchCategories) {
        bool header = false;
        for (const auto& [id, r] : report.per_task) {
            if (r.category != category) {
                continue;
            }
            if (!header) {
                out << category << '\n';
                header = true;
            }
            auto title = r.title.size() > 32 ? r.title.substr(0, 32) : r.title;
            out << std::left << std::setw(11) << "" << std::setw(34) << title
                << glyph(r.schematic) << mark(r.code) << '\n';
        }
    }
    const auto& a = report.aggregates;
    out << "\nOverall Performance: " << pct(a.schematic) << " / " << pct(a.code) << '\n';
    if (a.schematic.needs_review + a.code.needs_review > 0) {
        out << "Awaiting review: " << a.schematic.needs_review << " schematic, "
            << a.code.needs_review << " code\n";
    }
    return out.str();
}

ordered_json to_json(const BenchReport& report)
{
    ordered_json j;
    auto per_task = ordered_json::object();
    for (const auto& [id, r] : report.per_task) {
        ordered_json t;
        t["category"] = r.category;
        t["title"] = r.title;
        t["schematic"] = to_string(r.schematic);
        t["code"] = to_string(r.code);
        t["source"] = r.source;
        t["termination"] = r.termination;
        t["iterations"] = r.iterations;
        t["erc_errors"] = r.erc_errors;
        t["reasons"] = r.reasons;
        per_task[id] = std::move(t);
    }
    j["per_task"] = std::move(per_task);

    const auto& a = report.aggregates;
    ordered_json agg;
    agg["schematic_rate"] = rate_json(a.schematic);
    agg["code_rate"] = rate_json(a.code);
    agg["schematic"] = cell_json(a.schematic);
    agg["code"] = cell_json(a.code);
    auto by = ordered_json::object();
    for (auto category : kBenchCategories) {
        auto it = a.by_category.find(std::string(category));
        if (it == a.by_category.end()) {
            continue;
        }
        const auto& [s, c] = it->second;
        ordered_json cat;
        cat["tasks"] = s.pass + s.fail + s.needs_review;
        cat["schematic_rate"] = rate_json(s);
        cat["code_rate"] = rate_json(c);
        by[std::string(category)] = std::move(cat);
    }
    agg["by_category"] = std::move(by);
    j["aggregates"] = std::move(agg);
    j["log"] = report.log;
    return j;
}

BenchReport report_from_json(const ordered_json& doc)
{
    try {
        BenchReport report;
        for (const auto& [id, t] : doc.at("per_task").items()) {
            TaskResult r;
            r.category = t.at("category").get<std::string>();
            r.title = t.value("title", id);
            r.schematic = parse_verdict(t.at("schematic").get<std::string>());
            r.code = parse_verdict(t.at("code").get<std::string>());
            r.source = t.value("source", "auto");
            r.termination = t.value("termination", "");
            r.iterations = t.value("iterations", 0);
            r.erc_errors = t.value("erc_errors", std::size_t{0});
            r.reasons = t.value("reasons", std::vector<std::string>{});
            report.per_task.emplace_back(id, std::move(r));
        }
        report.log = doc.value("log", std::vector<std::string>{});
        report.recompute();
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::SchemaError, std::string("bench report: ") + e.what());
    }
}

} // namespace wirespec
