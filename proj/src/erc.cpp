#include "wirespec/erc.hpp"

#include "wirespec/errors.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <sstream>

namespace wirespec {

namespace {

constexpr std::array<RuleInfo, 9> kRules = {{
    {"E-POWER", Severity::Error, "powered parts reach a supply rail and ground"},
    {"E-RANGE", Severity::Error, "connections are enumerated, not written as pin ranges"},
    {"E-DANGLE", Severity::Error, "connection endpoints exist in the BOM and pinouts"},
    {"E-SHORT", Severity::Error, "no net joins a supply rail directly to ground"},
    {"E-LED-RESISTOR", Severity::Error, "driven LEDs have a series resistor"},
    {"W-PULLUP", Severity::Warning, "parts needing a pull-up have a resistor on their signal net"},
    {"W-FLOAT-INPUT", Severity::Warning, "critical pins belong to some net"},
    {"E-DUP-REF", Severity::Error, "BOM refs are unique"},
    {"W-CODE-PIN", Severity::Warning, "pins used by the code are wired"},
}};

const RuleInfo& rule(std::string_view id)
{
    for (const auto& r : kRules) {
        if (r.id == id) {
            return r;
        }
    }
    throw Error(Errc::UnknownRule, "unknown ERC rule '" + std::string(id) + "'");
}

// Precomputed view of a spec against the knowledge base.
class Circuit {
public:
    Circuit(const DeviceSpec& spec, const KnowledgeBase& kb)
        : spec_(spec), nets_(build_nets(spec.connections))
    {
        for (const auto& net : nets_) {
            for (const auto& m : net.members) {
                net_of_.emplace(m.str(), static_cast<std::size_t>(net.id - 1));
            }
        }
        for (const auto& item : spec.bom) {
            records_.try_emplace(item.ref.str(), kb.resolve(item));
        }
    }

    const DeviceSpec& spec() const { return spec_; }
    const std::vector<Net>& nets() const { return nets_; }

    const ComponentRecord* record(const PartRef& part) const
    {
        auto it = records_.find(part.str());
        return it == records_.end() ? nullptr : it->second;
    }

    std::optional<std::size_t> net_of(const PinRef& pin) const
    {
        auto it = net_of_.find(pin.str());
        if (it == net_of_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    std::optional<std::string> canonical(const PinRef& pin) const
    {
        const auto* rec = record(pin.part);
        return rec ? normalize_pin(*rec, pin.pin) : std::nullopt;
    }

    std::optional<PinRole> role(const PinRef& pin) const
    {
        const auto* rec = record(pin.part);
        auto c = canonical(pin);
        if (!rec || !c) {
            return std::nullopt;
        }
        return rec->pin(*c)->role;
    }

    bool is_supply_rail(const PinRef& pin) const
    {
        const auto* rec = record(pin.part);
        return rec && is_supply_source(*rec) && role(pin) == PinRole::Power;
    }

    bool is_supply_ground(const PinRef& pin) const
    {
        const auto* rec = record(pin.part);
        return rec && is_supply_source(*rec) && role(pin) == PinRole::Ground;
    }

    bool is_mcu_io(const PinRef& pin) const
    {
        const auto* rec = record(pin.part);
        auto r = role(pin);
        return rec && rec->category == Category::Microcontroller &&
               (r == PinRole::DigitalIo || r == PinRole::AnalogIo);
    }

    bool is_resistor(const PartRef& part) const
    {
        const auto* rec = record(part);
        return rec && rec->canonical_name == "resistor";
    }

    // A resistor whose pins land in two different nets sits in series with
    // whatever shares either of those nets.
    bool has_series_resistor(std::size_t net) const
    {
        for (const auto& m : nets_[net].members) {
            if (!is_resistor(m.part)) {
                continue;
            }
            for (const auto& other : pins_in_nets(m.part)) {
                if (net_of(other) != net) {
                    return true;
                }
            }
        }
        return false;
    }

    bool net_has(std::size_t net, const std::function<bool(const PinRef&)>& pred) const
    {
        const auto& members = nets_[net].members;
        return std::any_of(members.begin(), members.end(), pred);
    }

    /// Every pin of `part` that appears in some connection.
    std::vector<PinRef> pins_in_nets(const PartRef& part) const
    {
        std::vector<PinRef> out;
        for (const auto& net : nets_) {
            for (const auto& m : net.members) {
                if (m.part == part) {
                    out.push_back(m);
                }
            }
        }
        return out;
    }

    /// Spec pins of `part` (pinout entries and endpoints) naming KB pin `canonical`.
    std::vector<PinRef> spec_pins_for(const PartRef& part, const std::string& canonical_pin) const
    {
        std::vector<PinRef> out;
        std::set<std::string> seen;
        auto consider = [&](const PinRef& p) {
            if (canonical(p) == canonical_pin && seen.insert(p.pin).second) {
                out.push_back(p);
            }
        };
        if (const auto* pins = spec_.pinouts.pins_of(part)) {
            for (const auto& e : *pins) {
                consider(PinRef{part, e.pin});
            }
        }
        for (const auto& p : pins_in_nets(part)) {
            consider(p);
        }
        return out;
    }

    /// First BOM line per ref; duplicates are E-DUP-REF's concern.
    std::vector<const BomItem*> parts() const
    {
        std::vector<const BomItem*> out;
        std::set<std::string> seen;
        for (const auto& item : spec_.bom) {
            if (seen.insert(item.ref.str()).second) {
                out.push_back(&item);
            }
        }
        return out;
    }

private:
    const DeviceSpec& spec_;
    std::vector<Net> nets_;
    std::map<std::string, std::size_t> net_of_;
    std::map<std::string, const ComponentRecord*> records_;
};

using Emit = std::function<void(std::string message, Locus locus)>;

void check_power(const Circuit& c, const Emit& emit)
{
    for (const auto* item : c.parts()) {
        const auto* rec = c.record(item->ref);
        if (!rec || rec->category == Category::Passive || is_supply_source(*rec)) {
            continue;
        }
        for (const auto& pin : rec->pins) {
            if (!pin.critical || (pin.role != PinRole::Power && pin.role != PinRole::Ground)) {
                continue;
            }
            bool want_rail = pin.role == PinRole::Power;
            bool reached = false;
            for (const auto& p : c.spec_pins_for(item->ref, pin.canonical)) {
                auto net = c.net_of(p);
                if (net && c.net_has(*net, [&](const PinRef& m) {
                        return want_rail ? c.is_supply_rail(m) : c.is_supply_ground(m);
                    })) {
                    reached = true;
                }
            }
            if (!reached) {
                emit(item->ref.str() + " (" + rec->canonical_name + ") " +
                         (want_rail ? "power" : "ground") + " pin '" + pin.canonical +
                         "' is not on a net with a supply " + (want_rail ? "rail" : "ground"),
                     PinRef{item->ref, pin.canonical});
            }
        }
    }
}

void check_range(const Circuit& c, const std::vector<ParseDiagnostic>& diagnostics,
                 const Emit& emit)
{
    std::set<std::string> reported;
    auto flag = [&](const PinRef& p, const char* where) {
        if ((looks_like_range(p.pin) || looks_like_range(p.part.str())) &&
            reported.insert(p.str()).second) {
            emit(std::string("pin range shorthand '") + p.str() + "' in " + where +
                     "; each connection must be listed individually",
                 p);
        }
    };
    for (const auto& conn : c.spec().connections) {
        flag(conn.a, "schematic");
        flag(conn.b, "schematic");
    }
    for (const auto& [part, pins] : c.spec().pinouts.entries()) {
        for (const auto& e : pins) {
            flag(PinRef{part, e.pin}, "pinouts");
        }
    }
    for (const auto& d : diagnostics) {
        if (d.code == "RangeShortcut") {
            emit("rejected during parsing: " + d.message, WholeSpec{});
        }
    }
}

void check_dangle(const Circuit& c, const Emit& emit)
{
    for (const auto& f : validate(c.spec()).findings) {
        if (f.kind == ValidationKind::UndeclaredPart) {
            emit(f.message, f.endpoint.part);
        } else {
            emit(f.message, f.endpoint);
        }
    }
}

void check_short(const Circuit& c, const Emit& emit)
{
    for (std::size_t n = 0; n < c.nets().size(); ++n) {
        const auto& members = c.nets()[n].members;
        auto rail = std::find_if(members.begin(), members.end(),
                                 [&](const PinRef& p) { return c.is_supply_rail(p); });
        auto ground = std::find_if(members.begin(), members.end(),
                                   [&](const PinRef& p) { return c.role(p) == PinRole::Ground; });
        if (rail != members.end() && ground != members.end()) {
            emit("net " + std::to_string(n + 1) + " ties supply rail " + rail->str() +
                     " directly to ground pin " + ground->str(),
                 *rail);
        }
    }
}

void check_led_resistor(const Circuit& c, const Emit& emit)
{
    for (const auto* item : c.parts()) {
        const auto* rec = c.record(item->ref);
        if (!rec || !rec->requires_tag("needs_series_resistor")) {
            continue;
        }
        bool driven = false;
        bool limited = false;
        for (const auto& p : c.pins_in_nets(item->ref)) {
            auto net = *c.net_of(p);
            driven = driven || c.net_has(net, [&](const PinRef& m) {
                         return c.is_supply_rail(m) || c.is_mcu_io(m);
                     });
            limited = limited || c.has_series_resistor(net);
        }
        if (driven && !limited) {
            emit(item->ref.str() + " (" + rec->canonical_name +
                     ") is driven from a supply or I/O pin with no series resistor",
                 item->ref);
        }
    }
}

void check_pullup(const Circuit& c, const Emit& emit)
{
    for (const auto* item : c.parts()) {
        const auto* rec = c.record(item->ref);
        if (!rec || !rec->requires_tag("needs_pullup")) {
            continue;
        }
        bool has_signal_net = false;
        bool pulled = false;
        for (const auto& p : c.pins_in_nets(item->ref)) {
            auto net = *c.net_of(p);
            if (!c.net_has(net, [&](const PinRef& m) { return c.is_mcu_io(m); })) {
                continue;
            }
            has_signal_net = true;
            pulled = pulled || c.has_series_resistor(net);
        }
        if (has_signal_net && !pulled) {
            emit(item->ref.str() + " (" + rec->canonical_name +
                     ") needs a pull-up resistor on its signal net",
                 item->ref);
        }
    }
}

void check_float(const Circuit& c, const Emit& emit)
{
    for (const auto* item : c.parts()) {
        const auto* rec = c.record(item->ref);
        if (!rec || is_supply_source(*rec)) {
            continue;
        }
        for (const auto& pin : rec->pins) {
            if (!pin.critical) {
                continue;
            }
            auto candidates = c.spec_pins_for(item->ref, pin.canonical);
            bool wired = std::any_of(candidates.begin(), candidates.end(),
                                     [&](const PinRef& p) { return c.net_of(p).has_value(); });
            if (!wired) {
                auto shown = candidates.empty() ? PinRef{item->ref, pin.canonical} : candidates[0];
                emit("critical pin " + shown.str() + " is not connected to anything", shown);
            }
        }
    }
}

void check_dup_ref(const Circuit& c, const Emit& emit)
{
    std::map<std::string, int> counts;
    for (const auto& item : c.spec().bom) {
        ++counts[item.ref.str()];
    }
    for (const auto& [ref, n] : counts) {
        if (n > 1) {
            emit("ref " + ref + " appears " + std::to_string(n) + " times in the BOM",
                 PartRef(ref));
        }
    }
}

void check_code_pins(const Circuit& c, const Emit& emit)
{
    if (!c.spec().code) {
        return;
    }
    std::vector<const BomItem*> boards;
    for (const auto* item : c.parts()) {
        const auto* rec = c.record(item->ref);
        if (rec && rec->category == Category::Microcontroller) {
            boards.push_back(item);
        }
    }
    if (boards.empty()) {
        return;
    }

    auto wired = [&](const CodePinUse& use) {
        for (const auto* board : boards) {
            const auto* rec = c.record(board->ref);
            for (const auto& p : c.pins_in_nets(board->ref)) {
                for (const auto& cand : use.candidates) {
                    if (normalize_name(p.pin) == normalize_name(cand)) {
                        return true;
                    }
                    auto a = normalize_pin(*rec, p.pin);
                    if (a && a == normalize_pin(*rec, cand)) {
                        return true;
                    }
                }
            }
        }
        return false;
    };

    std::set<std::string> reported;
    for (const auto& use : scan_code_pins(c.spec().code->source)) {
        if (wired(use) || !reported.insert(use.candidates.front()).second) {
            continue;
        }
        emit("code line " + std::to_string(use.line) + " uses pin " + use.argument + " (" +
                 use.candidates.front() + ") in " + use.call +
                 "() but no microcontroller pin by that name is wired",
             CodeLine{use.line, use.line_text});
    }
}

std::string locus_key(const Locus& locus)
{
    std::ostringstream key;
    key << locus.index() << ':';
    std::visit(
        [&](const auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, PartRef>) {
                key << l.str();
            } else if constexpr (std::is_same_v<T, PinRef>) {
                key << l.str();
            } else if constexpr (std::is_same_v<T, CodeLine>) {
                key << std::string(10 - std::min<std::size_t>(10, std::to_string(l.line).size()), '0')
                    << l.line;
            }
        },
        locus);
    return key.str();
}

} // namespace

std::string describe(const Locus& locus)
{
    return std::visit(
        [](const auto& l) -> std::string {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, WholeSpec>) {
                return "the device specification";
            } else if constexpr (std::is_same_v<T, PartRef>) {
                return "part " + l.str();
            } else if constexpr (std::is_same_v<T, PinRef>) {
                return "pin " + l.str();
            } else {
                return "code line " + std::to_string(l.line);
            }
        },
        locus);
}

std::size_t ErcReport::error_count() const
{
    return static_cast<std::size_t>(std::count_if(
        findings.begin(), findings.end(),
        [](const Finding& f) { return f.severity == Severity::Error; }));
}

std::span<const RuleInfo> registered_rules()
{
    return kRules;
}

bool is_registered_rule(std::string_view id)
{
    return std::any_of(kRules.begin(), kRules.end(), [&](const RuleInfo& r) { return r.id == id; });
}

ErcReport run_erc(const DeviceSpec& spec, const KnowledgeBase& kb, const ErcOptions& options)
{
    for (const auto& id : options.rules) {
        rule(id);
    }
    if (options.require_valid) {
        auto structural = validate(spec);
        if (!structural.ok()) {
            throw Error(Errc::PrereqFailed,
                        "structural validation failed: " + structural.findings.front().message);
        }
    }

    Circuit circuit(spec, kb);
    using Check = std::function<void(const Circuit&, const Emit&)>;
    const std::map<std::string_view, Check> checks = {
        {"E-POWER", check_power},
        {"E-RANGE",
         [&](const Circuit& c, const Emit& e) { check_range(c, options.diagnostics, e); }},
        {"E-DANGLE", check_dangle},
        {"E-SHORT", check_short},
        {"E-LED-RESISTOR", check_led_resistor},
        {"W-PULLUP", check_pullup},
        {"W-FLOAT-INPUT", check_float},
        {"E-DUP-REF", check_dup_ref},
        {"W-CODE-PIN", check_code_pins},
    };

    ErcReport report;
    for (const auto& info : kRules) {
        bool selected = options.rules.empty() ||
                        std::find(options.rules.begin(), options.rules.end(), info.id) !=
                            options.rules.end();
        if (!selected) {
            continue;
        }
        report.rules_run.emplace_back(info.id);
        checks.at(info.id)(circuit, [&](std::string message, Locus locus) {
            report.findings.push_back(
                {std::string(info.id), info.severity, std::move(message), std::move(locus)});
        });
    }

    std::stable_sort(report.findings.begin(), report.findings.end(),
                     [](const Finding& a, const Finding& b) {
                         if (a.rule_id != b.rule_id) {
                             return a.rule_id < b.rule_id;
                         }
                         auto ka = locus_key(a.locus);
                         auto kb = locus_key(b.locus);
                         if (ka != kb) {
                             return ka < kb;
                         }
                         return a.message < b.message;
                     });
    report.clean = report.error_count() == 0;
    return report;
}

std::string explain(const Finding& finding)
{
    const auto& info = rule(finding.rule_id);
    auto where = describe(finding.locus);
    std::string text = "[" + std::string(info.id) + "] " + finding.message + ". ";
    if (info.id == "E-POWER") {
        text += "Connect the supply pin at " + where +
                " to the board's 5V (or 3V3) rail and its ground pin to GND, as listed "
                "in the part's pinout.";
    } else if (info.id == "E-RANGE") {
        text += "Replace the range shorthand at " + where +
                " with one schematic entry per pin pair, e.g. UNO.D2 to LED1.anode, "
                "UNO.D3 to LED2.anode.";
    } else if (info.id == "E-DANGLE") {
        text += "Either add the missing part to the bill of materials and the pin to its "
                "pinout, or correct the endpoint at " + where + ".";
    } else if (info.id == "E-SHORT") {
        text += "The net at " + where +
                " shorts the supply to ground. Remove the direct connection or put the "
                "intended load between the rail and ground.";
    } else if (info.id == "E-LED-RESISTOR") {
        text += "Insert a current-limiting resistor (typically 220 to 330 ohms) in series "
                "with " + where + " between its driving pin and the LED.";
    } else if (info.id == "W-PULLUP") {
        text += "Add a pull-up resistor (typically 10k ohms) from the signal net of " + where +
                " to the supply rail so the input reads high when released.";
    } else if (info.id == "W-FLOAT-INPUT") {
        text += "Wire " + where +
                " to the net it needs; a critical pin left unconnected leaves the part "
                "undriven or floating.";
    } else if (info.id == "E-DUP-REF") {
        text += "Give every BOM line a distinct ref; rename the repeated " + where +
                " and update the schematic entries that refer to it.";
    } else if (info.id == "W-CODE-PIN") {
        text += "The code at " + where +
                " configures a pin that the schematic never wires. Either connect that "
                "microcontroller pin or change the pin number in the code.";
    }
    return text;
}

std::vector<CodePinUse> scan_code_pins(std::string_view source)
{
    // Blank comments and string literals; keep newlines so line numbers hold.
    std::string code(source);
    for (std::size_t i = 0; i < code.size(); ++i) {
        if (code.compare(i, 2, "//") == 0) {
            while (i < code.size() && code[i] != '\n') {
                code[i++] = ' ';
            }
        } else if (code.compare(i, 2, "/*") == 0) {
            auto end = code.find("*/", i + 2);
            end = end == std::string::npos ? code.size() : end + 2;
            for (; i < end; ++i) {
                if (code[i] != '\n') {
                    code[i] = ' ';
                }
            }
            --i;
        } else if (code[i] == '"' || code[i] == '\'') {
            char quote = code[i];
            for (++i; i < code.size() && code[i] != quote && code[i] != '\n'; ++i) {
                if (code[i] == '\\' && i + 1 < code.size()) {
                    code[i++] = ' ';
                }
                code[i] = ' ';
            }
        }
    }

    std::map<std::string, std::string> constants;
    static const std::regex define_re(R"(#\s*define\s+(\w+)\s+\(?\s*([AD]?\d+)\s*\)?)");
    static const std::regex assign_re(
        R"((?:const(?:expr)?\s+)?(?:unsigned\s+)?(?:int|byte|uint8_t|int8_t|short|long|char|pin_size_t)\s+(\w+)\s*=\s*([AD]?\d+)\s*;)");
    for (const auto* re : {&define_re, &assign_re}) {
        for (auto it = std::sregex_iterator(code.begin(), code.end(), *re);
             it != std::sregex_iterator(); ++it) {
            constants.try_emplace((*it)[1].str(), (*it)[2].str());
        }
    }

    std::vector<std::string> lines;
    {
        std::istringstream in{std::string(source)};
        std::string l;
        while (std::getline(in, l)) {
            lines.push_back(l);
        }
    }

    static const std::regex call_re(
        R"(\b(pinMode|digitalWrite|digitalRead|analogRead|analogWrite|tone|noTone|pulseIn|shiftOut|shiftIn|attach)\s*\(\s*(\w+))");
    std::vector<CodePinUse> uses;
    for (auto it = std::sregex_iterator(code.begin(), code.end(), call_re);
         it != std::sregex_iterator(); ++it) {
        auto call = (*it)[1].str();
        auto arg = (*it)[2].str();
        auto literal = arg;
        if (auto c = constants.find(arg); c != constants.end()) {
            literal = c->second;
        }

        std::vector<std::string> candidates;
        static const std::regex number(R"(\d+)");
        static const std::regex analog(R"(A(\d+))");
        static const std::regex digital(R"(D(\d+))");
        std::smatch m;
        if (std::regex_match(literal, number)) {
            if (call == "analogRead") {
                candidates = {"A" + literal};
            } else {
                candidates = {"D" + literal, literal};
            }
        } else if (std::regex_match(literal, m, analog)) {
            candidates = {literal};
        } else if (std::regex_match(literal, m, digital)) {
            candidates = {literal, m[1].str()};
        } else {
            continue;
        }

        auto pos = static_cast<std::size_t>(it->position(0));
        int line = 1 + static_cast<int>(std::count(code.begin(),
                                                   code.begin() + static_cast<std::ptrdiff_t>(pos),
                                                   '\n'));
        std::string text = static_cast<std::size_t>(line) <= lines.size() ? lines[line - 1] : "";
        auto first = text.find_first_not_of(" \t");
        text = first == std::string::npos ? "" : text.substr(first);
        uses.push_back({line, call, arg, std::move(candidates), std::move(text)});
    }
    return uses;
}

ordered_json to_json(const Finding& finding)
{
    ordered_json j;
    j["rule_id"] = finding.rule_id;
    j["severity"] = severity_name(finding.severity);
    j["message"] = finding.message;
    ordered_json locus;
    std::visit(
        [&](const auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, WholeSpec>) {
                locus["kind"] = "spec";
            } else if constexpr (std::is_same_v<T, PartRef>) {
                locus["kind"] = "part";
                locus["ref"] = l.str();
            } else if constexpr (std::is_same_v<T, PinRef>) {
                locus["kind"] = "pin";
                locus["pin"] = l.str();
            } else {
                locus["kind"] = "code_line";
                locus["line"] = l.line;
                locus["text"] = l.text;
            }
        },
        finding.locus);
    j["locus"] = std::move(locus);
    return j;
}

ordered_json to_json(const ErcReport& report)
{
    ordered_json j;
    auto findings = ordered_json::array();
    for (const auto& f : report.findings) {
        findings.push_back(to_json(f));
    }
    j["findings"] = std::move(findings);
    j["rules_run"] = report.rules_run;
    j["clean"] = report.clean;
    return j;
}

} // namespace wirespec
