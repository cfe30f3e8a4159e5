#include "wirespec/specparser.hpp"

#include "wirespec/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <regex>

namespace wirespec {

std::string_view severity_name(Severity s)
{
    return s == Severity::Error ? "error" : "warning";
}

std::size_t ParseResult::error_count() const
{
    return static_cast<std::size_t>(
        std::count_if(diagnostics.begin(), diagnostics.end(),
                      [](const ParseDiagnostic& d) { return d.severity == Severity::Error; }));
}

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool is_structured_info(std::string_view info, std::string_view body)
{
    auto word = lower(info.substr(0, info.find_first_of(" \t{")));
    if (word == "json" || word == "json5" || word == "jsonc") {
        return true;
    }
    if (!word.empty()) {
        return false;
    }
    auto t = trim(body);
    return !t.empty() && (t.front() == '{' || t.front() == '[');
}

bool is_c_family(std::string_view info)
{
    static constexpr std::array<std::string_view, 10> tags = {
        "c", "cpp", "c++", "cc", "cxx", "h", "hpp", "arduino", "ino", "objectivec"};
    auto word = lower(info.substr(0, info.find_first_of(" \t{")));
    return std::find(tags.begin(), tags.end(), word) != tags.end();
}

// Index one past the brace matching raw[open], or npos. String-aware.
std::size_t match_brace(std::string_view raw, std::size_t open, std::size_t limit)
{
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < limit; ++i) {
        char c = raw[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{' || c == '[') {
            ++depth;
        } else if (c == '}' || c == ']') {
            if (--depth == 0) {
                return i + 1;
            }
        }
    }
    return std::string_view::npos;
}

struct Line {
    std::size_t start;
    std::size_t end;  // excludes the newline
    std::size_t next; // start of the following line
};

Line line_at(std::string_view raw, std::size_t pos)
{
    auto nl = raw.find('\n', pos);
    if (nl == std::string_view::npos) {
        return {pos, raw.size(), raw.size()};
    }
    return {pos, nl, nl + 1};
}

// Number of fence backticks opening this line (>= 3), or 0.
std::size_t fence_width(std::string_view line)
{
    std::size_t indent = 0;
    while (indent < line.size() && indent < 4 && line[indent] == ' ') {
        ++indent;
    }
    if (indent > 3) {
        return 0;
    }
    std::size_t n = 0;
    while (indent + n < line.size() && line[indent + n] == '`') {
        ++n;
    }
    return n >= 3 ? n : 0;
}

void scan_bare_objects(std::string_view raw, std::size_t from, std::size_t to,
                       RawBlocks& out)
{
    std::size_t pos = from;
    while (pos < to) {
        auto line = line_at(raw, pos);
        auto end = std::min(line.end, to);
        auto content = raw.substr(line.start, end - line.start);
        auto first = content.find_first_not_of(" \t\r");
        if (first != std::string_view::npos && content[first] == '{') {
            auto open = line.start + first;
            auto close = match_brace(raw, open, to);
            if (close != std::string_view::npos) {
                out.structured_blocks.push_back(
                    {std::string(raw.substr(open, close - open)), {open, close}});
                pos = close;
                continue;
            }
            out.diagnostics.push_back({Severity::Warning, "UnbalancedObject",
                                       "structured object never closes", {open, to}});
            return;
        }
        if (line.next <= pos) {
            break;
        }
        pos = line.next;
    }
}

} // namespace

RawBlocks extract_blocks(std::string_view raw)
{
    RawBlocks out;
    std::size_t prose_start = 0;
    std::size_t pos = 0;
    while (pos < raw.size()) {
        auto line = line_at(raw, pos);
        auto text = raw.substr(line.start, line.end - line.start);
        auto width = fence_width(text);
        if (width == 0) {
            pos = line.next;
            continue;
        }

        scan_bare_objects(raw, prose_start, line.start, out);

        auto info_start = text.find('`') + width;
        auto info = std::string(trim(text.substr(info_start)));
        auto body_start = line.next;
        auto body_end = raw.size();
        auto resume = raw.size();
        bool closed = false;
        for (auto p = body_start; p < raw.size();) {
            auto l = line_at(raw, p);
            auto t = trim(raw.substr(l.start, l.end - l.start));
            if (t.size() >= width && t.find_first_not_of('`') == std::string_view::npos) {
                body_end = l.start;
                resume = l.next;
                closed = true;
                break;
            }
            p = l.next;
        }
        if (!closed) {
            out.diagnostics.push_back({Severity::Warning, "UnterminatedFence",
                                       "code fence is not closed; captured to end of input",
                                       {line.start, raw.size()}});
        }

        auto body = std::string(raw.substr(body_start, body_end - body_start));
        if (is_structured_info(info, body)) {
            out.structured_blocks.push_back({std::move(body), {body_start, body_end}});
        } else {
            out.code_fences.push_back({std::move(info), std::move(body), {body_start, body_end}});
        }
        pos = resume;
        prose_start = resume;
    }
    scan_bare_objects(raw, prose_start, raw.size(), out);
    return out;
}

bool looks_like_range(std::string_view token)
{
    static const std::regex numbered(R"(^\s*[A-Za-z_]*\d+\s*(-|~|\s+to\s+)\s*[A-Za-z_]*\d+\s*$)");
    static const std::regex lettered(R"(^\s*[A-Za-z]\s*(-|~)\s*[A-Za-z]\s*$)");
    if (token.find("..") != std::string_view::npos ||
        token.find('*') != std::string_view::npos ||
        token.find(',') != std::string_view::npos) {
        return true;
    }
    auto lb = token.find('[');
    if (lb != std::string_view::npos && token.find(']', lb) != std::string_view::npos) {
        return true;
    }
    std::string s(token);
    return std::regex_match(s, numbered) || std::regex_match(s, lettered);
}

PinRef parse_pin_endpoint(std::string_view text)
{
    auto t = trim(text);
    std::string shown(t);
    if (t.find("..") != std::string_view::npos || t.find('*') != std::string_view::npos) {
        throw Error(Errc::RangeShortcut, "range shortcut in endpoint '" + shown + "'");
    }
    auto dot = t.find('.');
    if (dot == std::string_view::npos) {
        throw Error(Errc::MalformedEndpoint,
                    "endpoint '" + shown + "' is not of the form PART.PIN");
    }
    auto part = trim(t.substr(0, dot));
    auto pin = trim(t.substr(dot + 1));
    if (looks_like_range(part) || looks_like_range(pin)) {
        throw Error(Errc::RangeShortcut, "range shortcut in endpoint '" + shown + "'");
    }
    if (!PartRef::is_valid(part) || pin.empty()) {
        throw Error(Errc::MalformedEndpoint,
                    "endpoint '" + shown + "' is not of the form PART.PIN");
    }
    return PinRef{PartRef(std::string(part)), std::string(pin)};
}

namespace {

// Blanks `//` comments and trailing commas with spaces so byte offsets survive.
std::string repair(std::string text, std::size_t base, std::vector<ParseDiagnostic>& diags)
{
    bool in_string = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
            auto end = text.find('\n', i);
            if (end == std::string::npos) {
                end = text.size();
            }
            std::fill(text.begin() + static_cast<std::ptrdiff_t>(i),
                      text.begin() + static_cast<std::ptrdiff_t>(end), ' ');
            diags.push_back({Severity::Warning, "RepairedComment", "removed line comment",
                             {base + i, base + end}});
            i = end;
        }
    }

    in_string = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == ',') {
            auto next = text.find_first_not_of(" \t\r\n", i + 1);
            if (next != std::string::npos && (text[next] == '}' || text[next] == ']')) {
                text[i] = ' ';
                diags.push_back({Severity::Warning, "RepairedTrailingComma",
                                 "removed trailing comma", {base + i, base + i + 1}});
            }
        }
    }
    return text;
}

struct Located {
    ordered_json value;
    const StructuredBlock* block;
};

class Assembler {
public:
    explicit Assembler(std::string_view raw) : raw_(raw) {}

    ParseResult run()
    {
        auto blocks = extract_blocks(raw_);
        result_.diagnostics = blocks.diagnostics;

        std::vector<Located> values;
        for (const auto& block : blocks.structured_blocks) {
            auto repaired = repair(block.text, block.span.start, result_.diagnostics);
            try {
                values.push_back({ordered_json::parse(repaired), &block});
            } catch (const nlohmann::json::parse_error& e) {
                auto at = block.span.start + (e.byte > 0 ? e.byte - 1 : 0);
                at = std::min(at, block.span.end);
                result_.diagnostics.push_back(
                    {Severity::Error, "StructuredSyntax",
                     std::string("structured block does not parse: ") + e.what(),
                     {at, std::min(at + 1, raw_.size())}});
            }
        }

        for (const auto& v : values) {
            assign(v);
        }
        if (!code_seen_) {
            take_code_fence(blocks.code_fences);
        }

        auto missing = [&](bool seen, const char* name) {
            if (!seen) {
                result_.diagnostics.push_back({Severity::Error, "MissingSection",
                                               std::string("missing section: ") + name,
                                               {raw_.size(), raw_.size()}});
            }
        };
        if (!bom_seen_ && !pinouts_seen_ && !schematic_seen_ && !code_seen_) {
            throw Error(Errc::NoParsableContent, "no device-spec section could be parsed");
        }
        missing(bom_seen_, "bill_of_materials");
        missing(pinouts_seen_, "pinouts");
        missing(schematic_seen_, "schematic");
        missing(code_seen_, "code");

        result_.sections = {bom_seen_, pinouts_seen_, schematic_seen_, code_seen_};
        std::stable_sort(result_.diagnostics.begin(), result_.diagnostics.end(),
                         [](const ParseDiagnostic& a, const ParseDiagnostic& b) {
                             return a.span.start < b.span.start;
                         });
        return std::move(result_);
    }

private:
    void error(const char* code, std::string message, ByteSpan span)
    {
        result_.diagnostics.push_back({Severity::Error, code, std::move(message), span});
    }

    void warn(const char* code, std::string message, ByteSpan span)
    {
        result_.diagnostics.push_back({Severity::Warning, code, std::move(message), span});
    }

    // Span of the first occurrence of `needle` (as a JSON string literal when
    // possible) inside the block; the whole block otherwise.
    ByteSpan locate(const StructuredBlock& block, const std::string& needle) const
    {
        auto quoted = nlohmann::json(needle).dump();
        auto at = block.text.find(quoted);
        if (at != std::string::npos) {
            return {block.span.start + at, block.span.start + at + quoted.size()};
        }
        at = block.text.find(needle);
        if (!needle.empty() && at != std::string::npos) {
            return {block.span.start + at, block.span.start + at + needle.size()};
        }
        return block.span;
    }

    static const ordered_json* field(const ordered_json& obj,
                                     std::initializer_list<const char*> keys)
    {
        for (const char* k : keys) {
            auto it = obj.find(k);
            if (it != obj.end()) {
                return &*it;
            }
        }
        return nullptr;
    }

    static std::optional<std::string> text_of(const ordered_json* v)
    {
        if (v == nullptr || v->is_null()) {
            return std::nullopt;
        }
        if (v->is_string()) {
            return v->get<std::string>();
        }
        if (v->is_number() || v->is_boolean()) {
            return v->dump();
        }
        return std::nullopt;
    }

    void assign(const Located& v)
    {
        const auto& j = v.value;
        static constexpr std::array<const char*, 9> known = {
            "description", "bill_of_materials", "bom", "pinouts", "schematic",
            "netlist", "connections", "code", "provenance"};
        bool keyed = j.is_object() &&
                     std::any_of(known.begin(), known.end(),
                                 [&](const char* k) { return j.contains(k); });
        if (keyed) {
            if (const auto* d = field(j, {"description"}); d && d->is_string()) {
                result_.spec.description = d->get<std::string>();
            }
            if (const auto* b = field(j, {"bill_of_materials", "bom"})) {
                take_bom(*b, *v.block);
            }
            if (const auto* p = field(j, {"pinouts"})) {
                take_pinouts(*p, *v.block);
            }
            if (const auto* s = field(j, {"schematic", "netlist", "connections"})) {
                take_schematic(*s, *v.block);
            }
            if (const auto* c = field(j, {"code"})) {
                take_code_value(*c, *v.block);
            }
            if (const auto* p = field(j, {"provenance"})) {
                take_provenance(*p);
            }
            return;
        }

        if (j.is_array() && !j.empty() && std::all_of(j.begin(), j.end(), [](const auto& e) {
                return e.is_object() && (e.contains("ref") || e.contains("name")) &&
                       (e.contains("part_type") || e.contains("type"));
            })) {
            take_bom(j, *v.block);
        } else if (j.is_array() && !j.empty() &&
                   std::all_of(j.begin(), j.end(), [](const auto& e) {
                       return (e.is_object() && e.contains("from") && e.contains("to")) ||
                              e.is_string() || (e.is_array() && e.size() == 2);
                   })) {
            take_schematic(j, *v.block);
        } else if (j.is_object() && !j.empty() &&
                   std::all_of(j.begin(), j.end(), [](const auto& e) { return e.is_array(); })) {
            take_pinouts(j, *v.block);
        } else {
            warn("UnrecognizedBlock", "structured block matches no device-spec section",
                 v.block->span);
        }
    }

    bool first_time(bool& seen, const char* name, const StructuredBlock& block)
    {
        if (seen) {
            warn("DuplicateSection", std::string("ignoring repeated section ") + name, block.span);
            return false;
        }
        seen = true;
        return true;
    }

    void take_bom(const ordered_json& j, const StructuredBlock& block)
    {
        if (!j.is_array()) {
            error("BadSection", "bill_of_materials must be an array", block.span);
            return;
        }
        if (!first_time(bom_seen_, "bill_of_materials", block)) {
            return;
        }
        for (const auto& item : j) {
            if (!item.is_object()) {
                error("BadBomItem", "BOM entry is not an object", block.span);
                continue;
            }
            auto ref = text_of(field(item, {"ref", "name", "designator"}));
            auto type = text_of(field(item, {"part_type", "type", "component"}));
            if (!ref || !type || type->empty()) {
                error("BadBomItem", "BOM entry needs ref and part_type",
                      locate(block, ref.value_or("")));
                continue;
            }
            auto r = std::string(trim(*ref));
            if (!PartRef::is_valid(r)) {
                error("InvalidPartRef", "invalid part ref '" + *ref + "'", locate(block, *ref));
                continue;
            }
            result_.spec.bom.push_back({PartRef(r), *type, text_of(field(item, {"value"})),
                                        text_of(field(item, {"note", "purpose"}))});
        }
    }

    void take_pinouts(const ordered_json& j, const StructuredBlock& block)
    {
        if (!j.is_object()) {
            error("BadSection", "pinouts must be an object", block.span);
            return;
        }
        if (!first_time(pinouts_seen_, "pinouts", block)) {
            return;
        }
        for (const auto& [key, pins] : j.items()) {
            auto r = std::string(trim(key));
            if (!PartRef::is_valid(r)) {
                error("InvalidPartRef", "invalid part ref '" + key + "' in pinouts",
                      locate(block, key));
                continue;
            }
            if (!pins.is_array()) {
                error("BadPinList", "pin list for " + r + " is not an array", locate(block, key));
                continue;
            }
            PartRef ref(r);
            result_.spec.pinouts.add_part(ref);
            for (const auto& p : pins) {
                std::optional<std::string> name;
                std::optional<std::string> note;
                if (p.is_object()) {
                    name = text_of(field(p, {"pin", "name"}));
                    note = text_of(field(p, {"note", "function", "description"}));
                } else {
                    name = text_of(&p);
                }
                auto trimmed = name ? std::string(trim(*name)) : std::string();
                if (trimmed.empty()) {
                    error("BadPin", "empty pin name for " + r, locate(block, key));
                    continue;
                }
                if (!result_.spec.pinouts.add_pin(ref, {trimmed, note})) {
                    warn("DuplicatePin", "pin " + trimmed + " listed twice for " + r,
                         locate(block, trimmed));
                }
            }
        }
    }

    static std::optional<std::pair<std::string, std::string>> split_arrow(const std::string& s)
    {
        static constexpr std::array<std::string_view, 6> arrows = {
            "<->", "->", "\xE2\x86\x92", "<=>", " -- ", " to "};
        for (auto arrow : arrows) {
            auto at = s.find(arrow);
            if (at != std::string::npos) {
                return std::pair{s.substr(0, at), s.substr(at + arrow.size())};
            }
        }
        return std::nullopt;
    }

    void take_schematic(const ordered_json& j, const StructuredBlock& block)
    {
        if (!j.is_array()) {
            error("BadSection", "schematic must be an array", block.span);
            return;
        }
        if (!first_time(schematic_seen_, "schematic", block)) {
            return;
        }
        for (const auto& e : j) {
            std::optional<std::string> from;
            std::optional<std::string> to;
            std::optional<std::string> note;
            std::string shown;
            if (e.is_object()) {
                from = text_of(field(e, {"from", "a", "source"}));
                to = text_of(field(e, {"to", "b", "target"}));
                note = text_of(field(e, {"note", "purpose"}));
                shown = from.value_or("");
            } else if (e.is_array() && e.size() == 2) {
                from = text_of(&e[0]);
                to = text_of(&e[1]);
                shown = from.value_or("");
            } else if (e.is_string()) {
                shown = e.get<std::string>();
                if (auto parts = split_arrow(shown)) {
                    from = parts->first;
                    to = parts->second;
                }
            }
            if (!from || !to) {
                error("BadConnection", "connection needs two endpoints", locate(block, shown));
                continue;
            }
            try {
                auto a = parse_pin_endpoint(*from);
                auto b = parse_pin_endpoint(*to);
                if (a == b) {
                    error("SelfLoop", "connection joins " + a.str() + " to itself",
                          locate(block, *from));
                    continue;
                }
                result_.spec.connections.push_back({std::move(a), std::move(b), note});
            } catch (const Error& err) {
                auto code = err.code() == Errc::RangeShortcut ? "RangeShortcut"
                                                              : "MalformedEndpoint";
                auto bad = *from;
                try {
                    parse_pin_endpoint(*from);
                    bad = *to;
                } catch (const Error&) {
                }
                error(code, std::string(err.what()) + "; connection rejected", locate(block, bad));
            }
        }
    }

    void take_code_value(const ordered_json& j, const StructuredBlock& block)
    {
        if (code_seen_) {
            warn("DuplicateSection", "ignoring repeated section code", block.span);
            return;
        }
        if (j.is_null()) {
            code_seen_ = true;
            return;
        }
        if (j.is_string()) {
            code_seen_ = true;
            result_.spec.code = CodeArtifact{"arduino-cpp", j.get<std::string>(), std::nullopt};
            return;
        }
        if (j.is_object()) {
            auto source = text_of(field(j, {"source"}));
            if (!source) {
                error("BadSection", "code section has no source", block.span);
                return;
            }
            code_seen_ = true;
            CodeArtifact code;
            code.source = *source;
            if (auto tag = text_of(field(j, {"language_tag"}))) {
                code.language_tag = *tag;
            }
            code.note = text_of(field(j, {"note"}));
            result_.spec.code = std::move(code);
            return;
        }
        error("BadSection", "code section must be an object", block.span);
    }

    void take_code_fence(const std::vector<CodeFence>& fences)
    {
        const CodeFence* pick = nullptr;
        for (const auto& f : fences) {
            if (is_c_family(f.info_string)) {
                pick = &f;
                break;
            }
        }
        if (pick == nullptr) {
            for (const auto& f : fences) {
                if (pick == nullptr || f.body.size() > pick->body.size()) {
                    pick = &f;
                }
            }
        }
        if (pick != nullptr && !trim(pick->body).empty()) {
            code_seen_ = true;
            result_.spec.code = CodeArtifact{"arduino-cpp", pick->body, std::nullopt};
        }
    }

    void take_provenance(const ordered_json& j)
    {
        if (!j.is_object()) {
            return;
        }
        auto& p = result_.spec.provenance;
        p.model_id = text_of(field(j, {"model_id"})).value_or("");
        p.prompt_digest = text_of(field(j, {"prompt_digest"})).value_or("");
        p.created_at = text_of(field(j, {"created_at"})).value_or("");
        if (const auto* n = field(j, {"reflection_iterations"}); n && n->is_number_integer()) {
            p.reflection_iterations = n->get<int>();
        }
    }

    std::string_view raw_;
    ParseResult result_;
    bool bom_seen_ = false;
    bool pinouts_seen_ = false;
    bool schematic_seen_ = false;
    bool code_seen_ = false;
};

} // namespace

ParseResult parse_device_spec(std::string_view raw)
{
    return Assembler(raw).run();
}

ordered_json to_json(const ParseDiagnostic& d)
{
    ordered_json j;
    j["severity"] = severity_name(d.severity);
    j["code"] = d.code;
    j["message"] = d.message;
    j["span"] = {d.span.start, d.span.end};
    return j;
}

ordered_json to_json(const std::vector<ParseDiagnostic>& diagnostics)
{
    auto arr = ordered_json::array();
    for (const auto& d : diagnostics) {
        arr.push_back(to_json(d));
    }
    return arr;
}

} // namespace wirespec
