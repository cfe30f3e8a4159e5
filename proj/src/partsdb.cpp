#include "wirespec/partsdb.hpp"

#include "wirespec/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

namespace wirespec {

namespace {

constexpr std::array<std::pair<PinRole, std::string_view>, 6> kRoles = {{
    {PinRole::Power, "power"},
    {PinRole::Ground, "ground"},
    {PinRole::DigitalIo, "digital_io"},
    {PinRole::AnalogIo, "analog_io"},
    {PinRole::Signal, "signal"},
    {PinRole::NoConnect, "nc"},
}};

constexpr std::array<std::pair<Category, std::string_view>, 8> kCategories = {{
    {Category::Passive, "passive"},
    {Category::Input, "input"},
    {Category::Output, "output"},
    {Category::Sensor, "sensor"},
    {Category::Ic, "ic"},
    {Category::Power, "power"},
    {Category::Logic, "logic"},
    {Category::Microcontroller, "microcontroller"},
}};

[[noreturn]] void schema(const std::string& what)
{
    throw Error(Errc::SchemaError, "knowledge base: " + what);
}

std::string require_string(const nlohmann::json& obj, const char* key, const std::string& where)
{
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_string() || it->get<std::string>().empty()) {
        schema(where + ": missing string field '" + key + "'");
    }
    return it->get<std::string>();
}

std::vector<std::string> string_list(const nlohmann::json& obj, const char* key,
                                     const std::string& where)
{
    std::vector<std::string> out;
    auto it = obj.find(key);
    if (it == obj.end()) {
        return out;
    }
    if (!it->is_array()) {
        schema(where + ": '" + key + "' must be an array");
    }
    for (const auto& v : *it) {
        if (!v.is_string()) {
            schema(where + ": '" + key + "' must hold strings");
        }
        out.push_back(v.get<std::string>());
    }
    return out;
}

PinSpec parse_pin(const nlohmann::json& j, const std::string& where)
{
    if (!j.is_object()) {
        schema(where + ": pin entry must be an object");
    }
    PinSpec pin;
    pin.canonical = require_string(j, "name", where);
    pin.aliases = string_list(j, "aliases", where + "." + pin.canonical);
    if (auto it = j.find("critical"); it != j.end()) {
        if (!it->is_boolean()) {
            schema(where + "." + pin.canonical + ": 'critical' must be boolean");
        }
        pin.critical = it->get<bool>();
    }
    auto role = parse_pin_role(require_string(j, "role", where + "." + pin.canonical));
    if (!role) {
        schema(where + "." + pin.canonical + ": unknown role");
    }
    pin.role = *role;
    return pin;
}

ComponentRecord parse_record(const nlohmann::json& j, std::size_t index)
{
    auto where = "record " + std::to_string(index);
    if (!j.is_object()) {
        schema(where + " is not an object");
    }
    ComponentRecord rec;
    rec.canonical_name = require_string(j, "name", where);
    where = rec.canonical_name;
    rec.name_aliases = string_list(j, "aliases", where);
    auto category = parse_category(require_string(j, "category", where));
    if (!category) {
        schema(where + ": unknown category");
    }
    rec.category = *category;
    rec.requires_tags = string_list(j, "requires", where);
    auto pins = j.find("pins");
    if (pins == j.end() || !pins->is_array()) {
        schema(where + ": 'pins' must be an array");
    }
    for (const auto& p : *pins) {
        rec.pins.push_back(parse_pin(p, where));
    }

    // Within one component every pin name and alias resolves to one pin.
    std::set<std::string> claimed;
    for (const auto& pin : rec.pins) {
        auto canonical = normalize_name(pin.canonical);
        if (!claimed.insert(canonical).second) {
            schema(where + ": pin name '" + pin.canonical + "' collides with another pin");
        }
        for (const auto& alias : pin.aliases) {
            auto key = normalize_name(alias);
            if (key == canonical) {
                schema(where + ": alias '" + alias + "' repeats canonical pin " + pin.canonical);
            }
            if (!claimed.insert(key).second) {
                schema(where + ": pin alias '" + alias + "' is ambiguous");
            }
        }
    }
    return rec;
}

} // namespace

std::string_view to_string(PinRole role)
{
    for (const auto& [r, name] : kRoles) {
        if (r == role) {
            return name;
        }
    }
    return "signal";
}

std::string_view to_string(Category category)
{
    for (const auto& [c, name] : kCategories) {
        if (c == category) {
            return name;
        }
    }
    return "passive";
}

std::optional<PinRole> parse_pin_role(std::string_view s)
{
    for (const auto& [r, name] : kRoles) {
        if (name == s) {
            return r;
        }
    }
    return std::nullopt;
}

std::optional<Category> parse_category(std::string_view s)
{
    for (const auto& [c, name] : kCategories) {
        if (name == s) {
            return c;
        }
    }
    return std::nullopt;
}

bool ComponentRecord::requires_tag(std::string_view tag) const
{
    return std::find(requires_tags.begin(), requires_tags.end(), tag) != requires_tags.end();
}

const PinSpec* ComponentRecord::pin(std::string_view canonical) const
{
    auto it = std::find_if(pins.begin(), pins.end(),
                           [&](const PinSpec& p) { return p.canonical == canonical; });
    return it == pins.end() ? nullptr : &*it;
}

std::vector<std::string> ComponentRecord::critical_pins() const
{
    std::vector<std::string> out;
    for (const auto& p : pins) {
        if (p.critical) {
            out.push_back(p.canonical);
        }
    }
    return out;
}

std::string normalize_name(std::string_view name)
{
    std::string lowered;
    for (char c : name) {
        lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    auto first = lowered.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    auto last = lowered.find_last_not_of(" \t\r\n");
    lowered = lowered.substr(first, last - first + 1);

    std::string collapsed;
    for (char c : lowered) {
        if (!std::isspace(static_cast<unsigned char>(c)) && c != '-' && c != '_') {
            collapsed.push_back(c);
        }
    }
    return collapsed.empty() ? lowered : collapsed;
}

KnowledgeBase KnowledgeBase::from_json(const nlohmann::json& doc)
{
    if (!doc.is_array()) {
        schema("top level must be an array of records");
    }
    KnowledgeBase kb;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        auto rec = parse_record(doc[i], i);
        auto name = rec.canonical_name;
        if (kb.records_.count(name) != 0) {
            throw Error(Errc::DuplicateAlias, "component '" + name + "' defined twice");
        }
        std::set<std::string> keys{normalize_name(name)};
        for (const auto& alias : rec.name_aliases) {
            keys.insert(normalize_name(alias));
        }
        for (const auto& key : keys) {
            auto [it, inserted] = kb.alias_index_.try_emplace(key, name);
            if (!inserted) {
                throw Error(Errc::DuplicateAlias, "name '" + key + "' claimed by both '" +
                                                      it->second + "' and '" + name + "'");
            }
        }
        kb.records_.emplace(name, std::move(rec));
    }
    return kb;
}

KnowledgeBase KnowledgeBase::load(const std::string& path)
{
    auto text = read_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        schema(path + ": " + e.what());
    }
    return from_json(doc);
}

const ComponentRecord* KnowledgeBase::lookup(std::string_view name) const
{
    auto it = alias_index_.find(normalize_name(name));
    if (it == alias_index_.end()) {
        return nullptr;
    }
    return &records_.at(it->second);
}

const ComponentRecord* KnowledgeBase::resolve(const BomItem& item) const
{
    if (const auto* rec = lookup(item.part_type)) {
        return rec;
    }
    return item.value ? lookup(*item.value) : nullptr;
}

std::optional<std::string> normalize_pin(const ComponentRecord& record, std::string_view pin_name)
{
    auto key = normalize_name(pin_name);
    for (const auto& pin : record.pins) {
        if (normalize_name(pin.canonical) == key) {
            return pin.canonical;
        }
        for (const auto& alias : pin.aliases) {
            if (normalize_name(alias) == key) {
                return pin.canonical;
            }
        }
    }
    return std::nullopt;
}

bool is_supply_source(const ComponentRecord& record)
{
    return record.category == Category::Power || record.category == Category::Microcontroller;
}

ordered_json to_json(const ComponentRecord& record)
{
    ordered_json j;
    j["name"] = record.canonical_name;
    j["aliases"] = record.name_aliases;
    j["category"] = to_string(record.category);
    auto pins = ordered_json::array();
    for (const auto& p : record.pins) {
        ordered_json pj;
        pj["name"] = p.canonical;
        pj["aliases"] = p.aliases;
        pj["critical"] = p.critical;
        pj["role"] = to_string(p.role);
        pins.push_back(std::move(pj));
    }
    j["pins"] = std::move(pins);
    j["requires"] = record.requires_tags;
    return j;
}

std::string default_kb_path()
{
    return std::string(WIRESPEC_DATA_DIR) + "/parts.kb.json";
}

} // namespace wirespec
