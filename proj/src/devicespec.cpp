#include "wirespec/devicespec.hpp"

#include "wirespec/errors.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace wirespec {

PartRef::PartRef(std::string value) : value_(std::move(value))
{
    if (!is_valid(value_)) {
        throw Error(Errc::InvalidPartRef, "invalid part ref '" + value_ + "'");
    }
}

bool PartRef::is_valid(std::string_view value) noexcept
{
    if (value.empty()) {
        return false;
    }
    return std::none_of(value.begin(), value.end(), [](char c) {
        return c == '.' || std::isspace(static_cast<unsigned char>(c));
    });
}

bool PinoutMap::add_pin(const PartRef& part, PinEntry entry)
{
    add_part(part);
    for (auto& [ref, pins] : entries_) {
        if (ref != part) {
            continue;
        }
        auto dup = std::find_if(pins.begin(), pins.end(),
                                [&](const PinEntry& p) { return p.pin == entry.pin; });
        if (dup != pins.end()) {
            return false;
        }
        pins.push_back(std::move(entry));
        return true;
    }
    return false;
}

void PinoutMap::add_part(const PartRef& part)
{
    if (pins_of(part) == nullptr) {
        entries_.emplace_back(part, std::vector<PinEntry>{});
    }
}

bool PinoutMap::remove_pin(const PartRef& part, std::string_view pin)
{
    for (auto& [ref, pins] : entries_) {
        if (ref == part) {
            auto it = std::find_if(pins.begin(), pins.end(),
                                   [&](const PinEntry& p) { return p.pin == pin; });
            if (it == pins.end()) {
                return false;
            }
            pins.erase(it);
            return true;
        }
    }
    return false;
}

const std::vector<PinEntry>* PinoutMap::pins_of(const PartRef& part) const
{
    for (const auto& [ref, pins] : entries_) {
        if (ref == part) {
            return &pins;
        }
    }
    return nullptr;
}

bool PinoutMap::has_pin(const PartRef& part, std::string_view pin) const
{
    const auto* pins = pins_of(part);
    return pins != nullptr &&
           std::any_of(pins->begin(), pins->end(),
                       [&](const PinEntry& p) { return p.pin == pin; });
}

const BomItem* DeviceSpec::find_part(const PartRef& ref) const
{
    auto it = std::find_if(bom.begin(), bom.end(),
                           [&](const BomItem& b) { return b.ref == ref; });
    return it == bom.end() ? nullptr : &*it;
}

ValidationReport validate(const DeviceSpec& spec)
{
    ValidationReport report;
    std::set<std::string> undeclared;
    std::set<std::string> missing;

    auto check = [&](const PinRef& end) {
        if (spec.find_part(end.part) == nullptr) {
            if (undeclared.insert(end.part.str()).second) {
                report.findings.push_back({ValidationKind::UndeclaredPart, end,
                                           "undeclared part " + end.part.str()});
            }
            return;
        }
        if (!spec.pinouts.has_pin(end.part, end.pin) && missing.insert(end.str()).second) {
            report.findings.push_back(
                {ValidationKind::MissingPin, end,
                 "pin " + end.pin + " not in pinout of " + end.part.str()});
        }
    };

    for (const auto& c : spec.connections) {
        if (c.a == c.b) {
            report.findings.push_back({ValidationKind::SelfLoop, c.a,
                                       "connection joins " + c.a.str() + " to itself"});
            continue;
        }
        check(c.a);
        check(c.b);
    }
    return report;
}

std::vector<Net> build_nets(std::span<const Connection> connections)
{
    std::map<PinRef, std::size_t> index;
    std::vector<PinRef> pins;
    auto intern = [&](const PinRef& p) {
        auto [it, inserted] = index.try_emplace(p, pins.size());
        if (inserted) {
            pins.push_back(p);
        }
        return it->second;
    };

    std::vector<std::vector<std::size_t>> adjacent;
    for (const auto& c : connections) {
        auto a = intern(c.a);
        auto b = intern(c.b);
        adjacent.resize(pins.size());
        adjacent[a].push_back(b);
        adjacent[b].push_back(a);
    }

    std::vector<bool> seen(pins.size(), false);
    std::vector<Net> nets;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < pins.size(); ++start) {
        if (seen[start]) {
            continue;
        }
        Net net;
        seen[start] = true;
        stack.push_back(start);
        while (!stack.empty()) {
            auto v = stack.back();
            stack.pop_back();
            net.members.push_back(pins[v]);
            for (auto w : adjacent[v]) {
                if (!seen[w]) {
                    seen[w] = true;
                    stack.push_back(w);
                }
            }
        }
        std::sort(net.members.begin(), net.members.end());
        nets.push_back(std::move(net));
    }

    std::sort(nets.begin(), nets.end(),
              [](const Net& x, const Net& y) { return x.members.front() < y.members.front(); });
    for (std::size_t i = 0; i < nets.size(); ++i) {
        nets[i].id = static_cast<int>(i + 1);
    }
    return nets;
}

namespace {

void put_optional(ordered_json& obj, const char* key, const std::optional<std::string>& v)
{
    if (v) {
        obj[key] = *v;
    }
}

} // namespace

ordered_json to_json(const DeviceSpec& spec)
{
    ordered_json doc = ordered_json::object();
    doc["description"] = spec.description;

    auto bom = ordered_json::array();
    for (const auto& item : spec.bom) {
        ordered_json j;
        j["ref"] = item.ref.str();
        j["part_type"] = item.part_type;
        put_optional(j, "value", item.value);
        put_optional(j, "note", item.note);
        bom.push_back(std::move(j));
    }
    doc["bill_of_materials"] = std::move(bom);

    auto pinouts = ordered_json::object();
    for (const auto& [ref, pins] : spec.pinouts.entries()) {
        auto list = ordered_json::array();
        for (const auto& p : pins) {
            ordered_json j;
            j["pin"] = p.pin;
            put_optional(j, "note", p.note);
            list.push_back(std::move(j));
        }
        pinouts[ref.str()] = std::move(list);
    }
    doc["pinouts"] = std::move(pinouts);

    auto schematic = ordered_json::array();
    for (const auto& c : spec.connections) {
        ordered_json j;
        j["from"] = c.a.str();
        j["to"] = c.b.str();
        put_optional(j, "note", c.note);
        schematic.push_back(std::move(j));
    }
    doc["schematic"] = std::move(schematic);

    if (spec.code) {
        ordered_json code;
        code["language_tag"] = spec.code->language_tag;
        code["source"] = spec.code->source;
        put_optional(code, "note", spec.code->note);
        doc["code"] = std::move(code);
    } else {
        doc["code"] = nullptr;
    }

    ordered_json prov;
    prov["model_id"] = spec.provenance.model_id;
    prov["prompt_digest"] = spec.provenance.prompt_digest;
    prov["reflection_iterations"] = spec.provenance.reflection_iterations;
    prov["created_at"] = spec.provenance.created_at;
    doc["provenance"] = std::move(prov);
    return doc;
}

std::string render_document(const DeviceSpec& spec)
{
    return to_json(spec).dump(2) + "\n";
}

std::string canonical_serialize(const DeviceSpec& spec)
{
    auto report = validate(spec);
    if (!report.ok()) {
        throw Error(Errc::InvalidSpec,
                    "cannot serialize invalid spec: " + report.findings.front().message);
    }
    return render_document(spec);
}

ordered_json to_json(const ValidationReport& report)
{
    auto findings = ordered_json::array();
    for (const auto& f : report.findings) {
        ordered_json j;
        switch (f.kind) {
        case ValidationKind::UndeclaredPart: j["kind"] = "undeclared_part"; break;
        case ValidationKind::MissingPin: j["kind"] = "missing_pin"; break;
        case ValidationKind::SelfLoop: j["kind"] = "self_loop"; break;
        }
        j["endpoint"] = f.endpoint.str();
        j["message"] = f.message;
        findings.push_back(std::move(j));
    }
    ordered_json out;
    out["findings"] = std::move(findings);
    out["ok"] = report.ok();
    return out;
}

} // namespace wirespec
