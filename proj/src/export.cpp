#include "wirespec/export.hpp"

#include "wirespec/errors.hpp"

#include <sstream>

namespace wirespec {

namespace {

void require_valid(const DeviceSpec& spec)
{
    auto report = validate(spec);
    if (!report.ok()) {
        throw Error(Errc::InvalidSpec, "cannot export invalid spec: " + report.findings.front().message);
    }
}

std::optional<std::string> supply_label(const Net& net, const DeviceSpec& spec,
                                        const KnowledgeBase& kb)
{
    bool rail = false;
    bool ground = false;
    for (const auto& m : net.members) {
        const auto* item = spec.find_part(m.part);
        const auto* rec = item ? kb.resolve(*item) : nullptr;
        if (!rec) {
            continue;
        }
        auto pin = normalize_pin(*rec, m.pin);
        if (!pin) {
            continue;
        }
        auto role = rec->pin(*pin)->role;
        rail = rail || (role == PinRole::Power && is_supply_source(*rec));
        ground = ground || role == PinRole::Ground;
    }
    if (rail && ground) {
        return std::nullopt;  // a short; ERC reports it, a label would only mislead
    }
    if (rail) {
        return "VCC";
    }
    if (ground) {
        return "GND";
    }
    return std::nullopt;
}

} // namespace

std::string to_flat_netlist(const DeviceSpec& spec, const KnowledgeBase* kb)
{
    require_valid(spec);
    auto nets = build_nets(spec.connections);
    std::ostringstream out;
    out << "# flat netlist: " << nets.size() << (nets.size() == 1 ? " net" : " nets") << '\n';
    for (const auto& net : nets) {
        out << "NET " << net.id;
        if (kb) {
            if (auto label = supply_label(net, spec, *kb)) {
                out << " [" << *label << ']';
            }
        }
        out << ':';
        for (const auto& m : net.members) {
            out << ' ' << m.str();
        }
        out << '\n';
    }
    return out.str();
}

std::vector<Net> parse_flat_netlist(std::string_view text)
{
    std::vector<Net> nets;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        auto bad = [&](const std::string& why) {
            return Error(Errc::SchemaError, "netlist line " + std::to_string(lineno) + ": " + why);
        };
        std::istringstream words(line.substr(first));
        std::string word;
        words >> word;
        if (word != "NET") {
            throw bad("expected 'NET'");
        }
        Net net;
        std::string id;
        words >> id;
        bool has_colon = !id.empty() && id.back() == ':';
        if (has_colon) {
            id.pop_back();
        }
        try {
            net.id = std::stoi(id);
        } catch (const std::exception&) {
            throw bad("bad net number '" + id + "'");
        }
        if (!has_colon) {
            std::string label;
            words >> label;
            if (label.size() < 4 || label.front() != '[' || label.substr(label.size() - 2) != "]:") {
                throw bad("expected ':' after the net number");
            }
            net.label = label.substr(1, label.size() - 3);
        }
        while (words >> word) {
            auto dot = word.find('.');
            if (dot == std::string::npos || dot == 0 || dot + 1 == word.size()) {
                throw bad("malformed member '" + word + "'");
            }
            net.members.push_back(PinRef{PartRef(word.substr(0, dot)), word.substr(dot + 1)});
        }
        nets.push_back(std::move(net));
    }
    return nets;
}

std::string to_graph_doc(const DeviceSpec& spec)
{
    require_valid(spec);
    ordered_json graph;
    graph["directed"] = false;
    graph["type"] = "device-netlist";
    graph["label"] = spec.description;

    auto nodes = ordered_json::object();
    for (const auto& item : spec.bom) {
        ordered_json node;
        node["label"] = item.ref.str() + " (" + item.part_type + ")";
        ordered_json meta;
        meta["part_type"] = item.part_type;
        if (item.value) {
            meta["value"] = *item.value;
        }
        auto pins = ordered_json::array();
        if (const auto* list = spec.pinouts.pins_of(item.ref)) {
            for (const auto& p : *list) {
                pins.push_back(p.pin);
            }
        }
        meta["pins"] = std::move(pins);
        node["metadata"] = std::move(meta);
        nodes[item.ref.str()] = std::move(node);
    }
    graph["nodes"] = std::move(nodes);

    auto edges = ordered_json::array();
    for (const auto& c : spec.connections) {
        ordered_json edge;
        edge["source"] = c.a.part.str();
        edge["target"] = c.b.part.str();
        edge["label"] = c.a.pin + " - " + c.b.pin;
        ordered_json meta;
        meta["from"] = c.a.str();
        meta["to"] = c.b.str();
        edge["metadata"] = std::move(meta);
        edges.push_back(std::move(edge));
    }
    graph["edges"] = std::move(edges);

    ordered_json doc;
    doc["graph"] = std::move(graph);
    return doc.dump(2) + "\n";
}

} // namespace wirespec
