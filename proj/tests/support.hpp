#pragma once

// Helpers shared by the unit and acceptance suites: fixture paths, a random
// DeviceSpec generator and independent oracles.

#include "wirespec/devicespec.hpp"
#include "wirespec/errors.hpp"
#include "wirespec/partsdb.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace testing {

inline std::string data_path(const std::string& rel)
{
    return std::string(WIRESPEC_DATA_DIR) + "/" + rel;
}

inline nlohmann::json load_json(const std::string& rel)
{
    return nlohmann::json::parse(wirespec::read_file(data_path(rel)));
}

inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() /
               ("wirespec-test-" + name + "-" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// --- random specs ---------------------------------------------------------------

inline std::string random_text(std::mt19937& rng, std::size_t max_len)
{
    static const std::vector<std::string> pieces = {
        "a", "b", "Z", "7", " ", "-", "_", "\"", "\\", "{", "}", "[", "]", ":", ",", "\n", "\t",
        "é", "Ω", "µ", "→", "😀", "```", "json", "LED", "// x", "/*", "'", "%", "<", ">"};
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
    std::string s;
    for (std::size_t i = 0, n = len(rng); i < n; ++i) {
        s += pieces[pick(rng)];
    }
    return s;
}

inline std::optional<std::string> maybe_text(std::mt19937& rng, std::size_t max_len)
{
    if (std::bernoulli_distribution(0.5)(rng)) {
        return std::nullopt;
    }
    return random_text(rng, max_len);
}

inline std::string random_pin_name(std::mt19937& rng, std::size_t i)
{
    static const std::vector<std::string> stems = {"D", "A", "P", "IN", "OUT", "VCC", "GND", "SDA",
                                                   "SCL", "TRIG", "ECHO", "pin", "Vout", "CS"};
    std::uniform_int_distribution<std::size_t> pick(0, stems.size() - 1);
    return stems[pick(rng)] + std::to_string(i);
}

/// A structurally valid spec: every endpoint is declared, no self-loops, no
/// duplicate pins.
inline wirespec::DeviceSpec random_spec(std::mt19937& rng, int max_parts = 8, int max_pins = 6,
                                        int max_connections = 20)
{
    using namespace wirespec;
    DeviceSpec spec;
    spec.description = random_text(rng, 30);
    std::uniform_int_distribution<int> nparts(1, max_parts);
    std::uniform_int_distribution<int> npins(0, max_pins);
    static const std::vector<std::string> types = {"resistor", "LED", "Arduino Uno", "widget",
                                                   "pushbutton", "HC-SR04"};
    std::uniform_int_distribution<std::size_t> pick_type(0, types.size() - 1);

    std::vector<PinRef> pins;
    int n = nparts(rng);
    for (int i = 0; i < n; ++i) {
        PartRef ref("U" + std::to_string(i + 1));
        spec.bom.push_back({ref, types[pick_type(rng)], maybe_text(rng, 6), maybe_text(rng, 8)});
        spec.pinouts.add_part(ref);
        int k = npins(rng);
        for (int j = 0; j < k; ++j) {
            auto name = random_pin_name(rng, static_cast<std::size_t>(j));
            if (spec.pinouts.add_pin(ref, {name, maybe_text(rng, 6)})) {
                pins.push_back({ref, name});
            }
        }
    }
    if (pins.size() >= 2) {
        std::uniform_int_distribution<std::size_t> pick(0, pins.size() - 1);
        std::uniform_int_distribution<int> nconn(0, max_connections);
        for (int i = 0, m = nconn(rng); i < m; ++i) {
            auto a = pins[pick(rng)];
            auto b = pins[pick(rng)];
            if (a == b) {
                continue;
            }
            spec.connections.push_back({a, b, maybe_text(rng, 6)});
        }
    }
    if (std::bernoulli_distribution(0.7)(rng)) {
        spec.code = CodeArtifact{"arduino-cpp", random_text(rng, 40), maybe_text(rng, 6)};
    }
    spec.provenance = {random_text(rng, 8), random_text(rng, 8),
                       std::uniform_int_distribution<int>(0, 5)(rng), random_text(rng, 8)};
    return spec;
}

// --- net oracle -------------------------------------------------------------------

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

    std::size_t find(std::size_t x)
    {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

private:
    std::vector<std::size_t> parent_;
};

/// Components as sorted sets of "PART.PIN" strings, the whole collection sorted.
inline std::vector<std::vector<std::string>> oracle_nets(const std::vector<wirespec::Connection>& conns)
{
    std::map<std::string, std::size_t> index;
    auto id = [&](const wirespec::PinRef& p) {
        return index.emplace(p.str(), index.size()).first->second;
    };
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& c : conns) {
        edges.emplace_back(id(c.a), id(c.b));
    }
    UnionFind uf(index.size());
    for (auto [a, b] : edges) {
        uf.unite(a, b);
    }
    std::map<std::size_t, std::vector<std::string>> groups;
    for (const auto& [name, i] : index) {
        groups[uf.find(i)].push_back(name);
    }
    std::vector<std::vector<std::string>> out;
    for (auto& [root, members] : groups) {
        std::sort(members.begin(), members.end());
        out.push_back(std::move(members));
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<std::vector<std::string>> as_sets(const std::vector<wirespec::Net>& nets)
{
    std::vector<std::vector<std::string>> out;
    for (const auto& n : nets) {
        std::vector<std::string> members;
        for (const auto& m : n.members) {
            members.push_back(m.str());
        }
        out.push_back(std::move(members));
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Random multigraph over `nodes` pins spread across a few parts.
inline std::vector<wirespec::Connection> random_graph(std::mt19937& rng, std::size_t nodes,
                                                      std::size_t edges)
{
    std::vector<wirespec::Connection> out;
    std::uniform_int_distribution<std::size_t> pick(0, nodes - 1);
    auto pin = [](std::size_t i) {
        return wirespec::PinRef{wirespec::PartRef("P" + std::to_string(i % 17)), "n" + std::to_string(i)};
    };
    for (std::size_t i = 0; i < edges; ++i) {
        out.push_back({pin(pick(rng)), pin(pick(rng)), std::nullopt});
    }
    return out;
}

// --- scoring oracle ---------------------------------------------------------------

struct GeneratedPinout {
    std::vector<std::string> names;
    bool strict = false;      // expected by construction
    bool permissive = false;
};

/// Random generated pin list for `rec`. The expected verdicts are counted from
/// what was put in, never by asking the scorer's normalizer.
inline GeneratedPinout random_pinout(std::mt19937& rng, const wirespec::ComponentRecord& rec)
{
    GeneratedPinout g;
    std::bernoulli_distribution keep(0.8), alias(0.3), junk(0.2), dup(0.1);
    bool all = true, critical = true;
    for (const auto& pin : rec.pins) {
        if (!keep(rng)) {
            all = false;
            critical = critical && !pin.critical;
            continue;
        }
        const auto& name = (alias(rng) && !pin.aliases.empty()) ? pin.aliases.front() : pin.canonical;
        g.names.push_back(name);
        if (dup(rng)) {
            g.names.push_back(pin.canonical);
        }
    }
    bool extra = junk(rng);
    if (extra) {
        g.names.push_back("zz_not_a_pin_" + std::to_string(rng() % 100));
    }
    std::shuffle(g.names.begin(), g.names.end(), rng);
    g.permissive = critical;
    g.strict = all && !extra;
    return g;
}

} // namespace testing
